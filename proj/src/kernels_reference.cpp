// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

// Straightforward loop nests. No im2col, no OpenMP.

#include "ddlab/kernels.hpp"

#include <algorithm>

namespace ddlab::kernels::reference {

void matmul_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Real acc = accumulate ? c[i * n + j] : Real{0};
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

namespace {

// Input coordinate for output position o and kernel tap t, or -1 when padded.
std::ptrdiff_t source(std::size_t o, std::size_t t, const ConvGeometry& g, std::size_t extent) {
    const auto v = static_cast<std::ptrdiff_t>(o * g.stride + t) - static_cast<std::ptrdiff_t>(g.pad);
    return (v < 0 || v >= static_cast<std::ptrdiff_t>(extent)) ? -1 : v;
}

} // namespace

void conv2d_forward(std::size_t batch, const ConvGeometry& g, std::size_t out_channels, const Real* x,
                    const Real* weight, const Real* bias, Real* out) {
    const std::size_t oh = g.out_height(), ow = g.out_width(), kk = g.kernel;
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t co = 0; co < out_channels; ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    Real acc = bias ? bias[co] : Real{0};
                    for (std::size_t ci = 0; ci < g.channels; ++ci)
                        for (std::size_t ky = 0; ky < kk; ++ky) {
                            const auto iy = source(oy, ky, g, g.height);
                            if (iy < 0) continue;
                            for (std::size_t kx = 0; kx < kk; ++kx) {
                                const auto ix = source(ox, kx, g, g.width);
                                if (ix < 0) continue;
                                acc += weight[((co * g.channels + ci) * kk + ky) * kk + kx] *
                                       x[((n * g.channels + ci) * g.height + static_cast<std::size_t>(iy)) * g.width +
                                         static_cast<std::size_t>(ix)];
                            }
                        }
                    out[((n * out_channels + co) * oh + oy) * ow + ox] = acc;
                }
}

void conv2d_backward_input(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                           const Real* grad_out, const Real* weight, Real* grad_x) {
    const std::size_t oh = g.out_height(), ow = g.out_width(), kk = g.kernel;
    std::fill(grad_x, grad_x + batch * g.channels * g.height * g.width, Real{0});
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t co = 0; co < out_channels; ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const Real go = grad_out[((n * out_channels + co) * oh + oy) * ow + ox];
                    for (std::size_t ci = 0; ci < g.channels; ++ci)
                        for (std::size_t ky = 0; ky < kk; ++ky) {
                            const auto iy = source(oy, ky, g, g.height);
                            if (iy < 0) continue;
                            for (std::size_t kx = 0; kx < kk; ++kx) {
                                const auto ix = source(ox, kx, g, g.width);
                                if (ix < 0) continue;
                                grad_x[((n * g.channels + ci) * g.height + static_cast<std::size_t>(iy)) * g.width +
                                       static_cast<std::size_t>(ix)] +=
                                    go * weight[((co * g.channels + ci) * kk + ky) * kk + kx];
                            }
                        }
                }
}

void conv2d_backward_params(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                            const Real* x, const Real* grad_out, Real* grad_weight, Real* grad_bias) {
    const std::size_t oh = g.out_height(), ow = g.out_width(), kk = g.kernel;
    std::fill(grad_weight, grad_weight + out_channels * g.patch_size(), Real{0});
    if (grad_bias) std::fill(grad_bias, grad_bias + out_channels, Real{0});
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t co = 0; co < out_channels; ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const Real go = grad_out[((n * out_channels + co) * oh + oy) * ow + ox];
                    if (grad_bias) grad_bias[co] += go;
                    for (std::size_t ci = 0; ci < g.channels; ++ci)
                        for (std::size_t ky = 0; ky < kk; ++ky) {
                            const auto iy = source(oy, ky, g, g.height);
                            if (iy < 0) continue;
                            for (std::size_t kx = 0; kx < kk; ++kx) {
                                const auto ix = source(ox, kx, g, g.width);
                                if (ix < 0) continue;
                                grad_weight[((co * g.channels + ci) * kk + ky) * kk + kx] +=
                                    go * x[((n * g.channels + ci) * g.height + static_cast<std::size_t>(iy)) * g.width +
                                           static_cast<std::size_t>(ix)];
                            }
                        }
                }
}

void pairwise_sq_dist(std::size_t q, std::size_t r, std::size_t d, const double* queries,
                      const double* reference, double* out) {
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            double acc = 0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = queries[i * d + t] - reference[j * d + t];
                acc += diff * diff;
            }
            out[i * r + j] = acc;
        }
}

} // namespace ddlab::kernels::reference
