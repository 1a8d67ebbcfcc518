// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ddlab::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

using Index = std::int64_t;

} // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(std::max(1, n));
#else
    (void)n;
#endif
}

void matmul_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate) {
    const bool par = m * n * k > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        Real* crow = c + static_cast<std::size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, Real{0});
        const Real* arow = a + static_cast<std::size_t>(i) * k;
        for (std::size_t p = 0; p < k; ++p) {
            const Real av = arow[p];
            if (av == Real{0}) continue;
            const Real* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate) {
    const bool par = m * n * k > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        const Real* arow = a + static_cast<std::size_t>(i) * k;
        Real* crow = c + static_cast<std::size_t>(i) * n;
        for (std::size_t j = 0; j < n; ++j) {
            const Real* brow = b + j * k;
            Real acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

void matmul_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate) {
    const bool par = m * n * k > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index i = 0; i < static_cast<Index>(m); ++i) {
        Real* crow = c + static_cast<std::size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, Real{0});
        for (std::size_t p = 0; p < k; ++p) {
            const Real av = a[p * m + static_cast<std::size_t>(i)];
            if (av == Real{0}) continue;
            const Real* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void im2col(const ConvGeometry& g, const Real* image, Real* columns) {
    const std::size_t oh = g.out_height(), ow = g.out_width();
    const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        const Real* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
                Real* out = columns + row * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        out[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix] : Real{0};
                    }
                }
            }
        }
    }
}

void col2im(const ConvGeometry& g, const Real* columns, Real* image) {
    const std::size_t oh = g.out_height(), ow = g.out_width();
    const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        Real* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
                const Real* in = columns + row * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= h) continue;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < w) plane[iy * w + ix] += in[oy * ow + ox];
                    }
                }
            }
        }
    }
}

void conv2d_forward(std::size_t batch, const ConvGeometry& g, std::size_t out_channels, const Real* x,
                    const Real* weight, const Real* bias, Real* out) {
    const std::size_t kdim = g.patch_size(), pix = g.out_pixels();
    const std::size_t in_stride = g.channels * g.height * g.width, out_stride = out_channels * pix;
    const bool par = batch > 1 && batch * out_channels * kdim * pix > kParallelWork;
#pragma omp parallel if (par)
    {
        std::vector<Real> cols(kdim * pix);
#pragma omp for schedule(static)
        for (Index n = 0; n < static_cast<Index>(batch); ++n) {
            im2col(g, x + static_cast<std::size_t>(n) * in_stride, cols.data());
            Real* o = out + static_cast<std::size_t>(n) * out_stride;
            matmul_nn(out_channels, pix, kdim, weight, cols.data(), o, false);
            if (bias) {
                for (std::size_t co = 0; co < out_channels; ++co)
                    for (std::size_t p = 0; p < pix; ++p) o[co * pix + p] += bias[co];
            }
        }
    }
}

void conv2d_backward_input(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                           const Real* grad_out, const Real* weight, Real* grad_x) {
    const std::size_t kdim = g.patch_size(), pix = g.out_pixels();
    const std::size_t in_stride = g.channels * g.height * g.width, out_stride = out_channels * pix;
    const bool par = batch > 1 && batch * out_channels * kdim * pix > kParallelWork;
#pragma omp parallel if (par)
    {
        std::vector<Real> cols(kdim * pix);
#pragma omp for schedule(static)
        for (Index n = 0; n < static_cast<Index>(batch); ++n) {
            matmul_tn(kdim, pix, out_channels, weight, grad_out + static_cast<std::size_t>(n) * out_stride,
                      cols.data(), false);
            Real* gx = grad_x + static_cast<std::size_t>(n) * in_stride;
            std::fill(gx, gx + in_stride, Real{0});
            col2im(g, cols.data(), gx);
        }
    }
}

void conv2d_backward_params(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                            const Real* x, const Real* grad_out, Real* grad_weight, Real* grad_bias) {
    const std::size_t kdim = g.patch_size(), pix = g.out_pixels();
    const std::size_t in_stride = g.channels * g.height * g.width, out_stride = out_channels * pix;
    std::vector<Real> cols(kdim * pix);
    // Images are accumulated in ascending order; the parallel split is over
    // output channels inside matmul_nt.
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(g, x + n * in_stride, cols.data());
        matmul_nt(out_channels, kdim, pix, grad_out + n * out_stride, cols.data(), grad_weight, n > 0);
    }
    if (batch == 0) std::fill(grad_weight, grad_weight + out_channels * kdim, Real{0});
    if (grad_bias) {
        for (std::size_t co = 0; co < out_channels; ++co) {
            Real acc = 0;
            for (std::size_t n = 0; n < batch; ++n) {
                const Real* go = grad_out + n * out_stride + co * pix;
                for (std::size_t p = 0; p < pix; ++p) acc += go[p];
            }
            grad_bias[co] = acc;
        }
    }
}

void pairwise_sq_dist(std::size_t q, std::size_t r, std::size_t d, const double* queries,
                      const double* reference, double* out) {
    const bool par = q * r * d > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (Index i = 0; i < static_cast<Index>(q); ++i) {
        const double* qi = queries + static_cast<std::size_t>(i) * d;
        double* row = out + static_cast<std::size_t>(i) * r;
        for (std::size_t j = 0; j < r; ++j) {
            const double* rj = reference + j * d;
            double acc = 0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = qi[t] - rj[t];
                acc += diff * diff;
            }
            row[j] = acc;
        }
    }
}

} // namespace ddlab::kernels
