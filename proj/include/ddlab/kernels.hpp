// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/common.hpp"

#include <cstddef>

// Data-parallel inner loops. Every output element is produced by exactly one
// thread and its reduction runs in a fixed order, so results are bitwise
// independent of the OpenMP thread count.
//
// All matrices are row-major and densely packed.
namespace ddlab::kernels {

struct ConvGeometry {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t pad = 1;

    std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
    std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
    std::size_t patch_size() const { return channels * kernel * kernel; }
    std::size_t out_pixels() const { return out_height() * out_width(); }
};

// C[m x n] (+)= A[m x k] * B[k x n]
void matmul_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate);
// C[m x n] (+)= A[m x k] * B[n x k]^T
void matmul_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate);
// C[m x n] (+)= A[k x m]^T * B[k x n]
void matmul_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate);

// One image (C,H,W) -> columns (C*kh*kw, OH*OW).
void im2col(const ConvGeometry& g, const Real* image, Real* columns);
// Adjoint of im2col: scatter-adds columns back into an image buffer.
void col2im(const ConvGeometry& g, const Real* columns, Real* image);

// x: (N, C, H, W); weight: (Co, C, k, k); bias may be null; out: (N, Co, OH, OW).
void conv2d_forward(std::size_t batch, const ConvGeometry& g, std::size_t out_channels, const Real* x,
                    const Real* weight, const Real* bias, Real* out);
// grad_x: (N, C, H, W), overwritten.
void conv2d_backward_input(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                           const Real* grad_out, const Real* weight, Real* grad_x);
// grad_weight: (Co, C, k, k), overwritten; grad_bias (Co) overwritten when non-null.
void conv2d_backward_params(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                            const Real* x, const Real* grad_out, Real* grad_weight, Real* grad_bias);

// D[q x r] = squared Euclidean distances between rows of Q (q x d) and R (r x d).
// Computed as sum of squared differences, not via the dot-product expansion,
// so coincident points are at exactly zero distance.
void pairwise_sq_dist(std::size_t q, std::size_t r, std::size_t d, const double* queries,
                      const double* reference, double* out);

// Serial, loop-literal versions of the kernels above. They exist so tests and
// benchmarks have an independent baseline.
namespace reference {

void matmul_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c,
               bool accumulate);
void conv2d_forward(std::size_t batch, const ConvGeometry& g, std::size_t out_channels, const Real* x,
                    const Real* weight, const Real* bias, Real* out);
void conv2d_backward_input(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                           const Real* grad_out, const Real* weight, Real* grad_x);
void conv2d_backward_params(std::size_t batch, const ConvGeometry& g, std::size_t out_channels,
                            const Real* x, const Real* grad_out, Real* grad_weight, Real* grad_bias);
void pairwise_sq_dist(std::size_t q, std::size_t r, std::size_t d, const double* queries,
                      const double* reference, double* out);

} // namespace reference

// Number of OpenMP threads kernels will use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

} // namespace ddlab::kernels
