// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/kernels.hpp"
#include "ddlab/rng.hpp"
#include "ddlab/tensor.hpp"

#include <doctest.h>

#include <vector>

using namespace ddlab;
namespace k = ddlab::kernels;

namespace {

std::vector<Real> random_values(std::size_t n, Rng& rng) {
    std::vector<Real> v(n);
    for (auto& x : v) x = static_cast<Real>(rng.uniform(-1, 1));
    return v;
}

// restores the thread count on scope exit
struct Threads {
    int saved = k::max_threads();
    explicit Threads(int n) { k::set_threads(n); }
    ~Threads() { k::set_threads(saved); }
};

} // namespace

TEST_CASE("matmul variants agree with the serial reference") {
    Rng rng(1);
    const std::size_t m = 7, n = 5, kk = 9;
    const auto a = random_values(m * kk, rng), b = random_values(kk * n, rng);
    std::vector<Real> ref(m * n), got(m * n);
    k::reference::matmul_nn(m, n, kk, a.data(), b.data(), ref.data(), false);
    k::matmul_nn(m, n, kk, a.data(), b.data(), got.data(), false);
    CHECK(got == ref);

    // B^T stored as (n x k)
    std::vector<Real> bt(n * kk);
    for (std::size_t i = 0; i < kk; ++i)
        for (std::size_t j = 0; j < n; ++j) bt[j * kk + i] = b[i * n + j];
    k::matmul_nt(m, n, kk, a.data(), bt.data(), got.data(), false);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    std::vector<Real> at(kk * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < kk; ++j) at[j * m + i] = a[i * kk + j];
    k::matmul_tn(m, n, kk, at.data(), b.data(), got.data(), false);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    // accumulate adds onto the existing contents
    std::vector<Real> twice = ref;
    k::matmul_nn(m, n, kk, a.data(), b.data(), twice.data(), true);
    for (std::size_t i = 0; i < twice.size(); ++i) CHECK(twice[i] == doctest::Approx(2 * ref[i]));
}

TEST_CASE("convolution kernels agree with the serial reference") {
    Rng rng(2);
    for (std::size_t stride : {1u, 2u}) {
        for (std::size_t ksize : {1u, 3u}) {
            k::ConvGeometry g{3, 9, 7, ksize, stride, ksize / 2};
            const std::size_t batch = 2, co = 4;
            const auto x = random_values(batch * 3 * 9 * 7, rng);
            const auto w = random_values(co * g.patch_size(), rng);
            const auto bias = random_values(co, rng);
            const std::size_t out_n = batch * co * g.out_pixels();

            std::vector<Real> ref(out_n), got(out_n);
            k::reference::conv2d_forward(batch, g, co, x.data(), w.data(), bias.data(), ref.data());
            k::conv2d_forward(batch, g, co, x.data(), w.data(), bias.data(), got.data());
            for (std::size_t i = 0; i < out_n; ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));

            const auto gout = random_values(out_n, rng);
            std::vector<Real> gx_ref(x.size()), gx(x.size());
            k::reference::conv2d_backward_input(batch, g, co, gout.data(), w.data(), gx_ref.data());
            k::conv2d_backward_input(batch, g, co, gout.data(), w.data(), gx.data());
            for (std::size_t i = 0; i < gx.size(); ++i) CHECK(gx[i] == doctest::Approx(gx_ref[i]).epsilon(1e-12));

            std::vector<Real> gw_ref(w.size()), gw(w.size()), gb_ref(co), gb(co);
            k::reference::conv2d_backward_params(batch, g, co, x.data(), gout.data(), gw_ref.data(), gb_ref.data());
            k::conv2d_backward_params(batch, g, co, x.data(), gout.data(), gw.data(), gb.data());
            for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(gw_ref[i]).epsilon(1e-12));
            for (std::size_t i = 0; i < co; ++i) CHECK(gb[i] == doctest::Approx(gb_ref[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("col2im is the adjoint of im2col") {
    Rng rng(3);
    k::ConvGeometry g{2, 6, 5, 3, 2, 1};
    const auto img = random_values(2 * 6 * 5, rng);
    const auto col = random_values(g.patch_size() * g.out_pixels(), rng);
    std::vector<Real> im2(g.patch_size() * g.out_pixels()), back(img.size(), 0);
    k::im2col(g, img.data(), im2.data());
    k::col2im(g, col.data(), back.data());
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < col.size(); ++i) lhs += im2[i] * col[i];
    for (std::size_t i = 0; i < img.size(); ++i) rhs += img[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("pairwise distances: reference, exact zeros, thread count") {
    Rng rng(4);
    const std::size_t q = 11, r = 13, d = 6;
    std::vector<double> a(q * d), b(r * d);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (std::size_t j = 0; j < d; ++j) b[4 * d + j] = a[2 * d + j];

    std::vector<double> ref(q * r), got(q * r);
    k::reference::pairwise_sq_dist(q, r, d, a.data(), b.data(), ref.data());
    k::pairwise_sq_dist(q, r, d, a.data(), b.data(), got.data());
    CHECK(got == ref);
    CHECK(got[2 * r + 4] == 0.0);

    std::vector<double> one(q * r);
    {
        Threads t(1);
        k::pairwise_sq_dist(q, r, d, a.data(), b.data(), one.data());
    }
    CHECK(one == got);
}

TEST_CASE("conv forward is bitwise independent of thread count") {
    Rng rng(5);
    k::ConvGeometry g{3, 8, 8, 3, 1, 1};
    const auto x = random_values(3 * 3 * 64, rng);
    const auto w = random_values(5 * g.patch_size(), rng);
    std::vector<Real> many(3 * 5 * 64), one(3 * 5 * 64);
    k::conv2d_forward(3, g, 5, x.data(), w.data(), nullptr, many.data());
    {
        Threads t(1);
        k::conv2d_forward(3, g, 5, x.data(), w.data(), nullptr, one.data());
    }
    CHECK(many == one);
}

TEST_CASE("tensor basics") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(shape_size({2, 3, 4}) == 24);
    CHECK(t.all_finite());
    t[4] = 7;
    CHECK(t.slice_rows(1, 2).shape() == Shape{1, 3});
    CHECK(t.slice_rows(1, 2)[1] == 7);
    const std::vector<std::size_t> rows{1, 0};
    const Tensor g = t.gather_rows(rows);
    CHECK(g[1] == 7);
    CHECK(g[4] == 1.5);
    CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
    CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<Real>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(require_shape(t, {3, 2}, "t"), ShapeError);
    t[0] = std::numeric_limits<Real>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
}
