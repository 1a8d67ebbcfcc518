// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ddlab {

#ifdef DDLAB_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

// Error taxonomy. The CLI maps these onto exit codes (data -> 2, numeric -> 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or missing input files, inconsistent datasets, bad configs.
class DataError : public Error {
public:
    using Error::Error;
};

// Tensor shapes that do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Divergence and non-finite values.
class NumericError : public Error {
public:
    using Error::Error;
};

// Violated preconditions on arguments (out-of-range p, k, widths...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// splitmix64 finalizer; used to derive independent seeds from tuples.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a) noexcept {
    return mix64(mix64(base) ^ (a * 0xd6e8feb86659fd93ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
    return derive_seed(derive_seed(base, a), b);
}

// FNV-1a, 64-bit. Used for file checksums and content digests.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

// Shortest decimal text that round-trips to the same double.
std::string format_real(double v);

} // namespace ddlab
