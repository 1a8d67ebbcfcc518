// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/nn/train.hpp"
#include "ddlab/zoo.hpp"

#include <cstring>

namespace ddlab::nn {

// Layout (all integers little-endian):
//   "DDLABCKP" u32 version
//   str family, u64 width, u32 rank + u64 dims (input shape), u64 classes, u8 batchnorm
//   u64 train_seed, u64 tensor count
//   per tensor: u8 kind (0 parameter, 1 buffer), str name, u32 rank, u64 dims, f64 values
//   u64 FNV-1a of everything before it
// where str = u32 length + bytes.

namespace {

constexpr char kMagic[8] = {'D', 'D', 'L', 'A', 'B', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void tensor(std::uint8_t kind, const std::string& name, const Tensor& t) {
        u8(kind);
        str(name);
        u32(static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) u64(d);
        for (auto v : t.values()) f64(static_cast<double>(v));
    }
    std::string& buffer() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw DataError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    Shape shape() {
        const std::uint32_t rank = u32();
        if (rank > 8) throw DataError("checkpoint: implausible tensor rank");
        Shape s(rank);
        for (auto& d : s) d = u64();
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const Model& model, std::uint64_t train_seed, const std::string& path) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kVersion);
    const ModelSpec& spec = model.spec();
    w.str(to_string(spec.family));
    w.u64(spec.width);
    w.u32(static_cast<std::uint32_t>(spec.input_shape.size()));
    for (auto d : spec.input_shape) w.u64(d);
    w.u64(spec.class_count);
    w.u8(spec.batchnorm ? 1 : 0);
    w.u64(train_seed);
    const auto params = model.parameters();
    const auto bufs = model.buffers();
    w.u64(params.size() + bufs.size());
    for (const auto* p : params) w.tensor(0, p->name, p->value);
    for (const auto* b : bufs) w.tensor(1, b->name, b->value);
    w.u64(fnv1a64(w.buffer()));
    write_file_atomic(path, w.buffer());
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string data = read_text_file(path);
    if (data.size() < sizeof kMagic + 12 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw DataError(path + ": not a ddlab checkpoint");
    const std::string_view body(data.data(), data.size() - 8);
    Reader tail(std::string_view(data).substr(data.size() - 8));
    if (tail.u64() != fnv1a64(body)) throw DataError(path + ": checkpoint checksum failure");

    Reader r(body);
    r.need(sizeof kMagic);
    for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8();
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
    ModelSpec spec;
    spec.family = parse_family(r.str());
    spec.width = r.u64();
    spec.input_shape = r.shape();
    spec.class_count = r.u64();
    spec.batchnorm = r.u8() != 0;
    const std::uint64_t seed = r.u64();

    Model model = zoo::build_model(spec, 0);
    auto params = model.parameters();
    auto bufs = model.buffers();
    const std::uint64_t count = r.u64();
    if (count != params.size() + bufs.size()) throw DataError(path + ": tensor count does not match architecture");
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint8_t kind = r.u8();
        const std::string name = r.str();
        const Shape shape = r.shape();
        Tensor* target = nullptr;
        if (kind == 0 && i < params.size()) {
            target = &params[i]->value;
        } else if (kind == 1 && i >= params.size()) {
            target = &bufs[i - params.size()]->value;
        } else {
            throw DataError(path + ": unexpected tensor kind for " + name);
        }
        if (target->shape() != shape)
            throw DataError(path + ": tensor " + name + " has shape " + shape_to_string(shape) + ", expected " +
                            shape_to_string(target->shape()));
        for (auto& v : target->values()) v = static_cast<Real>(r.f64());
    }
    if (r.pos() != body.size()) throw DataError(path + ": trailing bytes in checkpoint");
    model.mark_updated();
    return {std::move(model), seed};
}

} // namespace ddlab::nn
