#pragma once

// conv(5x5) -> ReLU -> maxpool(2) -> conv(5x5) -> ReLU -> maxpool(2) ->
// flatten -> dense -> logits.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tifinagh/errors.hpp"
#include "tifinagh/ops.hpp"
#include "tifinagh/tensor.hpp"

namespace tifinagh {

struct CnnConfig {
    std::size_t conv1_out = 8;
    std::size_t conv1_kernel = 5;
    std::size_t conv2_out = 16;
    std::size_t conv2_kernel = 5;
    std::size_t pool = 2;
    std::size_t n_classes = 33;
    std::size_t input_side = 28;
    std::uint64_t init_seed = 1;

    /// Feature-map sides after each layer: conv1, pool1, conv2, pool2.
    struct Trace {
        std::size_t conv1, pool1, conv2, pool2;
    };

    Trace trace() const {
        if (pool != 2) throw ConfigError("only 2x2 pooling is supported (pool = " + std::to_string(pool) + ")");
        if (conv1_out == 0 || conv2_out == 0 || conv1_kernel == 0 || conv2_kernel == 0) {
            throw ConfigError("channel counts and kernel sizes must be positive");
        }
        if (n_classes < 2) throw ConfigError("need at least 2 classes");
        Trace t{};
        if (input_side < conv1_kernel) throw ConfigError("conv1 kernel larger than the input");
        t.conv1 = input_side - conv1_kernel + 1;
        if (t.conv1 % 2) throw ConfigError("conv1 output side " + std::to_string(t.conv1) + " is not divisible by the pool");
        t.pool1 = t.conv1 / 2;
        if (t.pool1 < conv2_kernel) throw ConfigError("conv2 kernel larger than its input");
        t.conv2 = t.pool1 - conv2_kernel + 1;
        if (t.conv2 % 2) throw ConfigError("conv2 output side " + std::to_string(t.conv2) + " is not divisible by the pool");
        t.pool2 = t.conv2 / 2;
        return t;
    }

    std::size_t flattened() const {
        const auto t = trace();
        return t.pool2 * t.pool2 * conv2_out;
    }

    friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

/// Canonical parameter order, also the order in weight files.
inline constexpr std::array<const char*, 6> kParameterNames = {"conv1.weight", "conv1.bias", "conv2.weight",
                                                               "conv2.bias",   "dense.weight", "dense.bias"};

template <typename T>
class Model {
public:
    /// Zero-initialized parameters shaped for `cfg`.
    explicit Model(const CnnConfig& cfg) : cfg_(cfg) {
        const std::size_t flat = cfg.flattened();
        const std::vector<Shape> shapes = {
            {cfg.conv1_out, 1, cfg.conv1_kernel, cfg.conv1_kernel},
            {cfg.conv1_out},
            {cfg.conv2_out, cfg.conv1_out, cfg.conv2_kernel, cfg.conv2_kernel},
            {cfg.conv2_out},
            {cfg.n_classes, flat},
            {cfg.n_classes},
        };
        for (std::size_t i = 0; i < shapes.size(); ++i) params_.emplace_back(kParameterNames[i], Tensor<T>(shapes[i]));
    }

    const CnnConfig& config() const noexcept { return cfg_; }
    std::span<GradPair<T>> parameters() noexcept { return params_; }
    std::span<const GradPair<T>> parameters() const noexcept { return params_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    /// Forward pass that keeps the activations needed by backward().
    Tensor<T> forward(const Tensor<T>& batch) {
        Cache c;
        Tensor<T> logits = run(batch, &c);
        cache_ = std::move(c);
        return logits;
    }

    /// Forward pass without touching the cache; safe on a shared model.
    Tensor<T> infer(const Tensor<T>& batch) const { return run(batch, nullptr); }

    /// Backpropagates dLoss/dLogits from the last forward(). Gradients are
    /// written into parameters()[i].grad and also returned in that order.
    std::vector<Tensor<T>> backward(const Tensor<T>& d_logits) {
        if (!cache_) throw StateError("backward called without a preceding forward");
        const Cache& c = *cache_;
        const std::size_t N = c.input.dim(0);
        if (d_logits.shape() != Shape{N, cfg_.n_classes}) {
            throw DimensionError("backward: dLogits shape " + shape_string(d_logits.shape()) + " does not match logits " +
                                 shape_string(Shape{N, cfg_.n_classes}));
        }
        auto dense = dense_backward(c.flat, param(4), d_logits);
        const Tensor<T> d_pool2 = std::move(dense.d_input).reshaped(c.pool2.indices_output_shape);
        const Tensor<T> d_conv2 = relu_backward(c.conv2_pre, maxpool2_backward(c.pool2.indices, d_pool2));
        auto conv2 = conv2d_backward(c.pool1_out, param(2), d_conv2);
        const Tensor<T> d_conv1 = relu_backward(c.conv1_pre, maxpool2_backward(c.pool1.indices, conv2.d_input));
        auto conv1 = conv2d_backward(c.input, param(0), d_conv1, {}, false);

        std::vector<Tensor<T>> grads;
        grads.reserve(6);
        grads.push_back(std::move(conv1.d_weights));
        grads.push_back(std::move(conv1.d_bias));
        grads.push_back(std::move(conv2.d_weights));
        grads.push_back(std::move(conv2.d_bias));
        grads.push_back(std::move(dense.d_weights));
        grads.push_back(std::move(dense.d_bias));
        for (std::size_t i = 0; i < grads.size(); ++i) params_[i].grad = grads[i];
        return grads;
    }

    bool has_cache() const noexcept { return cache_.has_value(); }

private:
    struct PoolStage {
        PoolIndices indices;
        Shape indices_output_shape;
    };

    struct Cache {
        Tensor<T> input;
        Tensor<T> conv1_pre;
        PoolStage pool1;
        Tensor<T> pool1_out;
        Tensor<T> conv2_pre;
        PoolStage pool2;
        Tensor<T> flat;
    };

    const Tensor<T>& param(std::size_t i) const { return params_[i].value; }

    Tensor<T> run(const Tensor<T>& batch, Cache* cache) const {
        const std::size_t side = cfg_.input_side;
        if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != side || batch.dim(3) != side) {
            throw DimensionError("model input must be [N,1," + std::to_string(side) + "," + std::to_string(side) +
                                 "], got " + shape_string(batch.shape()));
        }
        const std::size_t N = batch.dim(0);
        Tensor<T> conv1 = conv2d_forward(batch, param(0), param(1));
        auto pool1 = maxpool2_forward(relu_forward(conv1));
        Tensor<T> conv2 = conv2d_forward(pool1.output, param(2), param(3));
        auto pool2 = maxpool2_forward(relu_forward(conv2));
        const Shape pool2_shape = pool2.output.shape();
        Tensor<T> flat = std::move(pool2.output).reshaped({N, cfg_.flattened()});
        Tensor<T> logits = dense_forward(flat, param(4), param(5));
        if (cache) {
            cache->input = batch;
            cache->conv1_pre = std::move(conv1);
            cache->pool1 = {std::move(pool1.indices), pool1.output.shape()};
            cache->pool1_out = std::move(pool1.output);
            cache->conv2_pre = std::move(conv2);
            cache->pool2 = {std::move(pool2.indices), pool2_shape};
            cache->flat = std::move(flat);
        }
        return logits;
    }

    CnnConfig cfg_;
    std::vector<GradPair<T>> params_;
    std::optional<Cache> cache_;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
template <typename T = float>
Model<T> init_model(const CnnConfig& cfg, std::uint64_t seed) {
    Model<T> m(cfg);
    std::mt19937_64 rng(seed);
    const auto k1 = cfg.conv1_kernel * cfg.conv1_kernel;
    const auto k2 = cfg.conv2_kernel * cfg.conv2_kernel;
    const std::array<std::pair<std::size_t, std::size_t>, 3> fans = {{
        {1 * k1, cfg.conv1_out * k1},
        {cfg.conv1_out * k2, cfg.conv2_out * k2},
        {cfg.flattened(), cfg.n_classes},
    }};
    auto params = m.parameters();
    for (std::size_t layer = 0; layer < 3; ++layer) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fans[layer].first + fans[layer].second));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& w : params[2 * layer].value.data()) w = static_cast<T>(dist(rng));
    }
    return m;
}

/// Top-k class indices per row, highest logit first; equal logits keep the
/// lower index first.
template <typename T>
std::vector<std::vector<int>> predict_topk(const Tensor<T>& logits, std::size_t k) {
    detail::require_rank(logits, 2, "predict_topk", "logits");
    const std::size_t N = logits.dim(0), C = logits.dim(1);
    if (k < 1 || k > C) throw ConfigError("predict_topk: k = " + std::to_string(k) + " outside [1, " + std::to_string(C) + "]");
    std::vector<std::vector<int>> out(N);
    std::vector<int> order(C);
    for (std::size_t n = 0; n < N; ++n) {
        const T* row = logits.raw() + n * C;
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [row](int a, int b) { return row[a] != row[b] ? row[a] > row[b] : a < b; });
        out[n].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weight files: 8-byte tag, then per tensor
//   u32 name length | name | u32 rank | u32 dims[rank] | f32 payload
// with every integer and float little-endian.

inline constexpr char kWeightTag[8] = {'T', 'F', 'N', 'G', 'C', 'N', 'N', '1'};

namespace detail {

inline void put_le32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class LeReader {
public:
    explicit LeReader(std::vector<char> buf) : buf_(std::move(buf)) {}

    std::uint32_t u32(const std::string& what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf_[pos_ + static_cast<std::size_t>(i)]);
        pos_ += 4;
        return v;
    }

    std::string bytes(std::size_t n, const std::string& what) {
        need(n, what);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ == buf_.size(); }

private:
    void need(std::size_t n, const std::string& what) const {
        if (buf_.size() - pos_ < n) {
            throw FormatError("weights file truncated at byte offset " + std::to_string(buf_.size()) + " while reading " + what);
        }
    }

    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::string encode_weights(const Model<T>& model) {
    std::string out(kWeightTag, sizeof kWeightTag);
    for (const auto& p : model.parameters()) {
        detail::put_le32(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        detail::put_le32(out, static_cast<std::uint32_t>(p.value.rank()));
        for (auto d : p.value.shape()) detail::put_le32(out, static_cast<std::uint32_t>(d));
        for (T v : p.value.data()) detail::put_le32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

template <typename T>
void save_weights(const Model<T>& model, const std::filesystem::path& path) {
    const std::string bytes = encode_weights(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

template <typename T = float>
Model<T> decode_weights(std::vector<char> bytes, const CnnConfig& cfg) {
    Model<T> m(cfg);
    detail::LeReader in(std::move(bytes));
    if (in.bytes(sizeof kWeightTag, "format tag") != std::string(kWeightTag, sizeof kWeightTag)) {
        throw FormatError("weights file: unknown format tag at byte offset 0");
    }
    for (auto& p : m.parameters()) {
        const std::uint32_t len = in.u32(p.name + " name length");
        if (len > 256) throw FormatError("weights file: implausible name length for " + p.name);
        const std::string name = in.bytes(len, p.name + " name");
        if (name != p.name) throw FormatError("weights file: expected tensor " + p.name + ", found '" + name + "'");
        const std::uint32_t rank = in.u32(p.name + " rank");
        if (rank > 8) throw FormatError("weights file: implausible rank for " + p.name);
        Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(in.u32(p.name + " dims"));
        if (shape != p.value.shape()) {
            throw FormatError("weights file: shape mismatch for " + p.name + " (file " + shape_string(shape) +
                              ", config " + shape_string(p.value.shape()) + ")");
        }
        for (T& v : p.value.data()) v = static_cast<T>(std::bit_cast<float>(in.u32(p.name + " payload")));
    }
    if (!in.done()) throw FormatError("weights file: trailing data at byte offset " + std::to_string(in.pos()));
    return m;
}

template <typename T = float>
Model<T> load_weights(const std::filesystem::path& path, const CnnConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
    return decode_weights<T>(std::move(bytes), cfg);
}

}  // namespace tifinagh
