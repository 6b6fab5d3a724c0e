#pragma once

// BaseEncoder (two ReLU conv blocks + adaptive max pooling), the STAA
// encoder (dilated convolution + gated multi-head self-attention) and the
// unit-hypersphere projection head, plus regression/classification heads for
// fine-tuning.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qscl/rng.hpp"
#include "qscl/tensor.hpp"

namespace qscl {

struct EncoderConfig {
    int64_t input_dim = 0;    // I: AP count, fixed by the dataset
    int64_t channels = 64;    // F
    int64_t pooled_len = 16;  // L after adaptive pooling
    int64_t kernel1 = 3;
    int64_t kernel2 = 3;
    int64_t kernel_staa = 3;
    int64_t dilation = 2;
    int64_t heads = 4;
    int64_t proj_dim = 64;  // D
    int64_t proj_hidden = 128;
    int64_t n_floors = 0;
    int64_t n_buildings = 0;
    bool heads_use_projection = false;  // default: pre-projection pooled features
    uint64_t init_seed = 1;

    int64_t head_input_dim() const {
        return heads_use_projection ? proj_dim : channels * pooled_len;
    }

    void validate() const {
        if (input_dim < 1 || channels < 1 || pooled_len < 1 || proj_dim < 1 || proj_hidden < 1)
            throw std::invalid_argument("EncoderConfig: all sizes must be >= 1");
        if (kernel1 < 1 || kernel2 < 1 || kernel_staa < 1 || dilation < 1 || heads < 1)
            throw std::invalid_argument("EncoderConfig: all sizes must be >= 1");
        if (channels % heads != 0)
            throw std::invalid_argument("EncoderConfig: channels must be divisible by heads");
    }
};

// Named parameter tensors. std::map keeps iteration order deterministic.
struct ModelParams {
    std::map<std::string, Tensor> tensors;

    Tensor& at(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::out_of_range("ModelParams: no tensor named " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::out_of_range("ModelParams: no tensor named " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return tensors.count(name) != 0; }

    // everything trained during contrastive pretraining
    std::vector<std::string> encoder_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : tensors)
            if (k.rfind("head.", 0) != 0) out.push_back(k);
        return out;
    }
    std::vector<std::string> head_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : tensors)
            if (k.rfind("head.", 0) == 0) out.push_back(k);
        return out;
    }
    std::vector<std::string> all_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : tensors) out.push_back(k);
        return out;
    }
};

// Uniform fan-in init for weights, zeros for biases, layer-norm gain of one.
inline ModelParams init_params(const EncoderConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.init_seed);
    ModelParams p;
    auto w = [&](const std::string& name, const Shape& shape, int64_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        p.tensors.emplace(name, Tensor::uniform(shape, -bound, bound, rng));
    };
    auto zeros = [&](const std::string& name, const Shape& shape) {
        p.tensors.emplace(name, Tensor::zeros(shape));
    };
    const int64_t F = cfg.channels, L = cfg.pooled_len;

    w("conv1.w", {F, 1, cfg.kernel1}, cfg.kernel1);
    zeros("conv1.b", {F});
    w("conv2.w", {F, F, cfg.kernel2}, F * cfg.kernel2);
    zeros("conv2.b", {F});

    w("staa.conv.w", {F, F, cfg.kernel_staa}, F * cfg.kernel_staa);
    zeros("staa.conv.b", {F});
    for (const char* n : {"staa.wq", "staa.wk", "staa.wv", "staa.wo"}) w(n, {F, F}, F);
    for (const char* n : {"staa.bq", "staa.bk", "staa.bv", "staa.bo"}) zeros(n, {F});
    w("staa.adapt.w", {1, F}, F);
    zeros("staa.adapt.b", {1});
    p.tensors.emplace("staa.ln.g", Tensor::full({F}, 1.0));
    zeros("staa.ln.b", {F});

    w("proj.fc1.w", {cfg.proj_hidden, F * L}, F * L);
    zeros("proj.fc1.b", {cfg.proj_hidden});
    w("proj.fc2.w", {cfg.proj_dim, cfg.proj_hidden}, cfg.proj_hidden);
    zeros("proj.fc2.b", {cfg.proj_dim});

    const int64_t P = cfg.head_input_dim();
    if (cfg.n_floors >= 1 && cfg.n_buildings >= 1) {
        w("head.reg.w", {2, P}, P);
        zeros("head.reg.b", {2});
        w("head.floor.w", {cfg.n_floors, P}, P);
        zeros("head.floor.b", {cfg.n_floors});
        w("head.bldg.w", {cfg.n_buildings, P}, P);
        zeros("head.bldg.b", {cfg.n_buildings});
    }
    return p;
}

// BxI -> BxFxL: treat the AP axis as a 1-channel sequence, two ReLU conv
// blocks, then adaptive max pooling down to L.
inline Tensor base_encode(const Tensor& x, const ModelParams& p, const EncoderConfig& cfg) {
    const Shape& s = x.shape();
    if (s.size() != 2 || s[1] != cfg.input_dim)
        throw ShapeError("base_encode: expected BxI " + shape_str({-1, cfg.input_dim}) + ", got " +
                         shape_str(s));
    Tensor h = reshape(x, {s[0], 1, s[1]});
    h = relu(bias_add_channels(conv1d(h, p.at("conv1.w"), 1), p.at("conv1.b")));
    h = relu(bias_add_channels(conv1d(h, p.at("conv2.w"), 1), p.at("conv2.b")));
    return adaptive_max_pool1d(h, cfg.pooled_len);
}

struct StaaInternals {
    Tensor attn;   // BxHxLxL softmax weights
    Tensor alpha;  // B gate values
};

// BxFxL -> BxFxL: dilated conv, self-attention over the L axis with F-dim
// tokens, a per-sample sigmoid gate on the attention branch, residual add and
// layer norm over the feature axis.
inline Tensor staa_encode(const Tensor& x_cnn, const ModelParams& p, const EncoderConfig& cfg,
                          StaaInternals* internals = nullptr) {
    const Shape& s = x_cnn.shape();
    if (s.size() != 3 || s[1] != cfg.channels || s[2] != cfg.pooled_len)
        throw ShapeError("staa_encode: expected BxFxL " +
                         shape_str({-1, cfg.channels, cfg.pooled_len}) + ", got " + shape_str(s));
    const int64_t B = s[0];

    Tensor x_conv = bias_add_channels(conv1d(x_cnn, p.at("staa.conv.w"), cfg.dilation),
                                      p.at("staa.conv.b"));
    Tensor tok_c = permute(x_conv, {0, 2, 1});  // BxLxF tokens

    Tensor q = linear(tok_c, p.at("staa.wq"), p.at("staa.bq"));
    Tensor k = linear(tok_c, p.at("staa.wk"), p.at("staa.bk"));
    Tensor v = linear(tok_c, p.at("staa.wv"), p.at("staa.bv"));
    Tensor attn_weights;
    Tensor ctx = scaled_dot_attention(q, k, v, static_cast<int>(cfg.heads), &attn_weights);
    Tensor tok_a = linear(ctx, p.at("staa.wo"), p.at("staa.bo"));

    // scalar gate per batch element from the L-mean of the conv features
    Tensor pooled = mean(x_conv, 2);  // BxF
    Tensor alpha = sigmoid(linear(pooled, p.at("staa.adapt.w"), p.at("staa.adapt.b")));
    Tensor alpha_flat = reshape(alpha, {B});
    if (internals) {
        internals->attn = attn_weights;
        internals->alpha = alpha_flat;
    }

    Tensor combined = add(tok_c, mul_batch_scalar(tok_a, alpha_flat));
    Tensor normed = add_bias_last(mul_last(layer_norm(combined), p.at("staa.ln.g")),
                                  p.at("staa.ln.b"));
    return permute(normed, {0, 2, 1});
}

// BxFxL -> BxD rows on the unit hypersphere
inline Tensor project(const Tensor& x, const ModelParams& p, const EncoderConfig& cfg) {
    const Shape& s = x.shape();
    if (s.size() != 3) throw ShapeError("project: expected BxFxL, got " + shape_str(s));
    Tensor flat = reshape(x, {s[0], s[1] * s[2]});
    Tensor h = relu(linear(flat, p.at("proj.fc1.w"), p.at("proj.fc1.b")));
    return l2_normalize(linear(h, p.at("proj.fc2.w"), p.at("proj.fc2.b")));
}

// features used by the fine-tune heads: flattened STAA output by default,
// projection output when configured
inline Tensor encode_features(const Tensor& x, const ModelParams& p, const EncoderConfig& cfg) {
    Tensor st = staa_encode(base_encode(x, p, cfg), p, cfg);
    if (cfg.heads_use_projection) return project(st, p, cfg);
    return reshape(st, {st.shape()[0], st.shape()[1] * st.shape()[2]});
}

struct HeadOutputs {
    Tensor position;         // Bx2
    Tensor floor_logits;     // B x n_floors
    Tensor building_logits;  // B x n_buildings
};

inline HeadOutputs heads_forward(const Tensor& features, const ModelParams& p) {
    if (!p.has("head.reg.w"))
        throw std::logic_error("heads_forward: params built without task heads");
    HeadOutputs out;
    out.position = linear(features, p.at("head.reg.w"), p.at("head.reg.b"));
    out.floor_logits = linear(features, p.at("head.floor.w"), p.at("head.floor.b"));
    out.building_logits = linear(features, p.at("head.bldg.w"), p.at("head.bldg.b"));
    return out;
}

}  // namespace qscl
