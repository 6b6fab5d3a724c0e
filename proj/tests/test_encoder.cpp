#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fd_check.hpp"
#include "qscl/encoder.hpp"
#include "qscl/loss.hpp"

using namespace qscl;

namespace {

EncoderConfig toy_config(int64_t input_dim = 16) {
    EncoderConfig cfg;
    cfg.input_dim = input_dim;
    cfg.channels = 8;
    cfg.pooled_len = 8;
    cfg.heads = 2;
    cfg.proj_dim = 8;
    cfg.proj_hidden = 16;
    cfg.n_floors = 3;
    cfg.n_buildings = 2;
    cfg.init_seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("base_encode produces BxFxL for several batch and input sizes") {
    for (int64_t b : {1, 3}) {
        for (int64_t i : {16, 52}) {
            EncoderConfig cfg = toy_config(i);
            ModelParams p = init_params(cfg);
            Rng rng(2);
            Tensor x = Tensor::uniform({b, i}, 0.0, 1.0, rng);
            Tensor y = base_encode(x, p, cfg);
            CHECK(y.shape() == Shape{b, cfg.channels, cfg.pooled_len});
            for (double v : y.values()) CHECK(std::isfinite(v));
        }
    }
    EncoderConfig cfg = toy_config(16);
    ModelParams p = init_params(cfg);
    Tensor wrong = Tensor::zeros({2, 9});
    CHECK_THROWS_AS(base_encode(wrong, p, cfg), ShapeError);
}

TEST_CASE("base_encode maps zero input to zero output") {
    EncoderConfig cfg = toy_config();
    ModelParams p = init_params(cfg);  // biases start at zero
    Tensor x = Tensor::zeros({2, 16});
    Tensor y = base_encode(x, p, cfg);
    for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("base_encode is equivariant to batch permutation") {
    EncoderConfig cfg = toy_config();
    ModelParams p = init_params(cfg);
    Rng rng(3);
    Tensor x = Tensor::uniform({4, 16}, 0.0, 1.0, rng);

    // brute force: permute rows, run forward, compare against permuted output
    const std::vector<int64_t> perm = {2, 0, 3, 1};
    std::vector<double> xp(x.values().size());
    for (int64_t r = 0; r < 4; ++r)
        for (int64_t c = 0; c < 16; ++c) xp[r * 16 + c] = x.values()[perm[r] * 16 + c];

    Tensor y = base_encode(x, p, cfg);
    Tensor yp = base_encode(Tensor::from({4, 16}, xp), p, cfg);
    const int64_t slice = cfg.channels * cfg.pooled_len;
    for (int64_t r = 0; r < 4; ++r)
        for (int64_t i = 0; i < slice; ++i)
            CHECK(yp.values()[r * slice + i] == y.values()[perm[r] * slice + i]);
}

TEST_CASE("staa_encode preserves shape across dilations") {
    for (int64_t d : {1, 2, 4}) {
        EncoderConfig cfg = toy_config();
        cfg.dilation = d;
        ModelParams p = init_params(cfg);
        Rng rng(4);
        Tensor x = Tensor::uniform({3, cfg.channels, cfg.pooled_len}, -1.0, 1.0, rng);
        CHECK(staa_encode(x, p, cfg).shape() == x.shape());
    }
}

TEST_CASE("staa_encode with the gate closed equals the layer-norm conv path") {
    EncoderConfig cfg = toy_config();
    ModelParams p = init_params(cfg);
    // sigmoid(-1e9) underflows to exactly zero, closing the gate
    p.at("staa.adapt.b").values_mut()[0] = -1e9;

    Rng rng(5);
    Tensor x = Tensor::uniform({2, cfg.channels, cfg.pooled_len}, -1.0, 1.0, rng);
    StaaInternals internals;
    Tensor y = staa_encode(x, p, cfg, &internals);
    for (double a : internals.alpha.values()) CHECK(a == 0.0);

    Tensor x_conv = bias_add_channels(conv1d(x, p.at("staa.conv.w"), cfg.dilation),
                                      p.at("staa.conv.b"));
    Tensor expect = permute(
        add_bias_last(mul_last(layer_norm(permute(x_conv, {0, 2, 1})), p.at("staa.ln.g")),
                      p.at("staa.ln.b")),
        {0, 2, 1});
    REQUIRE(y.shape() == expect.shape());
    for (size_t i = 0; i < y.values().size(); ++i) CHECK(y.values()[i] == expect.values()[i]);
}

TEST_CASE("staa_encode attention rows sum to one") {
    EncoderConfig cfg = toy_config();
    ModelParams p = init_params(cfg);
    Rng rng(6);
    Tensor x = Tensor::uniform({2, cfg.channels, cfg.pooled_len}, -1.0, 1.0, rng);
    StaaInternals internals;
    staa_encode(x, p, cfg, &internals);
    const int64_t l = cfg.pooled_len;
    const auto& w = internals.attn.values();
    for (size_t row = 0; row < w.size() / l; ++row) {
        double s = 0.0;
        for (int64_t j = 0; j < l; ++j) s += w[row * l + j];
        CHECK(s == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("project emits unit rows, deterministically") {
    EncoderConfig cfg = toy_config();
    ModelParams p = init_params(cfg);
    Rng rng(7);
    Tensor x = Tensor::uniform({5, cfg.channels, cfg.pooled_len}, -1.0, 1.0, rng);
    Tensor z1 = project(x, p, cfg);
    Tensor z2 = project(x, p, cfg);
    CHECK(z1.shape() == Shape{5, cfg.proj_dim});
    CHECK(z1.values() == z2.values());

    Tensor sims = cosine_sim_matrix(z1, z1);
    for (int64_t i = 0; i < 5; ++i)
        CHECK(sims.values()[i * 5 + i] == Catch::Approx(1.0).margin(1e-9));

    for (int64_t r = 0; r < 5; ++r) {
        double sq = 0.0;
        for (int64_t c = 0; c < cfg.proj_dim; ++c)
            sq += z1.values()[r * cfg.proj_dim + c] * z1.values()[r * cfg.proj_dim + c];
        CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-9);
    }
}

TEST_CASE("heads produce task-shaped outputs with sane degenerate behavior") {
    EncoderConfig cfg = toy_config();
    ModelParams p = init_params(cfg);
    Rng rng(8);
    Tensor x = Tensor::uniform({4, 16}, 0.0, 1.0, rng);
    Tensor feats = encode_features(x, p, cfg);
    CHECK(feats.shape() == Shape{4, cfg.channels * cfg.pooled_len});

    HeadOutputs out = heads_forward(feats, p);
    CHECK(out.position.shape() == Shape{4, 2});
    CHECK(out.floor_logits.shape() == Shape{4, cfg.n_floors});
    CHECK(out.building_logits.shape() == Shape{4, cfg.n_buildings});

    // zero-weight heads predict zero position and uniform class probabilities
    for (auto& v : p.at("head.reg.w").values_mut()) v = 0.0;
    for (auto& v : p.at("head.floor.w").values_mut()) v = 0.0;
    HeadOutputs zeroed = heads_forward(feats, p);
    for (double v : zeroed.position.values()) CHECK(v == 0.0);
    Tensor probs = softmax(zeroed.floor_logits, 1);
    for (double v : probs.values())
        CHECK(v == Catch::Approx(1.0 / cfg.n_floors).margin(1e-12));
}

TEST_CASE("heads use the projection output when configured") {
    EncoderConfig cfg = toy_config();
    cfg.heads_use_projection = true;
    ModelParams p = init_params(cfg);
    Rng rng(9);
    Tensor x = Tensor::uniform({3, 16}, 0.0, 1.0, rng);
    Tensor feats = encode_features(x, p, cfg);
    CHECK(feats.shape() == Shape{3, cfg.proj_dim});
    CHECK(heads_forward(feats, p).position.shape() == Shape{3, 2});
}

TEST_CASE("gradient reaches every parameter") {
    EncoderConfig cfg = toy_config();
    ModelParams p = init_params(cfg);
    Rng rng(10);
    Tensor x1 = Tensor::uniform({4, 16}, 0.1, 1.0, rng);
    Tensor x2 = Tensor::uniform({4, 16}, 0.1, 1.0, rng);

    Tensor c1 = project(staa_encode(base_encode(x1, p, cfg), p, cfg), p, cfg);
    Tensor c2 = project(staa_encode(base_encode(x2, p, cfg), p, cfg), p, cfg);
    Tensor contrastive = bidirectional_loss(c1, c2, 0.1).l_stc;

    Tensor feats = encode_features(x1, p, cfg);
    HeadOutputs out = heads_forward(feats, p);
    Tensor target = Tensor::uniform({4, 2}, 0.0, 10.0, rng);
    LossConfig lc;
    Tensor task = finetune_loss(mse_loss(out.position, target),
                                cross_entropy(out.floor_logits, {0, 1, 2, 0}),
                                cross_entropy(out.building_logits, {0, 1, 0, 1}), lc);

    backward(add(contrastive, task));
    for (const auto& name : p.all_names()) {
        const auto& g = p.at(name).grad();
        REQUIRE(g.size() == p.at(name).values().size());
        double max_abs = 0.0;
        for (double v : g) max_abs = std::max(max_abs, std::abs(v));
        INFO("parameter " << name);
        CHECK(max_abs > 0.0);
    }
}

TEST_CASE("full encoder and loss graph passes the finite-difference check") {
    EncoderConfig cfg = toy_config();
    cfg.init_seed = 21;
    ModelParams p = init_params(cfg);
    Rng rng(22);
    Tensor x1 = Tensor::uniform({4, 16}, 0.1, 1.0, rng);
    Tensor x2 = Tensor::uniform({4, 16}, 0.1, 1.0, rng);

    auto loss_fn = [&]() {
        Tensor c1 = project(staa_encode(base_encode(x1, p, cfg), p, cfg), p, cfg);
        Tensor c2 = project(staa_encode(base_encode(x2, p, cfg), p, cfg), p, cfg);
        return bidirectional_loss(c1, c2, 0.1).l_stc;
    };

    Tensor loss = loss_fn();
    backward(loss);

    const double h = 1e-5;
    for (const auto& name : p.encoder_names()) {
        Tensor& t = p.at(name);
        const std::vector<double> analytic = t.grad();
        // probe a bounded number of entries per tensor
        const size_t stride = std::max<size_t>(1, t.values().size() / 12);
        for (size_t i = 0; i < t.values().size(); i += stride) {
            const double orig = t.values()[i];
            t.values_mut()[i] = orig + h;
            const double up = loss_fn().item();
            t.values_mut()[i] = orig - h;
            const double dn = loss_fn().item();
            t.values_mut()[i] = orig;
            const double numeric = (up - dn) / (2.0 * h);
            const double err = std::abs(analytic[i] - numeric);
            const double tol = 1e-3 * std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
            INFO(name << " elem " << i << " analytic " << analytic[i] << " numeric " << numeric);
            REQUIRE(err <= tol);
        }
    }
}
