#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fd_check.hpp"
#include "qscl/loss.hpp"

using namespace qscl;

namespace {

// naive reference: full 2Nx2N similarity matrix and explicit log-sum-exp
double simclr_oracle(const std::vector<std::vector<double>>& z,
                     const std::vector<int64_t>& pairing, double tau) {
    const size_t n = z.size();
    auto dot = [&](size_t i, size_t j) {
        double s = 0.0, ni = 0.0, nj = 0.0;
        for (size_t k = 0; k < z[i].size(); ++k) {
            s += z[i][k] * z[j][k];
            ni += z[i][k] * z[i][k];
            nj += z[j][k] * z[j][k];
        }
        return s / (std::sqrt(ni) * std::sqrt(nj));
    };
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double denom = 0.0;
        for (size_t k = 0; k < n; ++k)
            if (k != i) denom += std::exp(dot(i, k) / tau);
        total += -std::log(std::exp(dot(i, pairing[i]) / tau) / denom);
    }
    return total / n;
}

Tensor rows_tensor(const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Tensor::from({static_cast<int64_t>(rows.size()), static_cast<int64_t>(rows[0].size())},
                        flat);
}

// random orthonormal rows via Gram-Schmidt
std::vector<std::vector<double>> orthonormal_rows(size_t n, size_t d, Rng& rng) {
    std::vector<std::vector<double>> rows;
    while (rows.size() < n) {
        std::vector<double> v(d);
        for (auto& x : v) x = rng.gaussian(0.0, 1.0);
        for (const auto& u : rows) {
            double dot = 0.0;
            for (size_t i = 0; i < d; ++i) dot += u[i] * v[i];
            for (size_t i = 0; i < d; ++i) v[i] -= dot * u[i];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-6) continue;
        for (auto& x : v) x /= norm;
        rows.push_back(v);
    }
    return rows;
}

}  // namespace

TEST_CASE("simclr_loss matches the hand-evaluated 4x4 oracle") {
    Rng rng(1);
    auto basis = orthonormal_rows(2, 6, rng);
    // two pairs: z0 = z1 = u, z2 = z3 = v with u orthogonal to v
    std::vector<std::vector<double>> z = {basis[0], basis[0], basis[1], basis[1]};
    const std::vector<int64_t> pairing = {1, 0, 3, 2};

    const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
    CHECK(simclr_oracle(z, pairing, 1.0) == Catch::Approx(expect).margin(1e-12));
    CHECK(simclr_loss(rows_tensor(z), pairing, 1.0).item() ==
          Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("simclr_loss of identical embeddings is log(2B - 1)") {
    for (int64_t b : {2, 4, 8}) {
        std::vector<std::vector<double>> z(2 * b, {0.6, 0.8, 0.0});
        std::vector<int64_t> pairing(2 * b);
        for (int64_t i = 0; i < b; ++i) {
            pairing[2 * i] = 2 * i + 1;
            pairing[2 * i + 1] = 2 * i;
        }
        CHECK(simclr_loss(rows_tensor(z), pairing, 0.5).item() ==
              Catch::Approx(std::log(2.0 * b - 1.0)).margin(1e-9));
    }
}

TEST_CASE("simclr_loss is invariant under a common rotation") {
    Rng rng(2);
    const size_t d = 5;
    auto rot_rows = orthonormal_rows(d, d, rng);  // orthogonal matrix
    std::vector<std::vector<double>> z;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = rng.gaussian(0.0, 1.0);
        z.push_back(v);
    }
    const std::vector<int64_t> pairing = {1, 0, 3, 2, 5, 4};
    const double before = simclr_loss(rows_tensor(z), pairing, 0.3).item();

    std::vector<std::vector<double>> zr(z.size(), std::vector<double>(d, 0.0));
    for (size_t r = 0; r < z.size(); ++r)
        for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j) zr[r][i] += rot_rows[i][j] * z[r][j];
    const double after = simclr_loss(rows_tensor(zr), pairing, 0.3).item();
    CHECK(after == Catch::Approx(before).margin(1e-9));
}

TEST_CASE("simclr_loss rejects degenerate batches") {
    Tensor tiny = Tensor::from({2, 3}, {1, 0, 0, 0, 1, 0});
    CHECK_THROWS_AS(simclr_loss(tiny, {1, 0}, 0.5), std::invalid_argument);
    Tensor z = Tensor::from({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    CHECK_THROWS_AS(simclr_loss(z, {0, 1, 2, 3}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(simclr_loss(z, {1, 0, 3, 2}, 0.0), std::invalid_argument);
}

TEST_CASE("bidirectional_loss vanishes for orthogonal aligned views at small tau") {
    Rng rng(3);
    const int64_t b = 4, d = 8;
    auto rows = orthonormal_rows(b, d, rng);
    Tensor c = rows_tensor(rows);
    auto out = bidirectional_loss(c, c, 0.05);
    // closed form: log(1 + (B-1) e^{-1/tau})
    const double expect = std::log(1.0 + (b - 1) * std::exp(-1.0 / 0.05));
    CHECK(out.l_stc.item() == Catch::Approx(expect).margin(1e-12));
    CHECK(out.l_stc.item() < 1e-3);
}

TEST_CASE("bidirectional_loss of identical rows is log B for every tau") {
    for (int64_t b : {2, 8, 64}) {
        std::vector<std::vector<double>> rows(b, {1.0, 0.0, 0.0, 0.0});
        Tensor c = rows_tensor(rows);
        for (double tau : {0.05, 0.1, 0.5, 1.0}) {
            auto out = bidirectional_loss(c, c, tau);
            CHECK(out.l_s.item() == Catch::Approx(std::log(double(b))).margin(1e-12));
            CHECK(out.l_w.item() == Catch::Approx(std::log(double(b))).margin(1e-12));
            CHECK(out.l_stc.item() == Catch::Approx(std::log(double(b))).margin(1e-12));
        }
    }
}

TEST_CASE("bidirectional_loss swap symmetry") {
    Rng rng(4);
    Tensor a = l2_normalize(Tensor::uniform({5, 7}, -1.0, 1.0, rng));
    Tensor b = l2_normalize(Tensor::uniform({5, 7}, -1.0, 1.0, rng));
    auto ab = bidirectional_loss(a, b, 0.2);
    auto ba = bidirectional_loss(b, a, 0.2);
    CHECK(std::abs(ab.l_s.item() - ba.l_w.item()) < 1e-12);
    CHECK(std::abs(ab.l_w.item() - ba.l_s.item()) < 1e-12);
    CHECK(std::abs(ab.l_stc.item() - ba.l_stc.item()) < 1e-12);
}

TEST_CASE("bidirectional_loss directions are nonnegative") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = l2_normalize(Tensor::uniform({6, 5}, -1.0, 1.0, rng));
        Tensor b = l2_normalize(Tensor::uniform({6, 5}, -1.0, 1.0, rng));
        auto out = bidirectional_loss(a, b, 0.3);
        CHECK(out.l_s.item() >= 0.0);
        CHECK(out.l_w.item() >= 0.0);
        CHECK(out.l_stc.item() >= 0.0);
    }
    CHECK_THROWS_AS(bidirectional_loss(Tensor::zeros({0, 4}), Tensor::zeros({0, 4}), 0.3),
                    std::invalid_argument);
}

TEST_CASE("bidirectional_loss gradient passes finite differences") {
    FdCheck fd;
    fd.run([](const std::vector<Tensor>& x) { return bidirectional_loss(x[0], x[1], 0.2).l_stc; },
           {{4, 8}, {4, 8}}, 6);
}

TEST_CASE("mse_loss agrees with the naive loop oracle") {
    Tensor p = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(mse_loss(p, p).item() == 0.0);

    Tensor q = Tensor::from({2, 2}, {2.0, 3.0, 4.0, 5.0});
    CHECK(mse_loss(q, p).item() == Catch::Approx(1.0).margin(1e-15));

    Rng rng(7);
    Tensor a = Tensor::uniform({5, 2}, -3.0, 3.0, rng);
    Tensor b = Tensor::uniform({5, 2}, -3.0, 3.0, rng);
    double oracle = 0.0;
    for (size_t i = 0; i < a.values().size(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        oracle += d * d;
    }
    oracle /= a.values().size();
    CHECK(std::abs(mse_loss(a, b).item() - oracle) < 1e-12);
    CHECK_THROWS_AS(mse_loss(a, Tensor::zeros({5, 3})), ShapeError);
}

TEST_CASE("cross_entropy closed forms and oracle") {
    Tensor uniform = Tensor::zeros({3, 4});
    CHECK(cross_entropy(uniform, {0, 1, 2}).item() == Catch::Approx(std::log(4.0)).margin(1e-12));

    Tensor dominant = Tensor::zeros({2, 3});
    dominant.values_mut()[0 * 3 + 1] = 20.0;
    dominant.values_mut()[1 * 3 + 2] = 20.0;
    CHECK(cross_entropy(dominant, {1, 2}).item() < 1e-6);

    Rng rng(8);
    Tensor logits = Tensor::uniform({4, 5}, -2.0, 2.0, rng);
    const std::vector<int64_t> labels = {3, 0, 4, 1};
    double oracle = 0.0;
    for (int64_t r = 0; r < 4; ++r) {
        double mx = -INFINITY;
        for (int64_t c = 0; c < 5; ++c) mx = std::max(mx, logits.values()[r * 5 + c]);
        double z = 0.0;
        for (int64_t c = 0; c < 5; ++c) z += std::exp(logits.values()[r * 5 + c] - mx);
        oracle += -(logits.values()[r * 5 + labels[r]] - mx - std::log(z));
    }
    oracle /= 4.0;
    CHECK(std::abs(cross_entropy(logits, labels).item() - oracle) < 1e-10);

    CHECK_THROWS_AS(cross_entropy(logits, {0, 1, 2, 5}), std::out_of_range);
}

TEST_CASE("finetune_loss is the weighted sum of its parts") {
    LossConfig cfg;
    Tensor mse = Tensor::scalar(2.0);
    Tensor cef = Tensor::scalar(0.5);
    Tensor ceb = Tensor::scalar(0.25);
    CHECK(finetune_loss(mse, cef, ceb, cfg).item() == Catch::Approx(2.75).margin(1e-15));

    cfg.lambda_class = 0.0;
    cfg.lambda_reg = 3.0;
    CHECK(finetune_loss(mse, cef, ceb, cfg).item() == Catch::Approx(6.0).margin(1e-15));

    cfg.lambda_class = 2.0;
    cfg.lambda_reg = 0.0;
    CHECK(finetune_loss(mse, cef, ceb, cfg).item() == Catch::Approx(1.5).margin(1e-15));

    cfg.lambda_reg = -1.0;
    CHECK_THROWS_AS(finetune_loss(mse, cef, ceb, cfg), std::invalid_argument);
}

TEST_CASE("zero-mean perturbations leave similarity unbiased (noise statistic)") {
    Rng rng(9);
    const size_t d = 64;
    auto pair = orthonormal_rows(2, d, rng);
    const std::vector<double>&u = pair[0], &v = pair[1];

    const double s = 0.01;
    const int draws = 10000;
    double mean_dot = 0.0, mean_dcos = 0.0;
    double base_cos = 0.0;
    for (size_t i = 0; i < d; ++i) base_cos += u[i] * v[i];

    for (int t = 0; t < draws; ++t) {
        std::vector<double> eps(d);
        for (auto& e : eps) e = rng.gaussian(0.0, s);
        double dot_ev = 0.0, dot_uv = 0.0, nrm = 0.0;
        for (size_t i = 0; i < d; ++i) {
            dot_ev += eps[i] * v[i];
            dot_uv += (u[i] + eps[i]) * v[i];
            nrm += (u[i] + eps[i]) * (u[i] + eps[i]);
        }
        mean_dot += dot_ev;
        mean_dcos += dot_uv / std::sqrt(nrm) - base_cos;
    }
    mean_dot /= draws;
    mean_dcos /= draws;

    // E[eps . v] = 0 within 3 sigma of the empirical mean
    CHECK(std::abs(mean_dot) <= 3.0 * s * std::sqrt(double(d)) / std::sqrt(double(draws)));
    // first-order terms cancel; the residual scales with s^2
    const double tol = 0.5 * (d - 1) * s * s * std::abs(base_cos) +
                       3.0 * s / std::sqrt(double(draws)) + 10.0 * s * s;
    CHECK(std::abs(mean_dcos) <= tol);
}
