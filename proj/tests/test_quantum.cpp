#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "qscl/quantum.hpp"

using namespace qscl;

namespace {

// Independent oracle: matrix exponential by Taylor series.
Mat2 mat_exp_series(const Mat2& a, int terms = 40) {
    Mat2 sum = identity2();
    Mat2 power = identity2();
    double fact = 1.0;
    for (int k = 1; k <= terms; ++k) {
        power = power * a;
        fact *= k;
        for (int i = 0; i < 4; ++i) sum.m[i] += power.m[i] / fact;
    }
    return sum;
}

// Independent oracle: channel as an explicit Kraus sum.
Mat2 kraus_apply(const Mat2& rho, const std::vector<std::pair<double, Mat2>>& kraus) {
    Mat2 out;
    for (const auto& [w, k] : kraus) {
        Mat2 term = k * rho * k.adjoint();
        for (int i = 0; i < 4; ++i) out.m[i] += term.m[i] * w;
    }
    return out;
}

double mat_dist(const Mat2& a, const Mat2& b) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a.m[i] - b.m[i]));
    return d;
}

}  // namespace

TEST_CASE("rx_gate matches closed form and the series oracle") {
    CHECK(mat_dist(rx_gate(0.0), identity2()) < 1e-15);

    Mat2 at_pi = rx_gate(M_PI);
    CHECK(std::abs(at_pi(0, 0)) < 1e-15);
    CHECK(std::abs(at_pi(0, 1) - complexd(0, -1)) < 1e-15);
    CHECK(std::abs(at_pi(1, 0) - complexd(0, -1)) < 1e-15);
    CHECK(std::abs(at_pi(1, 1)) < 1e-15);

    // exp(-i (pi/4) sigma_x) via series expansion
    Mat2 arg;
    arg(0, 1) = complexd(0, -M_PI / 4.0);
    arg(1, 0) = complexd(0, -M_PI / 4.0);
    CHECK(mat_dist(rx_gate(M_PI / 2.0), mat_exp_series(arg)) < 1e-12);

    CHECK_THROWS_AS(rx_gate(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(rx_gate(INFINITY), std::invalid_argument);
}

TEST_CASE("rx_gate unitarity and composition") {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const double theta = (rng.uniform01() * 2.0 - 1.0) * 4.0 * M_PI;
        Mat2 g = rx_gate(theta);
        CHECK(mat_dist(g * g.adjoint(), identity2()) < 1e-12);
    }
    for (int i = 0; i < 100; ++i) {
        const double a = (rng.uniform01() * 2.0 - 1.0) * M_PI;
        const double b = (rng.uniform01() * 2.0 - 1.0) * M_PI;
        CHECK(mat_dist(rx_gate(a) * rx_gate(b), rx_gate(a + b)) < 1e-12);
    }
}

TEST_CASE("prepare_state amplitudes") {
    QubitPure q0 = prepare_state(0.0);
    CHECK(std::abs(q0.amp0 - complexd(1, 0)) < 1e-15);
    CHECK(std::abs(q0.amp1) < 1e-15);

    QubitPure qpi = prepare_state(M_PI);
    CHECK(std::abs(qpi.amp0) < 1e-15);
    CHECK(std::abs(qpi.amp1 - complexd(0, -1)) < 1e-15);

    QubitPure qh = prepare_state(M_PI / 2.0);
    const double inv_sqrt2 = std::sqrt(0.5);
    CHECK(std::abs(qh.amp0 - complexd(inv_sqrt2, 0)) < 1e-12);
    CHECK(std::abs(qh.amp1 - complexd(0, -inv_sqrt2)) < 1e-12);
}

TEST_CASE("measure_probs follows the Born rule") {
    auto p = measure_probs(prepare_state(0.0));
    CHECK(p.p0 == Catch::Approx(1.0).margin(1e-15));
    CHECK(p.p1 == Catch::Approx(0.0).margin(1e-15));

    p = measure_probs(prepare_state(M_PI / 2.0));
    CHECK(p.p0 == Catch::Approx(0.5).margin(1e-12));

    // cos^2(pi/6) = 3/4 by independent arithmetic
    p = measure_probs(prepare_state(M_PI / 3.0));
    const double expect = std::cos(M_PI / 6.0) * std::cos(M_PI / 6.0);
    CHECK(expect == Catch::Approx(0.75).margin(1e-12));
    CHECK(p.p0 == Catch::Approx(expect).margin(1e-12));

    QubitPure bad{complexd(1.0, 0.0), complexd(0.5, 0.0)};
    CHECK_THROWS_AS(measure_probs(bad), std::invalid_argument);
}

TEST_CASE("measure_probs sums to one and agrees between pure and density forms") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const double theta = rng.uniform01() * M_PI;
        QubitPure psi = prepare_state(theta);
        auto pp = measure_probs(psi);
        auto pd = measure_probs(density_of(psi));
        CHECK(pp.p0 + pp.p1 == Catch::Approx(1.0).margin(1e-12));
        CHECK(std::abs(pp.p0 - pd.p0) < 1e-12);
        CHECK(std::abs(pp.p1 - pd.p1) < 1e-12);
    }
}

TEST_CASE("sample_shots is binomial and deterministic") {
    Rng rng(3);
    CHECK(sample_shots(0.0, 100, rng) == 0);
    CHECK(sample_shots(1.0, 7, rng) == 7);
    CHECK_THROWS_AS(sample_shots(0.5, 0, rng), std::invalid_argument);

    const long long n = 100000;
    Rng rng_a(42);
    const long long ones = sample_shots(0.5, n, rng_a);
    const double bound = 3.0 * std::sqrt(n * 0.25);
    CHECK(std::abs(static_cast<double>(ones) - 50000.0) <= bound);

    Rng rng_b(42);
    CHECK(sample_shots(0.5, n, rng_b) == ones);
}

TEST_CASE("apply_channel basic actions") {
    QubitDensity zero = density_of(prepare_state(0.0));

    NoiseSpec none;
    QubitDensity same = apply_channel(zero, none);
    CHECK(mat_dist(same.rho, zero.rho) == 0.0);

    NoiseSpec flip;
    flip.p_bitflip = 1.0;
    QubitDensity one = apply_channel(zero, flip);
    CHECK(one.rho(1, 1).real() == Catch::Approx(1.0).margin(1e-15));
    CHECK(one.rho(0, 0).real() == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("depolarizing channel matches the Kraus-sum oracle") {
    QubitDensity zero = density_of(prepare_state(0.0));
    for (double p : {0.05, 0.1, 0.3, 0.9}) {
        NoiseSpec spec;
        spec.p_depolarizing = p;
        QubitDensity got = apply_channel(zero, spec);

        std::vector<std::pair<double, Mat2>> kraus = {
            {1.0 - p, identity2()}, {p / 3.0, pauli_x()}, {p / 3.0, pauli_y()}, {p / 3.0, pauli_z()}};
        Mat2 expect = kraus_apply(zero.rho, kraus);
        CHECK(mat_dist(got.rho, expect) < 1e-15);
        CHECK(measure_probs(got).p1 == Catch::Approx(2.0 * p / 3.0).margin(1e-12));
    }
}

TEST_CASE("apply_channel preserves trace and positivity") {
    Rng rng(19);
    for (int i = 0; i < 1000; ++i) {
        QubitPure psi = prepare_state(rng.uniform01() * M_PI);
        NoiseSpec spec;
        spec.p_bitflip = rng.uniform01();
        spec.p_phaseflip = rng.uniform01();
        spec.p_depolarizing = rng.uniform01();
        QubitDensity out = apply_channel(density_of(psi), spec);
        CHECK(std::abs(out.trace_real() - 1.0) < 1e-12);
        CHECK(out.valid(1e-12));
    }
}

TEST_CASE("apply_readout_noise flips with the given probability") {
    Rng rng(5);
    CHECK(apply_readout_noise(0, 0.0, rng) == 0);
    CHECK(apply_readout_noise(1, 1.0, rng) == 0);

    const int trials = 100000;
    int flips = 0;
    Rng rng2(91);
    for (int i = 0; i < trials; ++i)
        if (apply_readout_noise(0, 0.1, rng2) == 1) ++flips;
    const double frac = static_cast<double>(flips) / trials;
    CHECK(std::abs(frac - 0.1) <= 3.0 * std::sqrt(0.09 / trials));
}

namespace {

// Brute-force oracle: incremental kron build, then each CNOT as a dense
// matrix-vector product over the whole state.
std::vector<complexd> chain_oracle(const std::vector<QubitPure>& qs) {
    const int n = static_cast<int>(qs.size());
    std::vector<complexd> v{complexd(1, 0)};
    for (int q = 0; q < n; ++q) {
        std::vector<complexd> next(v.size() * 2);
        for (size_t s = 0; s < v.size(); ++s) {
            next[s] = v[s] * qs[q].amp0;
            next[s + v.size()] = v[s] * qs[q].amp1;
        }
        v = next;
    }
    const size_t dim = size_t{1} << n;
    for (int q = 0; q + 1 < n; ++q) {
        std::vector<complexd> next(dim, complexd(0));
        for (size_t col = 0; col < dim; ++col) {
            size_t row = col;
            if ((col >> q) & 1) row = col ^ (size_t{1} << (q + 1));
            next[row] += v[col];
        }
        v = next;
    }
    return v;
}

}  // namespace

TEST_CASE("cnot_chain basics and oracle agreement") {
    // all |0> stays put
    std::vector<QubitPure> zeros(4, prepare_state(0.0));
    auto st = cnot_chain(zeros);
    CHECK(std::abs(st[0] - complexd(1, 0)) < 1e-12);

    // control |1>, target |0> -> |11>
    std::vector<QubitPure> pair = {prepare_state(M_PI), prepare_state(0.0)};
    auto st2 = cnot_chain(pair);
    CHECK(std::abs(st2[3]) == Catch::Approx(1.0).margin(1e-12));

    // three pi/2 qubits: marginals 0.5, and full agreement with the oracle
    std::vector<QubitPure> three(3, prepare_state(M_PI / 2.0));
    auto st3 = cnot_chain(three);
    auto ora = chain_oracle(three);
    double norm = 0.0;
    for (size_t s = 0; s < st3.size(); ++s) {
        CHECK(std::abs(st3[s] - ora[s]) < 1e-10);
        norm += std::norm(st3[s]);
    }
    CHECK(norm == Catch::Approx(1.0).margin(1e-10));
    for (int q = 0; q < 3; ++q)
        CHECK(marginal_p1(st3, q) == Catch::Approx(0.5).margin(1e-10));

    std::vector<QubitPure> too_many(13, prepare_state(0.0));
    CHECK_THROWS_AS(cnot_chain(too_many), std::length_error);
}
