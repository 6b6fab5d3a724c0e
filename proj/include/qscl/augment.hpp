#pragma once

// Strong (quantum-stochastic) and weak (Gaussian) augmentation of RSSI
// vectors. The strong path encodes each AP value as a rotation angle,
// simulates the noisy qubit, estimates the angle back from shot outcomes and
// maps it to an augmented RSSI value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qscl/matrix.hpp"
#include "qscl/quantum.hpp"
#include "qscl/rng.hpp"

namespace qscl {

struct AugmentConfig {
    long long n_shots = 1;       // measurement shots per AP
    double sigma_eta = 0.05;     // Gaussian noise added to the strong view
    double sigma_weak = 0.05;    // Gaussian noise of the weak view
    NoiseSpec noise;             // quantum channel + readout noise
    bool enforce_delta_clamp = true;  // keep |theta' - theta| <= pi/2
    uint64_t seed = 0;

    void validate() const {
        if (n_shots < 1) throw std::invalid_argument("AugmentConfig: n_shots must be >= 1");
        if (sigma_eta < 0.0 || sigma_weak < 0.0)
            throw std::invalid_argument("AugmentConfig: std-devs must be >= 0");
        noise.validate();
    }
};

// theta_i = x_i * pi / max_x, in [0, pi]
inline double rssi_to_angle(double x, double max_x) {
    if (!(max_x > 0.0)) throw std::invalid_argument("rssi_to_angle: max_x must be > 0");
    if (x < 0.0 || x > max_x) throw std::out_of_range("rssi_to_angle: x outside [0, max_x]");
    return x * M_PI / max_x;
}

// theta' = 2 asin(sqrt(ones / n_shots)); the arccos branch coincides when the
// empirical frequencies sum to one, so the arcsin form is used uniformly.
inline double estimate_augmented_angle(long long ones, long long n_shots) {
    if (n_shots < 1) throw std::invalid_argument("estimate_augmented_angle: n_shots must be >= 1");
    if (ones < 0 || ones > n_shots)
        throw std::invalid_argument("estimate_augmented_angle: ones outside [0, n_shots]");
    const double frac = static_cast<double>(ones) / static_cast<double>(n_shots);
    return 2.0 * std::asin(std::sqrt(frac));
}

// theta + clip(theta' - theta, -pi/2, pi/2)
inline double clamp_delta(double theta_prime, double theta) {
    const double d = std::clamp(theta_prime - theta, -M_PI / 2.0, M_PI / 2.0);
    return theta + d;
}

// X' = theta' * max_x / pi
inline double angle_to_rssi(double theta_prime, double max_x) {
    return theta_prime * max_x / M_PI;
}

struct StrongAugmentResult {
    std::vector<double> strong;       // augmented RSSI values
    std::vector<double> theta;        // encoded angles
    std::vector<double> theta_prime;  // estimated angles after measurement
    std::vector<double> delta;        // theta' - theta (post clamp)
    std::vector<double> delta_rssi;   // X' - X per AP
    std::vector<double> eta;          // Gaussian noise drawn per AP
    bool all_zero_input = false;      // max(x) == 0; eta-only fallback used
};

// One sample through Algorithm 1: rotate, apply channel noise, measure
// n_shots times with per-shot readout noise, estimate the angle, map back and
// add eta ~ N(0, sigma_eta^2). Deterministic for a fixed rng state.
inline StrongAugmentResult strong_augment(const std::vector<double>& x, const AugmentConfig& cfg,
                                          Rng& rng) {
    if (x.empty()) throw std::invalid_argument("strong_augment: empty input vector");
    cfg.validate();
    const size_t n = x.size();
    StrongAugmentResult out;
    out.strong.resize(n);
    out.theta.resize(n);
    out.theta_prime.resize(n);
    out.delta.resize(n);
    out.delta_rssi.resize(n);
    out.eta.resize(n);

    const double max_x = *std::max_element(x.begin(), x.end());
    if (!(max_x > 0.0)) {
        // Degenerate all-zero vector (possible after aggressive AP filtering):
        // every angle is 0 and the output reduces to the eta perturbation.
        out.all_zero_input = true;
        for (size_t i = 0; i < n; ++i) {
            const double eta = cfg.sigma_eta > 0.0 ? rng.gaussian(0.0, cfg.sigma_eta) : 0.0;
            out.eta[i] = eta;
            out.strong[i] = eta;
            out.delta_rssi[i] = eta - x[i];
        }
        return out;
    }

    for (size_t i = 0; i < n; ++i) {
        const double theta = rssi_to_angle(x[i], max_x);
        QubitDensity rho = density_of(prepare_state(theta));
        if (cfg.noise.any_channel_noise()) rho = apply_channel(rho, cfg.noise);
        const double p1 = measure_probs(rho).p1;

        long long ones = 0;
        for (long long s = 0; s < cfg.n_shots; ++s) {
            int bit = rng.uniform01() < p1 ? 1 : 0;
            bit = apply_readout_noise(bit, cfg.noise.p_readout, rng);
            ones += bit;
        }
        double theta_prime = estimate_augmented_angle(ones, cfg.n_shots);
        double delta = theta_prime - theta;
        if (cfg.enforce_delta_clamp) {
            delta = std::clamp(delta, -M_PI / 2.0, M_PI / 2.0);
            theta_prime = theta + delta;
        }
        const double eta = cfg.sigma_eta > 0.0 ? rng.gaussian(0.0, cfg.sigma_eta) : 0.0;
        const double x_prime = angle_to_rssi(theta_prime, max_x) + eta;

        out.theta[i] = theta;
        out.theta_prime[i] = theta_prime;
        out.delta[i] = delta;
        out.eta[i] = eta;
        out.strong[i] = x_prime;
        out.delta_rssi[i] = x_prime - x[i];
    }
    return out;
}

// Weak view: x + N(0, sigma^2) elementwise.
inline std::vector<double> weak_augment(const std::vector<double>& x, double sigma_weak,
                                        Rng& rng) {
    if (x.empty()) throw std::invalid_argument("weak_augment: empty input vector");
    if (sigma_weak < 0.0) throw std::invalid_argument("weak_augment: sigma must be >= 0");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = sigma_weak > 0.0 ? x[i] + rng.gaussian(0.0, sigma_weak) : x[i];
    return out;
}

// Stream tags for per-sample seed derivation.
constexpr uint64_t kStreamStrong = 1;
constexpr uint64_t kStreamWeak = 2;

struct AuditRow {
    size_t sample;
    size_t ap;
    double theta;
    double theta_prime;
    double delta;
    double delta_rssi;
};

struct BatchAugmentResult {
    Matrix strong;
    Matrix weak;
    std::vector<AuditRow> audit;
    size_t all_zero_rows = 0;
};

// Augments every row of a preprocessed matrix. Each sample gets its own
// derived seed, so the result is independent of iteration order.
inline BatchAugmentResult augment_batch(const Matrix& m, const AugmentConfig& cfg,
                                        uint64_t epoch = 0) {
    BatchAugmentResult out;
    out.strong = Matrix(m.rows, m.cols);
    out.weak = Matrix(m.rows, m.cols);
    out.audit.reserve(m.rows * m.cols);
    for (size_t r = 0; r < m.rows; ++r) {
        const std::vector<double> x = m.row(r);
        Rng rng_s(derive_seed(cfg.seed, kStreamStrong + 2 * epoch, r));
        Rng rng_w(derive_seed(cfg.seed, kStreamWeak + 2 * epoch, r));
        const StrongAugmentResult s = strong_augment(x, cfg, rng_s);
        if (s.all_zero_input) ++out.all_zero_rows;
        out.strong.set_row(r, s.strong);
        out.weak.set_row(r, weak_augment(x, cfg.sigma_weak, rng_w));
        for (size_t c = 0; c < m.cols; ++c)
            out.audit.push_back({r, c, s.theta[c], s.theta_prime[c], s.delta[c], s.delta_rssi[c]});
    }
    return out;
}

}  // namespace qscl
