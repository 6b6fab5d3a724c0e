#pragma once

// Exact single-qubit simulation: Rx rotations, Born-rule measurement and
// Pauli noise channels, plus an optional CNOT-chain state-vector extension.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "qscl/rng.hpp"

namespace qscl {

using complexd = std::complex<double>;

// 2x2 complex matrix, row major.
struct Mat2 {
    std::array<complexd, 4> m{};  // [r*2 + c]

    complexd& operator()(int r, int c) { return m[r * 2 + c]; }
    const complexd& operator()(int r, int c) const { return m[r * 2 + c]; }

    Mat2 operator*(const Mat2& o) const {
        Mat2 out;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                out(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c);
        return out;
    }
    Mat2 operator+(const Mat2& o) const {
        Mat2 out;
        for (int i = 0; i < 4; ++i) out.m[i] = m[i] + o.m[i];
        return out;
    }
    Mat2 operator*(double s) const {
        Mat2 out;
        for (int i = 0; i < 4; ++i) out.m[i] = m[i] * s;
        return out;
    }
    Mat2 adjoint() const {
        Mat2 out;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) out(r, c) = std::conj((*this)(c, r));
        return out;
    }
};

inline Mat2 pauli_x() { return Mat2{{complexd(0), complexd(1), complexd(1), complexd(0)}}; }
inline Mat2 pauli_y() { return Mat2{{complexd(0), complexd(0, -1), complexd(0, 1), complexd(0)}}; }
inline Mat2 pauli_z() { return Mat2{{complexd(1), complexd(0), complexd(0), complexd(-1)}}; }
inline Mat2 identity2() { return Mat2{{complexd(1), complexd(0), complexd(0), complexd(1)}}; }

// Single-qubit pure state a0|0> + a1|1>, normalized.
struct QubitPure {
    complexd amp0{1.0, 0.0};
    complexd amp1{0.0, 0.0};

    bool valid(double tol = 1e-12) const {
        return std::abs(std::norm(amp0) + std::norm(amp1) - 1.0) <= tol;
    }
};

// 2x2 density matrix: Hermitian, trace one, positive semidefinite.
struct QubitDensity {
    Mat2 rho;

    double trace_real() const { return rho(0, 0).real() + rho(1, 1).real(); }

    bool valid(double tol = 1e-12) const {
        if (std::abs(rho(0, 1) - std::conj(rho(1, 0))) > tol) return false;
        if (std::abs(rho(0, 0).imag()) > tol || std::abs(rho(1, 1).imag()) > tol) return false;
        if (std::abs(trace_real() - 1.0) > tol) return false;
        // eigenvalues of a Hermitian 2x2: (tr +- sqrt(tr^2 - 4 det)) / 2
        const double tr = trace_real();
        const double det = (rho(0, 0) * rho(1, 1) - rho(0, 1) * rho(1, 0)).real();
        const double disc = tr * tr - 4.0 * det;
        const double lam_min = 0.5 * (tr - std::sqrt(std::max(0.0, disc)));
        return lam_min >= -tol;
    }
};

inline QubitDensity density_of(const QubitPure& psi) {
    QubitDensity d;
    d.rho(0, 0) = psi.amp0 * std::conj(psi.amp0);
    d.rho(0, 1) = psi.amp0 * std::conj(psi.amp1);
    d.rho(1, 0) = psi.amp1 * std::conj(psi.amp0);
    d.rho(1, 1) = psi.amp1 * std::conj(psi.amp1);
    return d;
}

// Pauli channel probabilities plus classical readout flip probability.
struct NoiseSpec {
    double p_bitflip = 0.0;
    double p_phaseflip = 0.0;
    double p_depolarizing = 0.0;
    double p_readout = 0.0;

    void validate() const {
        for (double p : {p_bitflip, p_phaseflip, p_depolarizing, p_readout})
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("NoiseSpec: probability outside [0,1]");
    }
    bool any_channel_noise() const {
        return p_bitflip > 0.0 || p_phaseflip > 0.0 || p_depolarizing > 0.0;
    }
};

// Rx(theta) = exp(-i theta/2 X) = [[cos t/2, -i sin t/2], [-i sin t/2, cos t/2]]
inline Mat2 rx_gate(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("rx_gate: theta must be finite");
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    Mat2 g;
    g(0, 0) = complexd(c, 0);
    g(0, 1) = complexd(0, -s);
    g(1, 0) = complexd(0, -s);
    g(1, 1) = complexd(c, 0);
    return g;
}

// Rx(theta) applied to |0>: cos(t/2)|0> - i sin(t/2)|1>
inline QubitPure prepare_state(double theta) {
    QubitPure q;
    q.amp0 = complexd(std::cos(theta / 2.0), 0.0);
    q.amp1 = complexd(0.0, -std::sin(theta / 2.0));
    return q;
}

struct MeasureProbs {
    double p0;
    double p1;
};

inline MeasureProbs measure_probs(const QubitPure& psi) {
    if (!psi.valid()) throw std::invalid_argument("measure_probs: state not normalized");
    const double p0 = std::norm(psi.amp0);
    return {p0, 1.0 - p0};
}

inline MeasureProbs measure_probs(const QubitDensity& rho) {
    if (!rho.valid()) throw std::invalid_argument("measure_probs: invalid density matrix");
    const double p0 = rho.rho(0, 0).real();
    return {p0, 1.0 - p0};
}

// Counts |1> outcomes over n_shots Bernoulli(p1) trials; one uniform per shot.
inline long long sample_shots(double p1, long long n_shots, Rng& rng) {
    if (n_shots < 1) throw std::invalid_argument("sample_shots: n_shots must be >= 1");
    long long ones = 0;
    for (long long i = 0; i < n_shots; ++i)
        if (rng.uniform01() < p1) ++ones;
    return ones;
}

// Applies, in order: bit-flip, phase-flip, depolarizing. Each is a CPTP Pauli
// channel; the composition is trace preserving.
inline QubitDensity apply_channel(const QubitDensity& in, const NoiseSpec& spec) {
    spec.validate();
    const Mat2 X = pauli_x(), Y = pauli_y(), Z = pauli_z();
    Mat2 rho = in.rho;
    if (spec.p_bitflip > 0.0)
        rho = rho * (1.0 - spec.p_bitflip) + (X * rho * X) * spec.p_bitflip;
    if (spec.p_phaseflip > 0.0)
        rho = rho * (1.0 - spec.p_phaseflip) + (Z * rho * Z) * spec.p_phaseflip;
    if (spec.p_depolarizing > 0.0) {
        const double p = spec.p_depolarizing;
        rho = rho * (1.0 - p) + (X * rho * X + Y * rho * Y + Z * rho * Z) * (p / 3.0);
    }
    QubitDensity out;
    out.rho = rho;
    return out;
}

// Classical readout error: flips the measured bit with probability p_readout.
// Identity (no RNG draw) when p_readout == 0.
inline int apply_readout_noise(int outcome, double p_readout, Rng& rng) {
    if (p_readout <= 0.0) return outcome;
    return rng.uniform01() < p_readout ? 1 - outcome : outcome;
}

constexpr int kMaxChainQubits = 12;

// Optional extension, off by default in the augmentation path: builds the
// product state of the inputs and applies CNOT(i -> i+1) in index order.
// Qubit i lives at bit i of the state index (qubit 0 least significant).
inline std::vector<complexd> cnot_chain(const std::vector<QubitPure>& qubits) {
    const int n = static_cast<int>(qubits.size());
    if (n > kMaxChainQubits)
        throw std::length_error("cnot_chain: more than 12 qubits");
    const size_t dim = size_t{1} << n;
    std::vector<complexd> state(dim);
    for (size_t s = 0; s < dim; ++s) {
        complexd a(1.0, 0.0);
        for (int q = 0; q < n; ++q)
            a *= ((s >> q) & 1) ? qubits[q].amp1 : qubits[q].amp0;
        state[s] = a;
    }
    for (int q = 0; q + 1 < n; ++q) {
        const size_t cbit = size_t{1} << q;
        const size_t tbit = size_t{1} << (q + 1);
        for (size_t s = 0; s < dim; ++s)
            if ((s & cbit) && !(s & tbit)) std::swap(state[s], state[s | tbit]);
    }
    return state;
}

inline double marginal_p1(const std::vector<complexd>& state, int qubit) {
    const size_t bit = size_t{1} << qubit;
    double p = 0.0;
    for (size_t s = 0; s < state.size(); ++s)
        if (s & bit) p += std::norm(state[s]);
    return p;
}

}  // namespace qscl
