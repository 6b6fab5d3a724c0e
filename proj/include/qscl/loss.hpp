#pragma once

// Contrastive losses (SimCLR baseline and the bidirectional strong/weak
// loss), plus the supervised fine-tuning objectives.

#include <stdexcept>
#include <vector>

#include "qscl/tensor.hpp"

namespace qscl {

struct LossConfig {
    double tau = 0.1;
    double lambda_reg = 1.0;
    double lambda_class = 1.0;

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("LossConfig: tau must be > 0");
        if (lambda_reg < 0.0 || lambda_class < 0.0)
            throw std::invalid_argument("LossConfig: lambdas must be >= 0");
    }
};

namespace detail {

inline Tensor diag_mask(int64_t n, double fill) {
    Tensor m = Tensor::zeros({n, n});
    for (int64_t i = 0; i < n; ++i) m.values_mut()[i * n + i] = fill;
    return m;
}

inline std::vector<int64_t> iota_indices(int64_t n) {
    std::vector<int64_t> idx(n);
    for (int64_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

}  // namespace detail

// NT-Xent over 2B embeddings: mean over anchors i of
// -log exp(sim(z_i, z_pair(i))/tau) / sum_{k != i} exp(sim(z_i, z_k)/tau)
inline Tensor simclr_loss(const Tensor& z, const std::vector<int64_t>& pairing, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("simclr_loss: tau must be > 0");
    const Shape& s = z.shape();
    if (s.size() != 2) throw ShapeError("simclr_loss: need 2BxD, got " + shape_str(s));
    const int64_t n = s[0];
    if (n < 4 || n % 2 != 0)
        throw std::invalid_argument("simclr_loss: need at least two pairs (B >= 2)");
    if (static_cast<int64_t>(pairing.size()) != n)
        throw std::invalid_argument("simclr_loss: pairing must map every anchor");
    for (int64_t i = 0; i < n; ++i)
        if (pairing[i] == i || pairing[i] < 0 || pairing[i] >= n)
            throw std::invalid_argument("simclr_loss: invalid pairing");

    Tensor sims = scale(cosine_sim_matrix(z, z), 1.0 / tau);
    Tensor masked = add(sims, detail::diag_mask(n, -1e30));  // excludes k == i
    Tensor logp = log_softmax(masked, 1);
    return neg(mean_all(gather_rows(logp, pairing)));
}

struct BidirectionalLoss {
    Tensor l_s;    // strong -> weak direction
    Tensor l_w;    // weak -> strong direction
    Tensor l_stc;  // (l_s + l_w) / 2
};

// Row i of each matrix is one sample's embedding; positives sit on the
// diagonal of the similarity matrix. Each direction is normalized by B so the
// magnitude is batch-size independent.
inline BidirectionalLoss bidirectional_loss(const Tensor& c_st, const Tensor& c_wt, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("bidirectional_loss: tau must be > 0");
    require_same_shape("bidirectional_loss", c_st.shape(), c_wt.shape());
    if (c_st.shape().size() != 2 || c_st.shape()[0] < 1)
        throw std::invalid_argument("bidirectional_loss: need a nonempty BxD batch");
    const int64_t b = c_st.shape()[0];
    const auto diag = detail::iota_indices(b);

    Tensor sims = scale(cosine_sim_matrix(c_st, c_wt), 1.0 / tau);
    BidirectionalLoss out;
    out.l_s = neg(mean_all(gather_rows(log_softmax(sims, 1), diag)));
    out.l_w = neg(mean_all(gather_rows(log_softmax(transpose2d(sims), 1), diag)));
    out.l_stc = scale(add(out.l_s, out.l_w), 0.5);
    return out;
}

// mean squared coordinate difference
inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape("mse_loss", pred.shape(), target.shape());
    Tensor d = sub(pred, target);
    return mean_all(mul(d, d));
}

// mean negative log-softmax of the true class
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels) {
    const Shape& s = logits.shape();
    if (s.size() != 2) throw ShapeError("cross_entropy: need BxC logits, got " + shape_str(s));
    if (static_cast<int64_t>(labels.size()) != s[0])
        throw std::invalid_argument("cross_entropy: one label per row required");
    for (int64_t l : labels)
        if (l < 0 || l >= s[1]) throw std::out_of_range("cross_entropy: label out of range");
    return neg(mean_all(gather_rows(log_softmax(logits, 1), labels)));
}

// lambda_reg * mse + lambda_class * (ce_floor + ce_building)
inline Tensor finetune_loss(const Tensor& mse, const Tensor& ce_floor, const Tensor& ce_building,
                            const LossConfig& cfg) {
    cfg.validate();
    return add(scale(mse, cfg.lambda_reg), scale(add(ce_floor, ce_building), cfg.lambda_class));
}

}  // namespace qscl
