#pragma once

// Contrastive pretraining loop, supervised fine-tuning of the task heads and
// the evaluation protocol (accuracies, mean location error, CDF, sweeps).

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qscl/augment.hpp"
#include "qscl/checkpoint.hpp"
#include "qscl/data.hpp"
#include "qscl/encoder.hpp"
#include "qscl/loss.hpp"
#include "qscl/matrix.hpp"
#include "qscl/tensor.hpp"

namespace qscl {

// -------------------------------------------------------------------------
// optimizers
// -------------------------------------------------------------------------

struct OptimizerConfig {
    enum class Kind { sgd, adam };
    Kind kind = Kind::adam;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static Kind parse_kind(const std::string& s) {
        if (s == "sgd") return Kind::sgd;
        if (s == "adam") return Kind::adam;
        throw std::invalid_argument("unknown optimizer: " + s);
    }
};

class Optimizer {
public:
    explicit Optimizer(const OptimizerConfig& cfg) : cfg_(cfg) {}

    // applies one update to the named parameters from their current grads;
    // parameters whose grad was never populated are skipped
    void step(ModelParams& params, const std::vector<std::string>& names) {
        ++t_;
        for (const auto& name : names) {
            Tensor& p = params.at(name);
            const auto& g = p.grad();
            if (g.size() != p.values().size()) continue;
            auto& v = p.values_mut();
            if (cfg_.kind == OptimizerConfig::Kind::sgd) {
                for (size_t i = 0; i < v.size(); ++i) v[i] -= cfg_.lr * g[i];
            } else {
                Moments& mo = state_[name];
                if (mo.m.size() != v.size()) {
                    mo.m.assign(v.size(), 0.0);
                    mo.v.assign(v.size(), 0.0);
                }
                const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
                const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
                for (size_t i = 0; i < v.size(); ++i) {
                    mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g[i];
                    mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                    const double mhat = mo.m[i] / bc1;
                    const double vhat = mo.v[i] / bc2;
                    v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                }
            }
        }
    }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    OptimizerConfig cfg_;
    std::map<std::string, Moments> state_;
    int64_t t_ = 0;
};

// -------------------------------------------------------------------------
// configuration
// -------------------------------------------------------------------------

struct TrainConfig {
    double tau = 0.1;
    OptimizerConfig opt;
    int64_t batch = 64;
    int64_t epochs = 100;
    uint64_t seed = 0;
    AugmentConfig augment;
    double lambda_reg = 1.0;
    double lambda_class = 1.0;
    bool freeze_encoder = false;

    void validate() const {
        if (batch < 2) throw std::invalid_argument("TrainConfig: batch must be >= 2");
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        // lr = 0 is allowed for the zero-step ablation
        if (cfg_lr() < 0.0) throw std::invalid_argument("TrainConfig: lr must be >= 0");
        if (!(tau > 0.0)) throw std::invalid_argument("TrainConfig: tau must be > 0");
        augment.validate();
    }
    double cfg_lr() const { return opt.lr; }
};

// seed stream tags (see derive_seed)
constexpr uint64_t kStreamEpochShuffle = 10;
constexpr uint64_t kStreamFinetuneShuffle = 11;
constexpr uint64_t kStreamApSelect = 12;
constexpr uint64_t kStreamInit = 13;
constexpr uint64_t kStreamSweepCell = 14;

namespace detail {

inline Tensor rows_to_tensor(const Matrix& m, const std::vector<size_t>& rows) {
    std::vector<double> data;
    data.reserve(rows.size() * m.cols);
    for (size_t r : rows)
        data.insert(data.end(), m.data.begin() + r * m.cols, m.data.begin() + (r + 1) * m.cols);
    return Tensor::from({static_cast<int64_t>(rows.size()), static_cast<int64_t>(m.cols)},
                        std::move(data));
}

inline Tensor matrix_to_tensor(const Matrix& m) {
    return Tensor::from({static_cast<int64_t>(m.rows), static_cast<int64_t>(m.cols)}, m.data);
}

}  // namespace detail

// -------------------------------------------------------------------------
// pretraining (contrastive, label-free)
// -------------------------------------------------------------------------

struct EpochLoss {
    double l_s = 0.0;
    double l_w = 0.0;
    double l_stc = 0.0;
};

struct PretrainHistory {
    std::vector<EpochLoss> epochs;
};

// One pass of Algorithm 2's pretraining: per mini-batch generate the strong
// and weak views, encode both through base + STAA + projection, take the
// bidirectional loss and update the encoder/projection parameters.
inline PretrainHistory pretrain(const Matrix& pool, ModelParams& params, const EncoderConfig& enc,
                                const TrainConfig& cfg) {
    cfg.validate();
    if (pool.rows == 0) throw std::invalid_argument("pretrain: empty pool");
    if (cfg.batch > static_cast<int64_t>(pool.rows))
        throw std::invalid_argument("pretrain: batch larger than the pool");

    const std::vector<std::string> trainable = params.encoder_names();
    Optimizer opt(cfg.opt);
    PretrainHistory history;

    std::vector<size_t> order(pool.rows);
    for (size_t i = 0; i < pool.rows; ++i) order[i] = i;

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, kStreamEpochShuffle, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order.begin(), order.end());

        EpochLoss sums;
        int64_t n_batches = 0;
        const size_t full_batches = pool.rows / static_cast<size_t>(cfg.batch);
        for (size_t b = 0; b < full_batches; ++b) {
            Matrix strong(cfg.batch, pool.cols), weak(cfg.batch, pool.cols);
            for (int64_t i = 0; i < cfg.batch; ++i) {
                const size_t row = order[b * cfg.batch + i];
                const std::vector<double> x = pool.row(row);
                // fresh augmentations every epoch, per-sample derived seeds
                Rng rs(derive_seed(cfg.augment.seed, kStreamStrong + 2 * epoch, row));
                Rng rw(derive_seed(cfg.augment.seed, kStreamWeak + 2 * epoch, row));
                strong.set_row(i, strong_augment(x, cfg.augment, rs).strong);
                weak.set_row(i, weak_augment(x, cfg.augment.sigma_weak, rw));
            }
            Tensor c_st = project(staa_encode(base_encode(detail::matrix_to_tensor(strong), params,
                                                          enc),
                                              params, enc),
                                  params, enc);
            Tensor c_wt = project(staa_encode(base_encode(detail::matrix_to_tensor(weak), params,
                                                          enc),
                                              params, enc),
                                  params, enc);
            BidirectionalLoss loss = bidirectional_loss(c_st, c_wt, cfg.tau);
            if (!std::isfinite(loss.l_stc.item()))
                throw std::runtime_error("pretrain: non-finite loss at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(b) +
                                         " (L_S=" + std::to_string(loss.l_s.item()) +
                                         ", L_W=" + std::to_string(loss.l_w.item()) + ")");
            backward(loss.l_stc);
            opt.step(params, trainable);
            sums.l_s += loss.l_s.item();
            sums.l_w += loss.l_w.item();
            sums.l_stc += loss.l_stc.item();
            ++n_batches;
        }
        history.epochs.push_back(
            {sums.l_s / n_batches, sums.l_w / n_batches, sums.l_stc / n_batches});
    }
    return history;
}

// -------------------------------------------------------------------------
// fine-tuning
// -------------------------------------------------------------------------

struct FinetuneEpoch {
    double loss = 0.0;
    double mse = 0.0;
    double ce_floor = 0.0;
    double ce_building = 0.0;
};

struct FinetuneHistory {
    std::vector<FinetuneEpoch> epochs;
};

inline FinetuneHistory finetune(const Matrix& x, const Targets& targets, ModelParams& params,
                                const EncoderConfig& enc, const TrainConfig& cfg) {
    if (x.rows == 0) throw std::invalid_argument("finetune: empty labeled set");
    if (x.rows != targets.floor.size() || x.rows != static_cast<size_t>(targets.position.rows))
        throw std::invalid_argument("finetune: targets do not match the labeled set");
    cfg.augment.validate();
    if (cfg.epochs < 1) throw std::invalid_argument("finetune: epochs must be >= 1");

    LossConfig loss_cfg;
    loss_cfg.tau = cfg.tau;
    loss_cfg.lambda_reg = cfg.lambda_reg;
    loss_cfg.lambda_class = cfg.lambda_class;

    const std::vector<std::string> trainable =
        cfg.freeze_encoder ? params.head_names() : params.all_names();
    Optimizer opt(cfg.opt);
    FinetuneHistory history;

    const int64_t batch = std::min<int64_t>(cfg.batch, static_cast<int64_t>(x.rows));
    std::vector<size_t> order(x.rows);
    for (size_t i = 0; i < x.rows; ++i) order[i] = i;

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(
            derive_seed(cfg.seed, kStreamFinetuneShuffle, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order.begin(), order.end());

        FinetuneEpoch sums;
        int64_t n_batches = 0;
        for (size_t start = 0; start + batch <= x.rows; start += batch) {
            std::vector<size_t> rows(order.begin() + start, order.begin() + start + batch);
            Tensor bx = detail::rows_to_tensor(x, rows);
            Tensor pos_target = detail::rows_to_tensor(targets.position, rows);
            std::vector<int64_t> floor_labels, building_labels;
            for (size_t r : rows) {
                floor_labels.push_back(targets.floor[r]);
                building_labels.push_back(targets.building[r]);
            }

            Tensor feats = encode_features(bx, params, enc);
            HeadOutputs heads = heads_forward(feats, params);
            Tensor mse = mse_loss(heads.position, pos_target);
            Tensor cef = cross_entropy(heads.floor_logits, floor_labels);
            Tensor ceb = cross_entropy(heads.building_logits, building_labels);
            Tensor loss = finetune_loss(mse, cef, ceb, loss_cfg);
            if (!std::isfinite(loss.item()))
                throw std::runtime_error("finetune: non-finite loss at epoch " +
                                         std::to_string(epoch));
            backward(loss);
            opt.step(params, trainable);
            sums.loss += loss.item();
            sums.mse += mse.item();
            sums.ce_floor += cef.item();
            sums.ce_building += ceb.item();
            ++n_batches;
        }
        history.epochs.push_back({sums.loss / n_batches, sums.mse / n_batches,
                                  sums.ce_floor / n_batches, sums.ce_building / n_batches});
    }
    return history;
}

// -------------------------------------------------------------------------
// evaluation
// -------------------------------------------------------------------------

struct EvalReport {
    double building_accuracy = 0.0;
    double floor_accuracy = 0.0;
    double mean_location_error = 0.0;
    std::vector<std::pair<double, double>> cdf;  // (error, percentile k/N), sorted
    uint64_t seed = 0;
    nlohmann::json config_echo;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["building_accuracy"] = building_accuracy;
        j["floor_accuracy"] = floor_accuracy;
        j["mean_location_error"] = mean_location_error;
        j["n_test"] = cdf.size();
        nlohmann::json c = nlohmann::json::array();
        for (const auto& [err, pct] : cdf) c.push_back({err, pct});
        j["cdf"] = c;
        j["seed"] = seed;
        j["config"] = config_echo;
        return j;
    }
};

namespace detail {

// argmax with first-index tie-break
inline int64_t argmax_row(const std::vector<double>& v, int64_t row, int64_t cols) {
    int64_t best = 0;
    for (int64_t c = 1; c < cols; ++c)
        if (v[row * cols + c] > v[row * cols + best]) best = c;
    return best;
}

}  // namespace detail

inline EvalReport evaluate(const Matrix& x, const Targets& targets, const ModelParams& params,
                           const EncoderConfig& enc) {
    if (x.rows == 0) throw std::invalid_argument("evaluate: empty test set");
    Tensor feats = encode_features(detail::matrix_to_tensor(x), params, enc);
    HeadOutputs heads = heads_forward(feats, params);

    const int64_t n = static_cast<int64_t>(x.rows);
    EvalReport rep;
    int64_t floor_hits = 0, building_hits = 0;
    std::vector<double> errors(n);
    const int64_t n_floors = heads.floor_logits.shape()[1];
    const int64_t n_buildings = heads.building_logits.shape()[1];
    for (int64_t i = 0; i < n; ++i) {
        if (detail::argmax_row(heads.floor_logits.values(), i, n_floors) == targets.floor[i])
            ++floor_hits;
        if (detail::argmax_row(heads.building_logits.values(), i, n_buildings) ==
            targets.building[i])
            ++building_hits;
        const double dx = heads.position.values()[i * 2 + 0] - targets.position.at(i, 0);
        const double dy = heads.position.values()[i * 2 + 1] - targets.position.at(i, 1);
        errors[i] = std::sqrt(dx * dx + dy * dy);
    }
    rep.floor_accuracy = static_cast<double>(floor_hits) / n;
    rep.building_accuracy = static_cast<double>(building_hits) / n;
    double sum = 0.0;
    for (double e : errors) sum += e;
    rep.mean_location_error = sum / n;

    std::sort(errors.begin(), errors.end());
    rep.cdf.reserve(n);
    for (int64_t k = 0; k < n; ++k)
        rep.cdf.emplace_back(errors[k], static_cast<double>(k + 1) / n);
    return rep;
}

// -------------------------------------------------------------------------
// full pipeline and sweeps
// -------------------------------------------------------------------------

struct PipelineSettings {
    EncoderConfig encoder;  // input_dim is overwritten after AP selection
    TrainConfig pretrain;
    TrainConfig finetune;
    ApSelection selection;
    double labeled_fraction = 1.0;
    double test_fraction = 0.5;
    uint64_t seed = 0;
    bool do_pretrain = true;
};

struct PipelineResult {
    ModelParams params;
    EncoderConfig encoder;  // as actually used (input dim, class counts)
    PretrainHistory pretrain_history;
    FinetuneHistory finetune_history;
    EvalReport report;
    std::vector<size_t> selected_aps;
    SplitResult split;
};

// Deterministic end-to-end run: split, fit preprocessing on the train pool,
// select APs on train statistics, pretrain on the unlabeled pool, fine-tune
// on the labeled subset, evaluate on the held-out test set.
inline PipelineResult run_pipeline(const Dataset& ds, const PipelineSettings& settings) {
    PipelineResult out;
    out.split = split_dataset(ds.records.size(), settings.labeled_fraction, settings.seed,
                              settings.test_fraction);

    Preprocessor prep = Preprocessor::fit(ds, out.split.train_pool);
    Matrix pool = prep.transform(ds, out.split.train_pool);

    ApSelection sel = settings.selection;
    sel.seed = derive_seed(settings.seed, kStreamApSelect, 0);
    out.selected_aps = select_aps(pool, prep.detection_rate(), sel);

    pool = subset_columns(pool, out.selected_aps);
    Matrix labeled = subset_columns(prep.transform(ds, out.split.labeled), out.selected_aps);
    Matrix test = subset_columns(prep.transform(ds, out.split.test), out.selected_aps);
    Targets labeled_targets = prep.targets(ds, out.split.labeled);
    Targets test_targets = prep.targets(ds, out.split.test);

    EncoderConfig enc = settings.encoder;
    enc.input_dim = static_cast<int64_t>(out.selected_aps.size());
    enc.n_floors = ds.meta.n_floors;
    enc.n_buildings = ds.meta.n_buildings;
    enc.init_seed = derive_seed(settings.seed, kStreamInit, 0);
    enc.validate();
    out.encoder = enc;
    out.params = init_params(enc);

    if (settings.do_pretrain) {
        TrainConfig pre = settings.pretrain;
        pre.seed = settings.seed;
        pre.augment.seed = derive_seed(settings.seed, kStreamStrong, 0);
        pre.batch = std::min<int64_t>(pre.batch, static_cast<int64_t>(pool.rows));
        if (pre.batch < 2) throw std::invalid_argument("run_pipeline: pool too small to pretrain");
        out.pretrain_history = pretrain(pool, out.params, enc, pre);
    }

    TrainConfig ft = settings.finetune;
    ft.seed = derive_seed(settings.seed, kStreamFinetuneShuffle, 0);
    out.finetune_history = finetune(labeled, labeled_targets, out.params, enc, ft);

    out.report = evaluate(test, test_targets, out.params, enc);
    out.report.seed = settings.seed;
    return out;
}

// mean diagonal cosine similarity between strong and weak embeddings of a
// batch; the statistic behind the noise-robustness checks
inline double mean_pairwise_cossim(const Matrix& batch, const ModelParams& params,
                                   const EncoderConfig& enc, const AugmentConfig& aug) {
    BatchAugmentResult views = augment_batch(batch, aug);
    Tensor c_st = project(
        staa_encode(base_encode(detail::matrix_to_tensor(views.strong), params, enc), params, enc),
        params, enc);
    Tensor c_wt = project(
        staa_encode(base_encode(detail::matrix_to_tensor(views.weak), params, enc), params, enc),
        params, enc);
    Tensor sims = cosine_sim_matrix(c_st, c_wt);
    const int64_t b = sims.shape()[0];
    double mean = 0.0;
    for (int64_t i = 0; i < b; ++i) mean += sims.values()[i * b + i];
    return mean / b;
}

// -------------------------------------------------------------------------
// sweep
// -------------------------------------------------------------------------

struct SweepRow {
    std::string axis;       // labeled_fraction | ap_strategy | noise
    std::string cell;       // grid coordinate, printable
    bool ok = false;
    std::string error;
    EvalReport report;
    std::optional<double> noise_cossim;        // noise sweeps only
    std::optional<double> noise_cossim_shift;  // |cossim(p) - cossim(0)|
};

struct SweepGrid {
    enum class Axis { labeled_fraction, ap_strategy, noise };
    Axis axis = Axis::labeled_fraction;
    std::vector<double> fractions;             // labeled_fraction axis
    std::vector<std::string> strategies;       // ap_strategy axis
    std::vector<double> depolarizing_levels;   // noise axis

    static Axis parse_axis(const std::string& s) {
        if (s == "labeled_fraction") return Axis::labeled_fraction;
        if (s == "ap_strategy") return Axis::ap_strategy;
        if (s == "noise") return Axis::noise;
        throw ConfigError("unknown sweep axis: " + s);
    }
};

// One full pipeline per grid cell, each with its own derived seed. A failing
// cell is recorded and does not abort the rest of the sweep.
inline std::vector<SweepRow> sweep(const Dataset& ds, const PipelineSettings& base,
                                   const SweepGrid& grid) {
    std::vector<SweepRow> rows;
    size_t n_cells = 0;
    auto cell_settings = [&](size_t i) {
        PipelineSettings s = base;
        s.seed = derive_seed(base.seed, kStreamSweepCell, i);
        return s;
    };

    switch (grid.axis) {
        case SweepGrid::Axis::labeled_fraction: {
            if (grid.fractions.empty()) throw ConfigError("sweep: empty labeled_fraction grid");
            for (size_t i = 0; i < grid.fractions.size(); ++i) {
                SweepRow row;
                row.axis = "labeled_fraction";
                row.cell = std::to_string(grid.fractions[i]);
                try {
                    PipelineSettings s = cell_settings(i);
                    s.labeled_fraction = grid.fractions[i];
                    row.report = run_pipeline(ds, s).report;
                    row.ok = true;
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            }
            break;
        }
        case SweepGrid::Axis::ap_strategy: {
            if (grid.strategies.empty()) throw ConfigError("sweep: empty ap_strategy grid");
            for (size_t i = 0; i < grid.strategies.size(); ++i) {
                SweepRow row;
                row.axis = "ap_strategy";
                row.cell = grid.strategies[i];
                try {
                    PipelineSettings s = cell_settings(i);
                    s.selection.strategy = ApSelection::parse_strategy(grid.strategies[i]);
                    row.report = run_pipeline(ds, s).report;
                    row.ok = true;
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            }
            break;
        }
        case SweepGrid::Axis::noise: {
            if (grid.depolarizing_levels.empty()) throw ConfigError("sweep: empty noise grid");
            // fixed data and encoder across levels; only the channel varies
            std::optional<double> baseline;
            for (size_t i = 0; i < grid.depolarizing_levels.size(); ++i) {
                SweepRow row;
                row.axis = "noise";
                row.cell = std::to_string(grid.depolarizing_levels[i]);
                try {
                    PipelineSettings s = base;  // same seed on purpose
                    s.seed = derive_seed(base.seed, kStreamSweepCell, 1000);
                    s.pretrain.augment.noise.p_depolarizing = grid.depolarizing_levels[i];
                    PipelineResult res = run_pipeline(ds, s);

                    Preprocessor prep = Preprocessor::fit(ds, res.split.train_pool);
                    Matrix pool =
                        subset_columns(prep.transform(ds, res.split.train_pool), res.selected_aps);
                    const size_t nb = std::min<size_t>(64, pool.rows);
                    Matrix probe(nb, pool.cols);
                    for (size_t r = 0; r < nb; ++r) probe.set_row(r, pool.row(r));
                    AugmentConfig aug = s.pretrain.augment;
                    aug.seed = derive_seed(s.seed, kStreamStrong, 999);
                    row.noise_cossim = mean_pairwise_cossim(probe, res.params, res.encoder, aug);
                    if (!baseline) baseline = row.noise_cossim;
                    row.noise_cossim_shift = std::abs(*row.noise_cossim - *baseline);
                    row.report = res.report;
                    row.ok = true;
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            }
            break;
        }
    }
    n_cells = rows.size();
    (void)n_cells;
    return rows;
}

// -------------------------------------------------------------------------
// artifact writers
// -------------------------------------------------------------------------

inline void save_params(const std::string& path, const ModelParams& params) {
    save_tensors(path, params.tensors);
}

inline ModelParams load_params(const std::string& path) {
    ModelParams p;
    p.tensors = load_tensors(path);
    return p;
}

inline void write_pretrain_history_csv(std::ostream& os, const PretrainHistory& h) {
    os << "epoch,L_S,L_W,L_STC\n";
    for (size_t e = 0; e < h.epochs.size(); ++e)
        os << e << "," << h.epochs[e].l_s << "," << h.epochs[e].l_w << "," << h.epochs[e].l_stc
           << "\n";
}

inline void write_finetune_history_csv(std::ostream& os, const FinetuneHistory& h) {
    os << "epoch,loss,mse,ce_floor,ce_building\n";
    for (size_t e = 0; e < h.epochs.size(); ++e)
        os << e << "," << h.epochs[e].loss << "," << h.epochs[e].mse << "," << h.epochs[e].ce_floor
           << "," << h.epochs[e].ce_building << "\n";
}

inline void write_cdf_csv(std::ostream& os, const EvalReport& rep) {
    os << "error,percentile\n";
    for (const auto& [err, pct] : rep.cdf) os << err << "," << pct << "\n";
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "axis,cell,ok,building_accuracy,floor_accuracy,mean_location_error,noise_cossim,"
          "noise_cossim_shift,error\n";
    for (const auto& r : rows) {
        os << r.axis << "," << r.cell << "," << (r.ok ? 1 : 0) << ",";
        if (r.ok)
            os << r.report.building_accuracy << "," << r.report.floor_accuracy << ","
               << r.report.mean_location_error;
        else
            os << ",,";
        os << ",";
        if (r.noise_cossim) os << *r.noise_cossim;
        os << ",";
        if (r.noise_cossim_shift) os << *r.noise_cossim_shift;
        os << "," << r.error << "\n";
    }
}

}  // namespace qscl
