#pragma once

// CSV ingestion for UJIIndoorLoc/UTSIndoorLoc-style fingerprint datasets,
// the preprocessing chain (sub-threshold filtering, train-split mean
// imputation, min-max scaling, one-hot targets), AP selection strategies and
// deterministic splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qscl/checkpoint.hpp"
#include "qscl/config.hpp"
#include "qscl/matrix.hpp"
#include "qscl/rng.hpp"

namespace qscl {

struct CsvSchema {
    std::vector<std::string> rssi_columns;  // explicit names, or
    std::string rssi_prefix;                // every column starting with this
    std::string x_column;
    std::string y_column;
    std::string floor_column;
    std::string building_column;
    double missing_sentinel = 100.0;  // UJIIndoorLoc convention
    double min_valid_dbm = -90.0;     // weaker signals count as missing
    std::string coordinate_units = "meters";
    bool project_lonlat = false;  // equirectangular projection to local meters

    static CsvSchema from_config(const KeyValueConfig& cfg) {
        CsvSchema s;
        if (cfg.has("schema.rssi_columns")) {
            std::istringstream in(cfg.get_string("schema.rssi_columns"));
            std::string tok;
            while (std::getline(in, tok, ',')) {
                while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.erase(0, 1);
                while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.pop_back();
                if (!tok.empty()) s.rssi_columns.push_back(tok);
            }
        }
        s.rssi_prefix = cfg.get_string("schema.rssi_prefix", "");
        if (s.rssi_columns.empty() && s.rssi_prefix.empty())
            throw ConfigError("schema: need schema.rssi_columns or schema.rssi_prefix");
        s.x_column = cfg.get_string("schema.x_column");
        s.y_column = cfg.get_string("schema.y_column");
        s.floor_column = cfg.get_string("schema.floor_column");
        s.building_column = cfg.get_string("schema.building_column");
        s.missing_sentinel = cfg.get_double("schema.missing_sentinel", 100.0);
        s.min_valid_dbm = cfg.get_double("schema.min_valid_dbm", -90.0);
        s.coordinate_units = cfg.get_string("schema.coordinate_units", "meters");
        s.project_lonlat = cfg.get_bool("schema.project_lonlat", false);
        return s;
    }

    bool is_missing(double v) const { return v == missing_sentinel || v < min_valid_dbm; }
};

struct RssiRecord {
    std::vector<double> rssi;  // raw dBm; sentinel / sub-threshold = missing
    double x = 0.0;
    double y = 0.0;
    int64_t floor_id = 0;     // raw id from the file
    int64_t building_id = 0;  // raw id from the file
};

struct DatasetMeta {
    int64_t n_aps = 0;
    int64_t n_floors = 0;
    int64_t n_buildings = 0;
    double missing_sentinel = 100.0;
    double min_valid_dbm = -90.0;
    std::string coordinate_units = "meters";
    double rssi_min = 0.0;  // over valid values
    double rssi_max = 0.0;
    std::vector<std::string> ap_names;
    std::vector<int64_t> floor_ids;     // sorted unique raw ids
    std::vector<int64_t> building_ids;  // sorted unique raw ids

    int64_t floor_class(int64_t raw) const { return class_of(floor_ids, raw, "floor"); }
    int64_t building_class(int64_t raw) const { return class_of(building_ids, raw, "building"); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["n_aps"] = n_aps;
        j["n_floors"] = n_floors;
        j["n_buildings"] = n_buildings;
        j["missing_sentinel"] = missing_sentinel;
        j["min_valid_dbm"] = min_valid_dbm;
        j["coordinate_units"] = coordinate_units;
        j["rssi_min"] = rssi_min;
        j["rssi_max"] = rssi_max;
        j["ap_names"] = ap_names;
        j["floor_ids"] = floor_ids;
        j["building_ids"] = building_ids;
        return j;
    }

private:
    static int64_t class_of(const std::vector<int64_t>& ids, int64_t raw, const char* what) {
        auto it = std::lower_bound(ids.begin(), ids.end(), raw);
        if (it == ids.end() || *it != raw)
            throw std::out_of_range(std::string("unknown ") + what + " id " + std::to_string(raw));
        return it - ids.begin();
    }
};

struct Dataset {
    std::vector<RssiRecord> records;
    DatasetMeta meta;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_cell(const std::string& v, size_t row, const std::string& column) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (...) {
        throw std::runtime_error("csv row " + std::to_string(row) + ", column '" + column +
                                 "': not a number: '" + v + "'");
    }
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);

    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("load_csv: empty file " + path);
    const std::vector<std::string> columns = detail::split_csv_line(header);
    std::map<std::string, size_t> col_index;
    for (size_t i = 0; i < columns.size(); ++i) col_index[columns[i]] = i;

    auto require_column = [&](const std::string& name) {
        auto it = col_index.find(name);
        if (it == col_index.end())
            throw ConfigError("schema: column '" + name + "' not present in " + path);
        return it->second;
    };

    std::vector<size_t> rssi_idx;
    std::vector<std::string> ap_names;
    if (!schema.rssi_columns.empty()) {
        for (const auto& name : schema.rssi_columns) {
            rssi_idx.push_back(require_column(name));
            ap_names.push_back(name);
        }
    } else {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i].rfind(schema.rssi_prefix, 0) == 0) {
                rssi_idx.push_back(i);
                ap_names.push_back(columns[i]);
            }
        if (rssi_idx.empty())
            throw ConfigError("schema: no columns start with '" + schema.rssi_prefix + "'");
    }
    const size_t xi = require_column(schema.x_column);
    const size_t yi = require_column(schema.y_column);
    const size_t fi = require_column(schema.floor_column);
    const size_t bi = require_column(schema.building_column);

    Dataset ds;
    ds.meta.n_aps = static_cast<int64_t>(rssi_idx.size());
    ds.meta.ap_names = ap_names;
    ds.meta.missing_sentinel = schema.missing_sentinel;
    ds.meta.min_valid_dbm = schema.min_valid_dbm;
    ds.meta.coordinate_units = schema.coordinate_units;

    std::string line;
    size_t row = 1;  // header was row 1
    double vmin = INFINITY, vmax = -INFINITY;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != columns.size())
            throw std::runtime_error("csv row " + std::to_string(row) + ": expected " +
                                     std::to_string(columns.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        RssiRecord rec;
        rec.rssi.reserve(rssi_idx.size());
        for (size_t a = 0; a < rssi_idx.size(); ++a) {
            const double v = detail::parse_cell(cells[rssi_idx[a]], row, ap_names[a]);
            rec.rssi.push_back(v);
            if (!schema.is_missing(v)) {
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
            }
        }
        rec.x = detail::parse_cell(cells[xi], row, schema.x_column);
        rec.y = detail::parse_cell(cells[yi], row, schema.y_column);
        rec.floor_id = static_cast<int64_t>(detail::parse_cell(cells[fi], row, schema.floor_column));
        rec.building_id =
            static_cast<int64_t>(detail::parse_cell(cells[bi], row, schema.building_column));
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

    std::vector<int64_t> floors, buildings;
    for (const auto& r : ds.records) {
        floors.push_back(r.floor_id);
        buildings.push_back(r.building_id);
    }
    std::sort(floors.begin(), floors.end());
    floors.erase(std::unique(floors.begin(), floors.end()), floors.end());
    std::sort(buildings.begin(), buildings.end());
    buildings.erase(std::unique(buildings.begin(), buildings.end()), buildings.end());
    ds.meta.floor_ids = floors;
    ds.meta.building_ids = buildings;
    ds.meta.n_floors = static_cast<int64_t>(floors.size());
    ds.meta.n_buildings = static_cast<int64_t>(buildings.size());
    ds.meta.rssi_min = std::isfinite(vmin) ? vmin : 0.0;
    ds.meta.rssi_max = std::isfinite(vmax) ? vmax : 0.0;

    if (schema.project_lonlat) {
        // local equirectangular projection: x = lon, y = lat in degrees
        constexpr double kEarthRadius = 6371000.0;
        double lat0 = 0.0, lon0 = 0.0;
        for (const auto& r : ds.records) {
            lon0 += r.x;
            lat0 += r.y;
        }
        lon0 /= ds.records.size();
        lat0 /= ds.records.size();
        const double rad = M_PI / 180.0;
        const double cos_lat0 = std::cos(lat0 * rad);
        for (auto& r : ds.records) {
            const double xm = kEarthRadius * cos_lat0 * (r.x - lon0) * rad;
            const double ym = kEarthRadius * (r.y - lat0) * rad;
            r.x = xm;
            r.y = ym;
        }
        ds.meta.coordinate_units = "meters";
    }
    return ds;
}

// Targets for a set of rows: native-unit positions, class indices and one-hot
// matrices (exactly one 1 per row).
struct Targets {
    Matrix position;  // N x 2
    std::vector<int64_t> floor;
    std::vector<int64_t> building;
    Matrix floor_onehot;
    Matrix building_onehot;
};

// Preprocessing statistics are fit on the training split only and then
// applied to any split; test values falling outside the train range are
// clamped into [0, 1].
class Preprocessor {
public:
    static Preprocessor fit(const Dataset& ds, const std::vector<size_t>& train_idx) {
        if (train_idx.empty()) throw std::invalid_argument("Preprocessor::fit: empty train split");
        const size_t n_aps = ds.records.front().rssi.size();
        const CsvValidity valid{ds.meta.missing_sentinel, ds.meta.min_valid_dbm};

        Preprocessor p;
        p.valid_ = valid;
        p.ap_mean_.assign(n_aps, 0.0);
        p.col_min_.assign(n_aps, 0.0);
        p.col_max_.assign(n_aps, 0.0);
        p.detection_rate_.assign(n_aps, 0.0);

        // global mean over every observed train value, the fallback for APs
        // never seen on the train split
        double global_sum = 0.0;
        size_t global_count = 0;
        for (size_t r : train_idx)
            for (size_t a = 0; a < n_aps; ++a) {
                const double v = ds.records[r].rssi[a];
                if (!valid.is_missing(v)) {
                    global_sum += v;
                    ++global_count;
                }
            }
        const double global_mean =
            global_count > 0 ? global_sum / global_count : ds.meta.min_valid_dbm;
        if (global_count == 0)
            p.warnings_.push_back("no observed RSSI values on the train split at all");

        for (size_t a = 0; a < n_aps; ++a) {
            double sum = 0.0;
            size_t count = 0;
            for (size_t r : train_idx) {
                const double v = ds.records[r].rssi[a];
                if (!valid.is_missing(v)) {
                    sum += v;
                    ++count;
                }
            }
            p.detection_rate_[a] = static_cast<double>(count) / train_idx.size();
            if (count > 0) {
                p.ap_mean_[a] = sum / count;
            } else {
                p.ap_mean_[a] = global_mean;
                p.warnings_.push_back("AP column " + std::to_string(a) +
                                      " entirely missing on train split; using global mean");
            }
            // min/max of the imputed train column
            double mn = p.ap_mean_[a], mx = p.ap_mean_[a];
            for (size_t r : train_idx) {
                const double v = ds.records[r].rssi[a];
                if (!valid.is_missing(v)) {
                    mn = std::min(mn, v);
                    mx = std::max(mx, v);
                }
            }
            p.col_min_[a] = mn;
            p.col_max_[a] = mx;
        }
        return p;
    }

    Matrix transform(const Dataset& ds, const std::vector<size_t>& idx) const {
        const size_t n_aps = ap_mean_.size();
        Matrix m(idx.size(), n_aps);
        for (size_t i = 0; i < idx.size(); ++i)
            for (size_t a = 0; a < n_aps; ++a) {
                const double raw = ds.records[idx[i]].rssi[a];
                const double v = valid_.is_missing(raw) ? ap_mean_[a] : raw;
                double scaled = 0.0;
                if (col_max_[a] > col_min_[a])
                    scaled = (v - col_min_[a]) / (col_max_[a] - col_min_[a]);
                m.at(i, a) = std::clamp(scaled, 0.0, 1.0);
            }
        return m;
    }

    Targets targets(const Dataset& ds, const std::vector<size_t>& idx) const {
        Targets t;
        t.position = Matrix(idx.size(), 2);
        t.floor_onehot = Matrix(idx.size(), ds.meta.n_floors);
        t.building_onehot = Matrix(idx.size(), ds.meta.n_buildings);
        for (size_t i = 0; i < idx.size(); ++i) {
            const RssiRecord& r = ds.records[idx[i]];
            t.position.at(i, 0) = r.x;
            t.position.at(i, 1) = r.y;
            const int64_t fc = ds.meta.floor_class(r.floor_id);
            const int64_t bc = ds.meta.building_class(r.building_id);
            t.floor.push_back(fc);
            t.building.push_back(bc);
            t.floor_onehot.at(i, fc) = 1.0;
            t.building_onehot.at(i, bc) = 1.0;
        }
        return t;
    }

    const std::vector<double>& ap_mean() const { return ap_mean_; }
    const std::vector<double>& col_min() const { return col_min_; }
    const std::vector<double>& col_max() const { return col_max_; }
    const std::vector<double>& detection_rate() const { return detection_rate_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    struct CsvValidity {
        double sentinel;
        double min_valid;
        bool is_missing(double v) const { return v == sentinel || v < min_valid; }
    };

    CsvValidity valid_{100.0, -90.0};
    std::vector<double> ap_mean_;
    std::vector<double> col_min_;
    std::vector<double> col_max_;
    std::vector<double> detection_rate_;
    std::vector<std::string> warnings_;
};

// -------------------------------------------------------------------------
// AP selection
// -------------------------------------------------------------------------

struct ApSelection {
    enum class Strategy { ranked, threshold, random };
    Strategy strategy = Strategy::ranked;
    double keep_fraction = 1.0;
    uint64_t seed = 0;

    static Strategy parse_strategy(const std::string& s) {
        if (s == "ranked") return Strategy::ranked;
        if (s == "threshold") return Strategy::threshold;
        if (s == "random") return Strategy::random;
        throw ConfigError("unknown AP selection strategy: " + s);
    }
    static std::string strategy_name(Strategy s) {
        switch (s) {
            case Strategy::ranked: return "ranked";
            case Strategy::threshold: return "threshold";
            default: return "random";
        }
    }
};

// Chooses k = round(keep_fraction * n_aps) columns using train-split
// statistics only. ranked: highest train variance first (documented proxy for
// the baseline's learned AP selector); threshold: highest train detection
// rate first; random: uniform subset under the seed.
inline std::vector<size_t> select_aps(const Matrix& train_matrix,
                                      const std::vector<double>& detection_rate,
                                      const ApSelection& sel) {
    const size_t n = train_matrix.cols;
    if (n == 0) throw ConfigError("select_aps: no AP columns");
    if (!(sel.keep_fraction > 0.0 && sel.keep_fraction <= 1.0))
        throw ConfigError("select_aps: keep_fraction must be in (0, 1]");
    const size_t k = std::max<size_t>(1, static_cast<size_t>(std::llround(sel.keep_fraction * n)));

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;

    switch (sel.strategy) {
        case ApSelection::Strategy::ranked: {
            std::vector<double> variance(n, 0.0);
            for (size_t c = 0; c < n; ++c) {
                double mean = 0.0;
                for (size_t r = 0; r < train_matrix.rows; ++r) mean += train_matrix.at(r, c);
                mean /= train_matrix.rows;
                double var = 0.0;
                for (size_t r = 0; r < train_matrix.rows; ++r) {
                    const double d = train_matrix.at(r, c) - mean;
                    var += d * d;
                }
                variance[c] = var / train_matrix.rows;
            }
            std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                return variance[a] > variance[b];
            });
            break;
        }
        case ApSelection::Strategy::threshold: {
            if (detection_rate.size() != n)
                throw std::invalid_argument("select_aps: detection_rate size mismatch");
            std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                return detection_rate[a] > detection_rate[b];
            });
            break;
        }
        case ApSelection::Strategy::random: {
            Rng rng(sel.seed);
            rng.shuffle(order.begin(), order.end());
            std::sort(order.begin(), order.begin() + static_cast<long>(k));
            break;
        }
    }
    order.resize(k);
    return order;
}

inline Matrix subset_columns(const Matrix& m, const std::vector<size_t>& indices) {
    Matrix out(m.rows, indices.size());
    for (size_t r = 0; r < m.rows; ++r)
        for (size_t j = 0; j < indices.size(); ++j) out.at(r, j) = m.at(r, indices[j]);
    return out;
}

// -------------------------------------------------------------------------
// splits
// -------------------------------------------------------------------------

struct SplitResult {
    std::vector<size_t> train_pool;  // pretraining reads these without labels
    std::vector<size_t> labeled;     // fine-tuning subset of the pool
    std::vector<size_t> test;
};

inline SplitResult split_dataset(size_t n_records, double labeled_fraction, uint64_t seed,
                                 double test_fraction = 0.5) {
    if (n_records == 0) throw std::invalid_argument("split_dataset: no records");
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
        throw ConfigError("split_dataset: labeled_fraction must be in (0, 1]");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ConfigError("split_dataset: test_fraction must be in [0, 1)");

    std::vector<size_t> order(n_records);
    for (size_t i = 0; i < n_records; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    const size_t n_test = static_cast<size_t>(std::llround(test_fraction * n_records));
    SplitResult out;
    out.test.assign(order.begin(), order.begin() + static_cast<long>(n_test));
    out.train_pool.assign(order.begin() + static_cast<long>(n_test), order.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train_pool.begin(), out.train_pool.end());

    if (out.train_pool.empty()) throw ConfigError("split_dataset: empty training pool");
    const size_t n_labeled = static_cast<size_t>(
        std::llround(labeled_fraction * static_cast<double>(out.train_pool.size())));
    if (n_labeled == 0)
        throw ConfigError("split_dataset: labeled_fraction yields zero labeled samples");

    std::vector<size_t> pool = out.train_pool;
    Rng rng2(derive_seed(seed, 3, 1));
    rng2.shuffle(pool.begin(), pool.end());
    out.labeled.assign(pool.begin(), pool.begin() + static_cast<long>(n_labeled));
    std::sort(out.labeled.begin(), out.labeled.end());
    return out;
}

// -------------------------------------------------------------------------
// binary matrix cache (checkpoint container with a single entry)
// -------------------------------------------------------------------------

inline void save_matrix(const std::string& path, const Matrix& m) {
    std::map<std::string, Tensor> t;
    t.emplace("matrix", Tensor::from({static_cast<int64_t>(m.rows), static_cast<int64_t>(m.cols)},
                                     m.data));
    save_tensors(path, t);
}

inline Matrix load_matrix(const std::string& path) {
    auto t = load_tensors(path);
    auto it = t.find("matrix");
    if (it == t.end()) throw std::runtime_error("load_matrix: no 'matrix' entry in " + path);
    const Shape& s = it->second.shape();
    if (s.size() != 2) throw std::runtime_error("load_matrix: entry is not 2-D in " + path);
    Matrix m(static_cast<size_t>(s[0]), static_cast<size_t>(s[1]));
    m.data = it->second.values();
    return m;
}

}  // namespace qscl
