#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "paforge/csv.hpp"
#include "paforge/error.hpp"
#include "paforge/features.hpp"
#include "paforge/regressor.hpp"
#include "paforge/rng.hpp"
#include "paforge/sampler.hpp"
#include "paforge/sim_backend.hpp"

namespace paforge {

struct Metrics {
    std::optional<double> r2;  // undefined when target variance is zero or n < 2
    double rmse_dbm = 0.0;
    double mae_dbm = 0.0;
    std::size_t n = 0;
    std::vector<std::pair<std::uint64_t, double>> residuals;  // (point_id, y - yhat)
};

inline Metrics compute_metrics(const std::vector<double>& truth, const std::vector<double>& pred,
                               const std::vector<std::uint64_t>* point_ids = nullptr) {
    if (truth.size() != pred.size()) throw Error("compute_metrics length mismatch");
    if (truth.empty()) throw Error("compute_metrics requires at least one row");
    if (point_ids && point_ids->size() != truth.size())
        throw Error("compute_metrics point_id length mismatch");
    Metrics m;
    m.n = truth.size();
    double sse = 0.0, sae = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double r = truth[i] - pred[i];
        sse += r * r;
        sae += std::abs(r);
        m.residuals.emplace_back(point_ids ? (*point_ids)[i] : i, r);
    }
    auto n = static_cast<double>(m.n);
    m.rmse_dbm = std::sqrt(sse / n);
    m.mae_dbm = sae / n;
    if (m.n >= 2) {
        double mean = 0.0;
        for (double y : truth) mean += y;
        mean /= n;
        double sst = 0.0;
        for (double y : truth) sst += (y - mean) * (y - mean);
        if (sst > 0) m.r2 = 1.0 - sse / sst;
    }
    return m;
}

namespace detail {

/// Linear-interpolation empirical quantile on a sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error("quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    double pos = p * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

/// Stratified fold assignment for a continuous target: rows are binned by
/// target deciles (value-based edges, collapsing under ties), each bin is
/// shuffled with the seed, and rows are dealt round-robin onto folds with
/// a cursor carried across bins so overall fold sizes stay balanced.
/// Returns fold index per dataset row.
inline std::vector<std::size_t> kfold_stratified(const Dataset& dataset, int k, std::uint64_t seed) {
    if (k < 2) throw Error("k must be >= 2");
    const std::size_t n = dataset.rows.size();
    if (n < static_cast<std::size_t>(k)) throw Error("dataset smaller than fold count");

    std::vector<double> sorted_targets(n);
    for (std::size_t i = 0; i < n; ++i) sorted_targets[i] = dataset.rows[i].target;
    std::sort(sorted_targets.begin(), sorted_targets.end());
    std::vector<double> edges;
    for (int j = 1; j < 10; ++j)
        edges.push_back(sorted_targets[static_cast<std::size_t>(j) * n / 10]);
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    auto bin_of = [&](double v) {
        return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) -
                                        edges.begin());
    };
    std::vector<std::vector<std::size_t>> bins(edges.size() + 1);
    for (std::size_t i = 0; i < n; ++i) bins[bin_of(dataset.rows[i].target)].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> fold_of(n, 0);
    std::size_t cursor = 0;
    for (auto& bin : bins) {
        rng.shuffle(bin);
        for (std::size_t row : bin) fold_of[row] = cursor++ % static_cast<std::size_t>(k);
    }
    return fold_of;
}

struct CVReport {
    int k = 0;
    std::vector<Metrics> folds;
    Metrics pooled;  // over all out-of-fold predictions
    double q025 = 0.0, q975 = 0.0;  // pooled residual quantiles
    double mean_residual = 0.0;
};

/// K-fold CV: trains k models, each on k-1 folds, and pools the held-out
/// residuals (every row out-of-fold exactly once). Fold order is fixed by
/// fold index so the report is deterministic.
inline CVReport cross_validate(const Dataset& dataset, const BoostConfig& config, int k,
                               std::uint64_t seed) {
    auto fold_of = kfold_stratified(dataset, k, seed);
    CVReport report;
    report.k = k;
    std::vector<double> pooled_truth, pooled_pred;
    std::vector<std::uint64_t> pooled_ids;
    for (int f = 0; f < k; ++f) {
        Dataset train;
        train.schema = dataset.schema;
        std::vector<double> truth, pred;
        std::vector<std::uint64_t> ids;
        for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
            if (fold_of[i] == static_cast<std::size_t>(f)) continue;
            train.rows.push_back(dataset.rows[i]);
        }
        BoostedModel model = fit(train, config);
        for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
            if (fold_of[i] != static_cast<std::size_t>(f)) continue;
            truth.push_back(dataset.rows[i].target);
            pred.push_back(model.predict(dataset.rows[i].features));
            ids.push_back(dataset.rows[i].point_id);
        }
        report.folds.push_back(compute_metrics(truth, pred, &ids));
        pooled_truth.insert(pooled_truth.end(), truth.begin(), truth.end());
        pooled_pred.insert(pooled_pred.end(), pred.begin(), pred.end());
        pooled_ids.insert(pooled_ids.end(), ids.begin(), ids.end());
    }
    report.pooled = compute_metrics(pooled_truth, pooled_pred, &pooled_ids);
    std::vector<double> sorted;
    sorted.reserve(report.pooled.residuals.size());
    double sum = 0.0;
    for (const auto& [id, r] : report.pooled.residuals) {
        sorted.push_back(r);
        sum += r;
    }
    std::sort(sorted.begin(), sorted.end());
    report.q025 = detail::quantile_sorted(sorted, 0.025);
    report.q975 = detail::quantile_sorted(sorted, 0.975);
    report.mean_residual = sum / static_cast<double>(sorted.size());
    return report;
}

inline std::string write_cv_csv(const CVReport& report) {
    std::ostringstream out;
    out << "fold,r2,rmse_dbm,mae_dbm,n\n";
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
        const Metrics& m = report.folds[f];
        out << (f + 1) << ',' << format_double(m.r2 ? *m.r2 : std::nan("")) << ','
            << format_double(m.rmse_dbm) << ',' << format_double(m.mae_dbm) << ',' << m.n << '\n';
    }
    return out.str();
}

inline std::string write_residuals_csv(const CVReport& report) {
    std::ostringstream out;
    out << "point_id,residual_dbm\n";
    for (const auto& [id, r] : report.pooled.residuals)
        out << id << ',' << format_double(r) << '\n';
    return out.str();
}

inline std::vector<std::pair<std::uint64_t, double>> read_residuals_csv(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "point_id,residual_dbm")
        throw ParseError("residuals CSV header must be point_id,residual_dbm");
    std::vector<std::pair<std::uint64_t, double>> out;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto fields = split_csv_line(lines[ln]);
        if (fields.size() != 2) throw ParseError(ln + 1, "wrong field count in residuals CSV");
        out.emplace_back(parse_u64(fields[0]), parse_double(fields[1]));
    }
    return out;
}

struct BenchmarkRow {
    std::string sampler;  // "maxmin" | "random"
    std::uint64_t seed = 0;
    std::optional<double> r2;
    double rmse_dbm = 0.0;
    double d_min = 0.0;  // sampling-stage minimum pairwise distance
};

struct SamplerStats {
    double mean_r2 = 0.0, std_r2 = 0.0;
    double mean_rmse = 0.0, std_rmse = 0.0;
    double mean_d_min = 0.0;
    std::size_t runs = 0;
};

/// For each seed and each sampler: sample n = ceil(fraction * size) grid
/// points, simulate them, train, and evaluate on the complement (training
/// metrics when the complement is empty at fraction 1). The MaxMin row's
/// d_min is the optimizer's continuous-stage value; the random row's is
/// its grid set's. Deterministic per seed.
inline std::vector<BenchmarkRow> benchmark_samplers(const DesignSpace& space, SimBackend& backend,
                                                    double fraction,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    const SamplerConfig& sampler_base = {},
                                                    const BoostConfig& boost = {}) {
    if (!(fraction > 0.0) || fraction > 1.0) throw Error("fraction must be in (0, 1]");
    auto n = static_cast<std::uint64_t>(
        std::ceil(fraction * static_cast<double>(space.size())));
    n = std::max<std::uint64_t>(n, std::min<std::uint64_t>(space.size(), space.dims() + 1));
    n = std::min(n, space.size());

    std::vector<BenchmarkRow> rows;
    for (std::uint64_t seed : seeds) {
        for (const char* which : {"maxmin", "random"}) {
            BenchmarkRow row;
            row.sampler = which;
            row.seed = seed;
            SampleSet snapped;
            if (row.sampler == "maxmin") {
                SamplerConfig cfg = sampler_base;
                cfg.seed = seed;
                SampleSet opt = maxmin_optimize(lhs_initial(n, space.dims(), seed), cfg, &space);
                row.d_min = opt.d_min;
                snapped = snap_to_grid(opt, space, seed, cfg.categorical_mismatch_weight);
            } else {
                snapped = random_sample(space, n, seed, sampler_base.categorical_mismatch_weight);
                row.d_min = snapped.d_min;
            }
            auto results = simulate_batch(backend, space, snapped.grid_ids);
            Dataset train = build_features(space, results).dataset;
            BoostConfig bc = boost;
            bc.seed = seed;
            BoostedModel model = fit(train, bc);

            std::vector<bool> sampled(space.size(), false);
            for (std::uint64_t id : snapped.grid_ids) sampled[id] = true;
            std::vector<std::uint64_t> test_ids;
            for (std::uint64_t id = 0; id < space.size(); ++id)
                if (!sampled[id]) test_ids.push_back(id);
            FeaturePlan plan(space);
            std::vector<double> truth, pred;
            if (test_ids.empty()) {
                for (const DatasetRow& r : train.rows) {
                    truth.push_back(r.target);
                    pred.push_back(model.predict(r.features));
                }
                Metrics m = compute_metrics(truth, pred);
                row.r2 = m.r2;
                row.rmse_dbm = m.rmse_dbm;
            } else {
                auto test_results = simulate_batch(backend, space, test_ids);
                for (const SimulationResult& r : test_results) {
                    truth.push_back(r.p2db_dbm);
                    pred.push_back(model.predict(plan.row(space, r.point_id)));
                }
                Metrics m = compute_metrics(truth, pred);
                row.r2 = m.r2;
                row.rmse_dbm = m.rmse_dbm;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

/// Per-sampler mean and population standard deviation of R2 and RMSE.
inline std::map<std::string, SamplerStats> summarize_benchmark(const std::vector<BenchmarkRow>& rows) {
    std::map<std::string, SamplerStats> out;
    std::map<std::string, std::vector<const BenchmarkRow*>> by_sampler;
    for (const BenchmarkRow& r : rows) by_sampler[r.sampler].push_back(&r);
    for (auto& [name, group] : by_sampler) {
        SamplerStats s;
        s.runs = group.size();
        auto n = static_cast<double>(group.size());
        for (const BenchmarkRow* r : group) {
            s.mean_r2 += r->r2.value_or(0.0);
            s.mean_rmse += r->rmse_dbm;
            s.mean_d_min += r->d_min;
        }
        s.mean_r2 /= n;
        s.mean_rmse /= n;
        s.mean_d_min /= n;
        for (const BenchmarkRow* r : group) {
            double dr = r->r2.value_or(0.0) - s.mean_r2;
            double dm = r->rmse_dbm - s.mean_rmse;
            s.std_r2 += dr * dr;
            s.std_rmse += dm * dm;
        }
        s.std_r2 = std::sqrt(s.std_r2 / n);
        s.std_rmse = std::sqrt(s.std_rmse / n);
        out[name] = s;
    }
    return out;
}

inline std::string write_benchmark_csv(const std::vector<BenchmarkRow>& rows) {
    std::ostringstream out;
    out << "sampler,seed,r2,rmse_dbm\n";
    for (const BenchmarkRow& r : rows)
        out << r.sampler << ',' << r.seed << ',' << format_double(r.r2 ? *r.r2 : std::nan(""))
            << ',' << format_double(r.rmse_dbm) << '\n';
    return out.str();
}

}  // namespace paforge
