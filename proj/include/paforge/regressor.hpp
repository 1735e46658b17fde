#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "paforge/csv.hpp"
#include "paforge/error.hpp"
#include "paforge/features.hpp"

namespace paforge {

struct BoostConfig {
    int iterations = 100;
    int depth = 2;
    double learning_rate = 0.5;
    double l2_leaf_reg = 2.0;
    int max_threshold_candidates = 32;
    std::uint64_t seed = 0;  // reserved; split ties break deterministically

    void validate() const {
        if (iterations < 1) throw Error("iterations must be >= 1");
        if (depth < 1) throw Error("depth must be >= 1");
        if (!(learning_rate > 0)) throw Error("learning_rate must be > 0");
        if (l2_leaf_reg < 0) throw Error("l2_leaf_reg must be >= 0");
        if (max_threshold_candidates < 1) throw Error("max_threshold_candidates must be >= 1");
    }
};

/// One split per level shared by every node at that level. A sample's leaf
/// index is built most-significant-bit first: bit_k = [x[feature_k] >
/// threshold_k] for level k.
struct ObliviousTree {
    std::vector<std::size_t> split_features;  // depth entries
    std::vector<double> split_thresholds;     // depth entries
    std::vector<double> leaf_values;          // 2^depth entries

    std::size_t depth() const { return split_features.size(); }

    std::size_t leaf_index(const std::vector<double>& x) const {
        std::size_t leaf = 0;
        for (std::size_t k = 0; k < split_features.size(); ++k)
            leaf = (leaf << 1) | static_cast<std::size_t>(x[split_features[k]] > split_thresholds[k]);
        return leaf;
    }

    double value(const std::vector<double>& x) const { return leaf_values[leaf_index(x)]; }
};

struct BoostedModel {
    double baseline = 0.0;
    std::vector<ObliviousTree> trees;
    BoostConfig config;
    FeatureSchema schema;
    std::vector<double> importances;   // normalized split-gain shares
    std::vector<double> rmse_curve;    // training RMSE after each iteration (not serialized)

    double predict(const std::vector<double>& x) const {
        if (x.size() != schema.arity()) throw Error("feature vector arity does not match model");
        double acc = 0.0;
        for (const ObliviousTree& t : trees) acc += t.value(x);
        return baseline + config.learning_rate * acc;
    }

    std::vector<double> predict(const std::vector<std::vector<double>>& rows) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& x : rows) out.push_back(predict(x));
        return out;
    }
};

namespace detail {

/// Regularized contribution of one leaf to the split score: with
/// v = s/(n + λ), SSE(leaf) = q − g(n, s), so maximizing Σ g over leaves
/// minimizes total SSE (Σ q is partition-invariant).
inline double leaf_gain(double n, double s, double l2) {
    if (n <= 0) return 0.0;
    double denom = n + l2;
    return s * s * (n + 2.0 * l2) / (denom * denom);
}

/// Split candidates for one feature: midpoints between adjacent distinct
/// sorted training values, thinned to at most `cap` at evenly spaced rank
/// positions when there are more.
inline std::vector<double> threshold_candidates(std::vector<double> values, int cap) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> mids;
    mids.reserve(values.size());
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        mids.push_back(values[i] + (values[i + 1] - values[i]) / 2.0);
    auto m = mids.size();
    if (m <= static_cast<std::size_t>(cap)) return mids;
    std::vector<double> picked;
    picked.reserve(cap);
    for (int q = 0; q < cap; ++q)
        picked.push_back(mids[(static_cast<std::size_t>(q) + 1) * m / (static_cast<std::size_t>(cap) + 1)]);
    return picked;
}

}  // namespace detail

struct TreeFit {
    ObliviousTree tree;
    std::vector<double> level_gains;  // SSE reduction per level, clamped at 0
};

/// Greedy level-by-level oblivious fit. Every level scans all (feature,
/// threshold) candidates; the score of a candidate is the summed leaf gain
/// over the partition it induces across ALL current leaves at once. Ties
/// break toward the lowest feature index, then the lowest threshold. A
/// level whose best candidate brings no positive gain still splits, so the
/// tree always has 2^depth leaves.
inline TreeFit fit_oblivious_tree(const std::vector<std::vector<double>>& rows,
                                  const std::vector<double>& residuals, const BoostConfig& config,
                                  const std::vector<std::vector<double>>* candidate_cache = nullptr,
                                  const std::vector<std::vector<std::uint16_t>>* bin_cache = nullptr) {
    config.validate();
    const std::size_t n = rows.size();
    if (n == 0 || residuals.size() != n)
        throw Error("fit_oblivious_tree requires matching non-empty rows and residuals");
    const std::size_t arity = rows[0].size();
    if (arity == 0) throw Error("fit_oblivious_tree requires at least one feature");

    // Per-feature candidate thresholds and per-sample bin indices: bin b
    // means the value exceeds thresholds 0..b-1 only, so a sample goes
    // right of candidate c exactly when bin > c.
    std::vector<std::vector<double>> local_cands;
    std::vector<std::vector<std::uint16_t>> local_bins;
    const std::vector<std::vector<double>>* cands = candidate_cache;
    const std::vector<std::vector<std::uint16_t>>* bins = bin_cache;
    if (!cands || !bins) {
        local_cands.resize(arity);
        local_bins.resize(arity);
        std::vector<double> column(n);
        for (std::size_t f = 0; f < arity; ++f) {
            for (std::size_t i = 0; i < n; ++i) column[i] = rows[i][f];
            local_cands[f] = detail::threshold_candidates(column, config.max_threshold_candidates);
            local_bins[f].resize(n);
            const auto& th = local_cands[f];
            for (std::size_t i = 0; i < n; ++i)
                local_bins[f][i] = static_cast<std::uint16_t>(
                    std::lower_bound(th.begin(), th.end(), rows[i][f]) - th.begin());
        }
        cands = &local_cands;
        bins = &local_bins;
    }

    TreeFit out;
    std::vector<std::size_t> leaf_of(n, 0);
    for (int level = 0; level < config.depth; ++level) {
        const std::size_t n_leaves = std::size_t{1} << level;

        double parent_gain = 0.0;
        {
            std::vector<double> ln(n_leaves, 0.0), ls(n_leaves, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                ln[leaf_of[i]] += 1.0;
                ls[leaf_of[i]] += residuals[i];
            }
            for (std::size_t l = 0; l < n_leaves; ++l)
                parent_gain += detail::leaf_gain(ln[l], ls[l], config.l2_leaf_reg);
        }

        double best_score = -std::numeric_limits<double>::infinity();
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        bool found = false;
        std::vector<double> hist_n, hist_s;
        for (std::size_t f = 0; f < arity; ++f) {
            const auto& th = (*cands)[f];
            if (th.empty()) continue;
            const std::size_t n_bins = th.size() + 1;
            hist_n.assign(n_leaves * n_bins, 0.0);
            hist_s.assign(n_leaves * n_bins, 0.0);
            const auto& fb = (*bins)[f];
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t cell = leaf_of[i] * n_bins + fb[i];
                hist_n[cell] += 1.0;
                hist_s[cell] += residuals[i];
            }
            for (std::size_t c = 0; c < th.size(); ++c) {
                double score = 0.0;
                for (std::size_t l = 0; l < n_leaves; ++l) {
                    double left_n = 0.0, left_s = 0.0, tot_n = 0.0, tot_s = 0.0;
                    const double* hn = hist_n.data() + l * n_bins;
                    const double* hs = hist_s.data() + l * n_bins;
                    for (std::size_t b = 0; b < n_bins; ++b) {
                        tot_n += hn[b];
                        tot_s += hs[b];
                        if (b <= c) {
                            left_n += hn[b];
                            left_s += hs[b];
                        }
                    }
                    score += detail::leaf_gain(left_n, left_s, config.l2_leaf_reg) +
                             detail::leaf_gain(tot_n - left_n, tot_s - left_s, config.l2_leaf_reg);
                }
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = th[c];
                    found = true;
                }
            }
        }
        if (!found) {
            // Every feature is constant: any split routes all samples the
            // same way, so pin one that sends everything left.
            best_feature = 0;
            best_threshold = rows[0][0];
            best_score = parent_gain;
        }

        out.tree.split_features.push_back(best_feature);
        out.tree.split_thresholds.push_back(best_threshold);
        out.level_gains.push_back(std::max(0.0, best_score - parent_gain));
        for (std::size_t i = 0; i < n; ++i)
            leaf_of[i] = (leaf_of[i] << 1) |
                         static_cast<std::size_t>(rows[i][best_feature] > best_threshold);
    }

    const std::size_t n_leaves = std::size_t{1} << config.depth;
    std::vector<double> ln(n_leaves, 0.0), ls(n_leaves, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        ln[leaf_of[i]] += 1.0;
        ls[leaf_of[i]] += residuals[i];
    }
    out.tree.leaf_values.resize(n_leaves);
    for (std::size_t l = 0; l < n_leaves; ++l)
        out.tree.leaf_values[l] = (ln[l] > 0) ? ls[l] / (ln[l] + config.l2_leaf_reg) : 0.0;
    return out;
}

/// Plain gradient boosting on full-batch residuals: F₀ = mean target, each
/// iteration fits one oblivious tree to rᵢ = yᵢ − Fᵢ and advances
/// Fᵢ += learning_rate · tree(xᵢ). Deterministic.
inline BoostedModel fit(const Dataset& dataset, const BoostConfig& config) {
    config.validate();
    const std::size_t n = dataset.rows.size();
    if (n == 0) throw Error("fit requires a non-empty dataset");
    for (const DatasetRow& row : dataset.rows) {
        if (!std::isfinite(row.target)) throw Error("fit requires finite targets");
        if (row.features.size() != dataset.schema.arity())
            throw Error("dataset row arity does not match schema");
    }

    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    std::vector<double> y;
    y.reserve(n);
    for (const DatasetRow& row : dataset.rows) {
        rows.push_back(row.features);
        y.push_back(row.target);
    }

    BoostedModel model;
    model.config = config;
    model.schema = dataset.schema;
    // Mean computed around y[0] so a constant target reproduces exactly.
    double shift = 0.0;
    for (double v : y) shift += v - y[0];
    model.baseline = y[0] + shift / static_cast<double>(n);

    const std::size_t arity = dataset.schema.arity();
    std::vector<std::vector<double>> cand_cache(arity);
    std::vector<std::vector<std::uint16_t>> bin_cache(arity);
    {
        std::vector<double> column(n);
        for (std::size_t f = 0; f < arity; ++f) {
            for (std::size_t i = 0; i < n; ++i) column[i] = rows[i][f];
            cand_cache[f] = detail::threshold_candidates(column, config.max_threshold_candidates);
            bin_cache[f].resize(n);
            const auto& th = cand_cache[f];
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t b = 0;
                while (b < th.size() && rows[i][f] > th[b]) ++b;
                bin_cache[f][i] = static_cast<std::uint16_t>(b);
            }
        }
    }

    std::vector<double> current(n, model.baseline);
    std::vector<double> residuals(n);
    std::vector<double> raw_importance(arity, 0.0);
    model.rmse_curve.reserve(config.iterations);
    for (int it = 0; it < config.iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) residuals[i] = y[i] - current[i];
        TreeFit tf = fit_oblivious_tree(rows, residuals, config, &cand_cache, &bin_cache);
        for (std::size_t k = 0; k < tf.tree.depth(); ++k)
            raw_importance[tf.tree.split_features[k]] += config.learning_rate * tf.level_gains[k];
        for (std::size_t i = 0; i < n; ++i)
            current[i] += config.learning_rate * tf.tree.value(rows[i]);
        model.trees.push_back(std::move(tf.tree));
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = y[i] - current[i];
            sse += e * e;
        }
        model.rmse_curve.push_back(std::sqrt(sse / static_cast<double>(n)));
    }

    double total = 0.0;
    for (double v : raw_importance) total += v;
    model.importances.assign(arity, 0.0);
    if (total > 0)
        for (std::size_t f = 0; f < arity; ++f) model.importances[f] = raw_importance[f] / total;
    return model;
}

inline const std::vector<double>& feature_importance(const BoostedModel& model) {
    return model.importances;
}

/// Versioned line-oriented text encoding; floats use round-trip-exact
/// shortest form. Layout:
///   paforge-model v1
///   schema <arity> <name...>
///   nominal_temp <v>
///   config iterations=<n> depth=<n> learning_rate=<v> l2_leaf_reg=<v> max_threshold_candidates=<n> seed=<n>
///   baseline <v>
///   importances <arity> <v...>
///   trees <count>
///   tree <depth> <feature> <threshold> ... <leaf values...>
inline std::string save_model(const BoostedModel& model) {
    std::ostringstream out;
    out << "paforge-model v1\n";
    out << "schema " << model.schema.arity();
    for (const std::string& name : model.schema.names) out << ' ' << name;
    out << '\n';
    out << "nominal_temp " << format_double(model.schema.nominal_temp) << '\n';
    out << "config iterations=" << model.config.iterations << " depth=" << model.config.depth
        << " learning_rate=" << format_double(model.config.learning_rate)
        << " l2_leaf_reg=" << format_double(model.config.l2_leaf_reg)
        << " max_threshold_candidates=" << model.config.max_threshold_candidates
        << " seed=" << model.config.seed << '\n';
    out << "baseline " << format_double(model.baseline) << '\n';
    out << "importances " << model.importances.size();
    for (double v : model.importances) out << ' ' << format_double(v);
    out << '\n';
    out << "trees " << model.trees.size() << '\n';
    for (const ObliviousTree& t : model.trees) {
        out << "tree " << t.depth();
        for (std::size_t k = 0; k < t.depth(); ++k)
            out << ' ' << t.split_features[k] << ' ' << format_double(t.split_thresholds[k]);
        for (double v : t.leaf_values) out << ' ' << format_double(v);
        out << '\n';
    }
    return out.str();
}

namespace detail {

inline std::vector<std::string> expect_line(const std::vector<std::string_view>& lines,
                                            std::size_t idx, const std::string& keyword) {
    if (idx >= lines.size()) throw ParseError("model file truncated: missing " + keyword);
    std::istringstream in{std::string(lines[idx])};
    std::vector<std::string> tokens;
    std::string t;
    while (in >> t) tokens.push_back(t);
    if (tokens.empty() || tokens[0] != keyword)
        throw ParseError(idx + 1, "expected '" + keyword + "' line");
    return tokens;
}

}  // namespace detail

inline BoostedModel load_model(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "paforge-model v1")
        throw ParseError("unsupported model file (expected 'paforge-model v1' header)");
    BoostedModel model;

    auto schema = detail::expect_line(lines, 1, "schema");
    if (schema.size() < 2) throw ParseError(2, "schema line needs an arity");
    std::size_t arity = parse_u64(schema[1]);
    if (schema.size() != arity + 2) throw ParseError(2, "schema arity does not match name count");
    model.schema.names.assign(schema.begin() + 2, schema.end());

    auto nominal = detail::expect_line(lines, 2, "nominal_temp");
    if (nominal.size() != 2) throw ParseError(3, "malformed nominal_temp line");
    model.schema.nominal_temp = parse_double(nominal[1]);

    auto config = detail::expect_line(lines, 3, "config");
    for (std::size_t i = 1; i < config.size(); ++i) {
        auto eq = config[i].find('=');
        if (eq == std::string::npos) throw ParseError(4, "malformed config entry " + config[i]);
        std::string key = config[i].substr(0, eq), value = config[i].substr(eq + 1);
        if (key == "iterations") model.config.iterations = static_cast<int>(parse_u64(value));
        else if (key == "depth") model.config.depth = static_cast<int>(parse_u64(value));
        else if (key == "learning_rate") model.config.learning_rate = parse_double(value);
        else if (key == "l2_leaf_reg") model.config.l2_leaf_reg = parse_double(value);
        else if (key == "max_threshold_candidates")
            model.config.max_threshold_candidates = static_cast<int>(parse_u64(value));
        else if (key == "seed") model.config.seed = parse_u64(value);
        else throw ParseError(4, "unknown config key " + key);
    }

    auto baseline = detail::expect_line(lines, 4, "baseline");
    if (baseline.size() != 2) throw ParseError(5, "malformed baseline line");
    model.baseline = parse_double(baseline[1]);

    auto importances = detail::expect_line(lines, 5, "importances");
    if (importances.size() < 2) throw ParseError(6, "importances line needs a count");
    std::size_t n_imp = parse_u64(importances[1]);
    if (importances.size() != n_imp + 2 || n_imp != arity)
        throw ParseError(6, "importances count does not match schema arity");
    for (std::size_t i = 0; i < n_imp; ++i)
        model.importances.push_back(parse_double(importances[i + 2]));

    auto trees = detail::expect_line(lines, 6, "trees");
    if (trees.size() != 2) throw ParseError(7, "malformed trees line");
    std::size_t n_trees = parse_u64(trees[1]);
    for (std::size_t t = 0; t < n_trees; ++t) {
        auto tokens = detail::expect_line(lines, 7 + t, "tree");
        if (tokens.size() < 2) throw ParseError(8 + t, "tree line needs a depth");
        std::size_t depth = parse_u64(tokens[1]);
        std::size_t n_leaves = std::size_t{1} << depth;
        if (tokens.size() != 2 + 2 * depth + n_leaves)
            throw ParseError(8 + t, "tree line has wrong token count");
        ObliviousTree tree;
        for (std::size_t k = 0; k < depth; ++k) {
            std::size_t f = parse_u64(tokens[2 + 2 * k]);
            if (f >= arity) throw ParseError(8 + t, "tree split feature out of range");
            tree.split_features.push_back(f);
            tree.split_thresholds.push_back(parse_double(tokens[3 + 2 * k]));
        }
        for (std::size_t l = 0; l < n_leaves; ++l) {
            double v = parse_double(tokens[2 + 2 * depth + l]);
            if (!std::isfinite(v)) throw ParseError(8 + t, "non-finite leaf value");
            tree.leaf_values.push_back(v);
        }
        model.trees.push_back(std::move(tree));
    }
    if (7 + n_trees < lines.size()) {
        for (std::size_t ln = 7 + n_trees; ln < lines.size(); ++ln)
            if (!lines[ln].empty()) throw ParseError(ln + 1, "trailing content after trees");
    }
    return model;
}

}  // namespace paforge
