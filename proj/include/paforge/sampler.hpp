#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "paforge/csv.hpp"
#include "paforge/design_space.hpp"
#include "paforge/error.hpp"
#include "paforge/rng.hpp"

namespace paforge {

struct SamplerConfig {
    double fraction = 0.35;                    // sample fraction of the full grid
    int max_sweeps = 100;                      // swap-search sweep limit
    int patience = 5;                          // stale sweeps before restart/stop
    std::uint64_t seed = 0;
    double categorical_mismatch_weight = 1.0;  // added inside the sqrt per mismatching categorical dim

    void validate() const {
        if (!(fraction > 0.0) || fraction > 1.0) throw Error("fraction must be in (0, 1]");
        if (max_sweeps < 1) throw Error("max_sweeps must be >= 1");
        if (patience < 1) throw Error("patience must be >= 1");
    }
};

/// A set of n normalized points in [0,1]^d. grid_ids is populated after
/// snapping; d_min is the minimum pairwise distance among the points
/// under the metric the producing operation used.
struct SampleSet {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> coords;  // n*d, row-major
    std::vector<std::uint64_t> grid_ids;
    double d_min = 0.0;
    std::uint64_t seed = 0;

    double* point(std::size_t i) { return coords.data() + i * d; }
    const double* point(std::size_t i) const { return coords.data() + i * d; }
};

/// Distance semantics per dimension: grid dimensions contribute squared
/// coordinate differences; categorical dimensions contribute a fixed
/// mismatch weight whenever the two coordinates fall in different strata.
class DistanceGeometry {
public:
    static DistanceGeometry euclidean(std::size_t dims) {
        DistanceGeometry g;
        g.cat_levels_.assign(dims, 0);
        return g;
    }

    static DistanceGeometry for_space(const DesignSpace& space, double weight) {
        DistanceGeometry g;
        g.weight_ = weight;
        g.cat_levels_.reserve(space.dims());
        for (const Parameter& p : space.parameters())
            g.cat_levels_.push_back(p.is_categorical() ? p.level_count() : 0);
        return g;
    }

    std::size_t dims() const { return cat_levels_.size(); }
    std::size_t cat_levels(std::size_t k) const { return cat_levels_[k]; }
    double weight() const { return weight_; }

    double pair_dist2(const double* a, const double* b) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < cat_levels_.size(); ++k) {
            std::size_t levels = cat_levels_[k];
            if (levels == 0) {
                double diff = a[k] - b[k];
                acc += diff * diff;
            } else if (stratum(a[k], levels) != stratum(b[k], levels)) {
                acc += weight_;
            }
        }
        return acc;
    }

    static std::size_t stratum(double u, std::size_t levels) {
        if (u <= 0.0) return 0;
        auto idx = static_cast<std::size_t>(u * static_cast<double>(levels));
        return std::min(idx, levels - 1);
    }

private:
    std::vector<std::size_t> cat_levels_;
    double weight_ = 1.0;
};

inline double min_pairwise_dist2(const SampleSet& s, const DistanceGeometry& geom) {
    if (s.n < 2) throw Error("min_pairwise_distance requires at least 2 points");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = i + 1; j < s.n; ++j)
            best = std::min(best, geom.pair_dist2(s.point(i), s.point(j)));
    return best;
}

inline double min_pairwise_distance(const SampleSet& s, const DesignSpace& space, double weight = 1.0) {
    return std::sqrt(min_pairwise_dist2(s, DistanceGeometry::for_space(space, weight)));
}

inline double min_pairwise_distance(const SampleSet& s) {
    return std::sqrt(min_pairwise_dist2(s, DistanceGeometry::euclidean(s.d)));
}

/// Latin Hypercube start: every dimension's n coordinates are a seeded
/// random permutation of the stratum centers (k + 0.5) / n.
inline SampleSet lhs_initial(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n < 1 || d < 1) throw Error("lhs_initial requires n >= 1 and d >= 1");
    SampleSet s;
    s.n = n;
    s.d = d;
    s.seed = seed;
    s.coords.resize(n * d);
    Rng rng(seed);
    for (std::size_t k = 0; k < d; ++k) {
        auto perm = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i)
            s.coords[i * d + k] = (static_cast<double>(perm[i]) + 0.5) / static_cast<double>(n);
    }
    s.d_min = (n >= 2) ? std::sqrt(min_pairwise_dist2(s, DistanceGeometry::euclidean(d))) : 0.0;
    return s;
}

inline bool has_latin_property(const SampleSet& s) {
    std::vector<double> col(s.n);
    for (std::size_t k = 0; k < s.d; ++k) {
        for (std::size_t i = 0; i < s.n; ++i) col[i] = s.coords[i * s.d + k];
        std::sort(col.begin(), col.end());
        for (std::size_t i = 0; i < s.n; ++i)
            if (col[i] != (static_cast<double>(i) + 0.5) / static_cast<double>(s.n)) return false;
    }
    return true;
}

namespace detail {

/// Swap-search state on integer strata. Latin coordinates are stratum
/// centers (s + 0.5) / n, so n^2 * dist2 decomposes into an exact integer
/// grid part plus a categorical mismatch count:
///   n^2 * dist2(i, j) = sum_grid (s_ik - s_jk)^2 + count_ij * weight * n^2.
/// All bookkeeping runs on (grid part, count) pairs, which makes swap
/// deltas and equality tests against the minimum exact, and keeps the
/// inner loops in integer arithmetic.
class MaxminState {
public:
    MaxminState(const std::vector<double>& coords, std::size_t n, std::size_t d,
                const DistanceGeometry& geom)
        : n_(n),
          d_(d),
          wn2_(geom.weight() * static_cast<double>(n) * static_cast<double>(n)),
          strata_(n * d),
          cols_(n * d),
          lut_(d),
          gp_(n * n, 0),
          cnt_(n * n, 0),
          val_(n * n, std::numeric_limits<double>::infinity()),
          row_min_(n, 0.0),
          crit_cnt_(n, 0) {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < d_; ++k) {
                auto s = static_cast<std::size_t>(coords[i * d_ + k] * static_cast<double>(n_));
                auto sv = static_cast<std::uint32_t>(std::min(s, n_ - 1));
                strata_[i * d_ + k] = sv;
                cols_[k * n_ + i] = sv;
            }
        // Per-dimension stratum -> categorical level tables, built with the
        // same double arithmetic pair_dist2 applies to the coordinates.
        for (std::size_t k = 0; k < d_; ++k) {
            std::size_t levels = geom.cat_levels(k);
            if (levels == 0) continue;
            lut_[k].resize(n_);
            for (std::size_t s = 0; s < n_; ++s) {
                double u = (static_cast<double>(s) + 0.5) / static_cast<double>(n_);
                lut_[k][s] = static_cast<std::uint16_t>(DistanceGeometry::stratum(u, levels));
            }
        }
        rebuild_pairs();
        rescan();
    }

    std::uint32_t stratum_at(std::size_t i, std::size_t k) const { return strata_[i * d_ + k]; }
    const std::vector<std::uint32_t>& strata() const { return strata_; }
    std::size_t critical_count() const { return crit_total_; }

    /// Minimum pairwise n^2 * dist2 over the current configuration.
    double dmin_value() const { return dmin_value_; }

    /// O(1) filter: a swap of i and j can raise d_min only if every pair
    /// at d_min has exactly one endpoint in {i, j}. The pair (i, j) itself
    /// is invariant under the swap, so it must not sit at d_min.
    bool can_raise(std::size_t i, std::size_t j) const {
        if (crit_cnt_[i] + crit_cnt_[j] != crit_total_) return false;
        return val_[i * n_ + j] != dmin_value_;
    }

    /// True if swapping dimension k between points i and j pushes every
    /// affected pair strictly above the current minimum (which then rises,
    /// because can_raise() guarantees all critical pairs are affected).
    bool evaluate(std::size_t i, std::size_t j, std::size_t k) const {
        const std::uint32_t su = strata_[i * d_ + k];
        const std::uint32_t sv = strata_[j * d_ + k];
        const std::uint32_t* col = cols_.data() + k * n_;
        const std::int64_t* gi = gp_.data() + i * n_;
        const std::int64_t* gj = gp_.data() + j * n_;
        const std::uint16_t* ci = cnt_.data() + i * n_;
        const std::uint16_t* cj = cnt_.data() + j * n_;
        if (lut_[k].empty()) {
            for (std::size_t m = 0; m < n_; ++m) {
                if (m == i || m == j) continue;
                auto sm = static_cast<std::int64_t>(col[m]);
                std::int64_t du = static_cast<std::int64_t>(su) - sm;
                std::int64_t dv = static_cast<std::int64_t>(sv) - sm;
                std::int64_t delta = dv * dv - du * du;  // point i moves su -> sv
                if (combine(gi[m] + delta, ci[m]) <= dmin_value_) return false;
                if (combine(gj[m] - delta, cj[m]) <= dmin_value_) return false;
            }
        } else {
            const std::uint16_t* lut = lut_[k].data();
            const std::uint16_t lu = lut[su];
            const std::uint16_t lv = lut[sv];
            if (lu == lv) return false;  // same level: no distance changes at all
            for (std::size_t m = 0; m < n_; ++m) {
                if (m == i || m == j) continue;
                std::uint16_t lm = lut[col[m]];
                int delta = (lv != lm) - (lu != lm);
                if (combine(gi[m], ci[m] + delta) <= dmin_value_) return false;
                if (combine(gj[m], cj[m] - delta) <= dmin_value_) return false;
            }
        }
        return true;
    }

    /// Commits a swap that evaluate() approved. Applies the same deltas
    /// evaluate() computed, then repairs the row minima: a row's minimum
    /// needs a rescan only when an entry that attained it just rose.
    void apply(std::size_t i, std::size_t j, std::size_t k) {
        const std::uint32_t su = strata_[i * d_ + k];
        const std::uint32_t sv = strata_[j * d_ + k];
        const std::uint32_t* col = cols_.data() + k * n_;
        const bool cat = !lut_[k].empty();
        const std::uint16_t* lut = cat ? lut_[k].data() : nullptr;
        const std::uint16_t lu = cat ? lut[su] : 0;
        const std::uint16_t lv = cat ? lut[sv] : 0;
        recheck_.clear();
        for (std::size_t m = 0; m < n_; ++m) {
            if (m == i || m == j) continue;
            std::int64_t gim = gp_[i * n_ + m];
            std::int64_t gjm = gp_[j * n_ + m];
            int cim = cnt_[i * n_ + m];
            int cjm = cnt_[j * n_ + m];
            if (cat) {
                int delta = (lv != lut[col[m]]) - (lu != lut[col[m]]);
                cim += delta;
                cjm -= delta;
            } else {
                auto sm = static_cast<std::int64_t>(col[m]);
                std::int64_t du = static_cast<std::int64_t>(su) - sm;
                std::int64_t dv = static_cast<std::int64_t>(sv) - sm;
                std::int64_t delta = dv * dv - du * du;
                gim += delta;
                gjm -= delta;
            }
            double vim = combine(gim, cim);
            double vjm = combine(gjm, cjm);
            bool held = (val_[m * n_ + i] == row_min_[m] && vim > row_min_[m]) ||
                        (val_[m * n_ + j] == row_min_[m] && vjm > row_min_[m]);
            gp_[i * n_ + m] = gim;
            gp_[m * n_ + i] = gim;
            gp_[j * n_ + m] = gjm;
            gp_[m * n_ + j] = gjm;
            cnt_[i * n_ + m] = static_cast<std::uint16_t>(cim);
            cnt_[m * n_ + i] = static_cast<std::uint16_t>(cim);
            cnt_[j * n_ + m] = static_cast<std::uint16_t>(cjm);
            cnt_[m * n_ + j] = static_cast<std::uint16_t>(cjm);
            val_[i * n_ + m] = vim;
            val_[m * n_ + i] = vim;
            val_[j * n_ + m] = vjm;
            val_[m * n_ + j] = vjm;
            double lo = std::min(vim, vjm);
            if (lo < row_min_[m])
                row_min_[m] = lo;
            else if (held)
                recheck_.push_back(m);
        }
        std::swap(strata_[i * d_ + k], strata_[j * d_ + k]);
        cols_[k * n_ + i] = strata_[i * d_ + k];
        cols_[k * n_ + j] = strata_[j * d_ + k];
        row_min_[i] = scan_row_min(i);
        row_min_[j] = scan_row_min(j);
        for (std::size_t m : recheck_) row_min_[m] = scan_row_min(m);
        refresh_minimum();
    }

    /// Re-randomizes every column (fresh Latin configuration) for a restart.
    void restart(Rng& rng) {
        std::vector<std::uint32_t> col(n_);
        for (std::size_t k = 0; k < d_; ++k) {
            for (std::size_t i = 0; i < n_; ++i) col[i] = strata_[i * d_ + k];
            rng.shuffle(col);
            for (std::size_t i = 0; i < n_; ++i) {
                strata_[i * d_ + k] = col[i];
                cols_[k * n_ + i] = col[i];
            }
        }
        rebuild_pairs();
        rescan();
    }

    /// Stratum centers for the given configuration, matching the
    /// initializer's coordinate formula bit for bit.
    std::vector<double> coords_of(const std::vector<std::uint32_t>& strata) const {
        std::vector<double> out(n_ * d_);
        for (std::size_t i = 0; i < n_ * d_; ++i)
            out[i] = (static_cast<double>(strata[i]) + 0.5) / static_cast<double>(n_);
        return out;
    }

private:
    double combine(std::int64_t gp, int cnt) const {
        return static_cast<double>(gp) + static_cast<double>(cnt) * wn2_;
    }

    void compute_pair(std::size_t i, std::size_t j, std::int64_t& gp, std::uint16_t& cnt) const {
        std::int64_t g = 0;
        unsigned c = 0;
        for (std::size_t k = 0; k < d_; ++k) {
            std::uint32_t a = strata_[i * d_ + k];
            std::uint32_t b = strata_[j * d_ + k];
            if (lut_[k].empty()) {
                std::int64_t diff = static_cast<std::int64_t>(a) - static_cast<std::int64_t>(b);
                g += diff * diff;
            } else {
                c += (lut_[k][a] != lut_[k][b]);
            }
        }
        gp = g;
        cnt = static_cast<std::uint16_t>(c);
    }

    double scan_row_min(std::size_t i) const {
        const double* row = val_.data() + i * n_;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < n_; ++m) best = std::min(best, row[m]);
        return best;
    }

    void rebuild_pairs() {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) {
                std::int64_t g;
                std::uint16_t c;
                compute_pair(i, j, g, c);
                gp_[i * n_ + j] = g;
                gp_[j * n_ + i] = g;
                cnt_[i * n_ + j] = c;
                cnt_[j * n_ + i] = c;
                double v = combine(g, c);
                val_[i * n_ + j] = v;
                val_[j * n_ + i] = v;
            }
    }

    /// Recomputes the global minimum and the per-point critical-pair
    /// counts from the row minima. Rows whose minimum sits above d_min
    /// carry no critical pairs, so only rows at d_min get counted.
    void refresh_minimum() {
        dmin_value_ = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_; ++i) dmin_value_ = std::min(dmin_value_, row_min_[i]);
        crit_total_ = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (row_min_[i] != dmin_value_) {
                crit_cnt_[i] = 0;
                continue;
            }
            const double* row = val_.data() + i * n_;
            std::uint32_t c = 0;
            for (std::size_t m = 0; m < n_; ++m) c += (row[m] == dmin_value_);
            crit_cnt_[i] = c;
            crit_total_ += c;
        }
        crit_total_ /= 2;  // each critical pair was counted from both rows
    }

    void rescan() {
        for (std::size_t i = 0; i < n_; ++i) row_min_[i] = scan_row_min(i);
        refresh_minimum();
    }

    std::size_t n_, d_;
    double wn2_;                           // categorical weight scaled by n^2
    std::vector<std::uint32_t> strata_;    // n x d, row-major
    std::vector<std::uint32_t> cols_;      // d x n, column-major mirror
    std::vector<std::vector<std::uint16_t>> lut_;  // stratum -> level, empty for grid dims
    std::vector<std::int64_t> gp_;         // n x n grid parts
    std::vector<std::uint16_t> cnt_;       // n x n categorical mismatch counts
    std::vector<double> val_;              // n x n combined values, +inf diagonal
    std::vector<double> row_min_;          // per row minimum of val_
    double dmin_value_ = 0.0;
    std::vector<std::uint32_t> crit_cnt_;  // per point: critical pairs through it
    std::size_t crit_total_ = 0;
    std::vector<std::size_t> recheck_;     // scratch: rows whose minimum may have risen
};

}  // namespace detail

/// Swap-search MaxMin optimization. Each sweep visits every (point pair,
/// dimension) candidate in seeded random order and accepts a swap exactly
/// when it strictly increases d_min. When `patience` consecutive sweeps
/// bring no increase the climb has converged; the columns are then
/// re-randomized and the climb restarts, within the overall max_sweeps
/// budget. Returns the best configuration seen across all climbs, so the
/// output d_min never falls below the input's. Deterministic for a fixed
/// seed. The observer, when set, is invoked with (d_min before, d_min
/// after) for every accepted swap; no single swap ever decreases d_min.
inline SampleSet maxmin_optimize(const SampleSet& init, const SamplerConfig& config,
                                 const DesignSpace* space = nullptr,
                                 const std::function<void(double, double)>& observer = {}) {
    config.validate();
    if (!has_latin_property(init))
        throw Error("maxmin_optimize input does not satisfy the Latin property");
    DistanceGeometry geom = space
                                ? DistanceGeometry::for_space(*space, config.categorical_mismatch_weight)
                                : DistanceGeometry::euclidean(init.d);
    if (space && space->dims() != init.d) throw Error("sample dimension does not match space");
    SampleSet out = init;
    out.seed = config.seed;
    if (init.n < 2) {
        out.d_min = 0.0;
        return out;
    }

    detail::MaxminState state(init.coords, init.n, init.d, geom);
    std::vector<std::uint32_t> best = state.strata();
    double best_value = state.dmin_value();
    const double inv_n = 1.0 / static_cast<double>(init.n);

    // Candidate encoding: i<<40 | j<<20 | k (n and d both < 2^20 at any
    // scale this optimizer is meant for).
    const auto n = static_cast<std::uint32_t>(init.n);
    const auto d = static_cast<std::uint32_t>(init.d);
    std::vector<std::uint64_t> candidates;
    candidates.reserve(static_cast<std::size_t>(n) * (n - 1) / 2 * d);
    for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = i + 1; j < n; ++j)
            for (std::uint64_t k = 0; k < d; ++k)
                candidates.push_back(i << 40 | j << 20 | k);

    Rng rng(config.seed ^ 0x4d584d4eull);  // stream tag keeps this independent of lhs_initial
    int stale = 0;
    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        rng.shuffle(candidates);
        bool raised_dmin = false;
        for (std::uint64_t cand : candidates) {
            auto i = static_cast<std::uint32_t>(cand >> 40);
            auto j = static_cast<std::uint32_t>((cand >> 20) & 0xfffff);
            auto k = static_cast<std::uint32_t>(cand & 0xfffff);
            if (state.stratum_at(i, k) == state.stratum_at(j, k)) continue;
            if (!state.can_raise(i, j)) continue;
            if (!state.evaluate(i, j, k)) continue;
            double before = state.dmin_value();
            state.apply(i, j, k);
            raised_dmin = true;
            if (state.dmin_value() > best_value) {
                best_value = state.dmin_value();
                best = state.strata();
            }
            if (observer)
                observer(std::sqrt(before) * inv_n, std::sqrt(state.dmin_value()) * inv_n);
        }
        if (raised_dmin) {
            stale = 0;
        } else if (++stale >= config.patience) {
            // No headroom for another climb near the sweep budget.
            if (sweep + config.patience >= config.max_sweeps) break;
            state.restart(rng);
            stale = 0;
        }
    }

    out.coords = state.coords_of(best);
    out.d_min = std::sqrt(min_pairwise_dist2(out, geom));
    return out;
}

/// Snaps each coordinate to the containing stratum of the parameter's
/// level grid (equivalently the nearest stratum center). Samples that
/// collide on a grid point are reassigned greedily to the unused grid
/// point with the largest minimum distance to the kept set, ties broken
/// by lowest point_id. Output ids are distinct, sorted ascending.
/// The seed parameter is reserved; the current policy is deterministic.
inline SampleSet snap_to_grid(const SampleSet& samples, const DesignSpace& space,
                              std::uint64_t /*seed*/ = 0, double categorical_weight = 1.0) {
    if (samples.d != space.dims()) throw Error("sample dimension does not match space");
    if (samples.n > space.size())
        throw Error("sample count " + std::to_string(samples.n) + " exceeds space size " +
                    std::to_string(space.size()));
    DistanceGeometry geom = DistanceGeometry::for_space(space, categorical_weight);

    std::set<std::uint64_t> used;
    std::vector<std::uint64_t> kept;
    std::size_t collisions = 0;
    std::vector<std::size_t> idx(space.dims());
    for (std::size_t s = 0; s < samples.n; ++s) {
        const double* p = samples.point(s);
        for (std::size_t k = 0; k < space.dims(); ++k) idx[k] = space.level_from_unit(k, p[k]);
        std::uint64_t id = space.encode(idx);
        if (used.insert(id).second)
            kept.push_back(id);
        else
            ++collisions;
    }

    auto center_of = [&](std::uint64_t id) { return space.normalize(space.decode(id)); };

    if (collisions > 0) {
        std::vector<std::uint64_t> unused;
        unused.reserve(space.size() - used.size());
        for (std::uint64_t id = 0; id < space.size(); ++id)
            if (!used.count(id)) unused.push_back(id);

        std::vector<std::vector<double>> kept_pts;
        kept_pts.reserve(kept.size());
        for (std::uint64_t id : kept) kept_pts.push_back(center_of(id));

        std::vector<double> min_d2(unused.size(), std::numeric_limits<double>::infinity());
        std::vector<std::vector<double>> unused_pts(unused.size());
        for (std::size_t u = 0; u < unused.size(); ++u) {
            unused_pts[u] = center_of(unused[u]);
            for (const auto& kp : kept_pts)
                min_d2[u] = std::min(min_d2[u], geom.pair_dist2(unused_pts[u].data(), kp.data()));
        }
        std::vector<bool> taken(unused.size(), false);
        for (std::size_t c = 0; c < collisions; ++c) {
            std::size_t pick = unused.size();
            for (std::size_t u = 0; u < unused.size(); ++u) {
                if (taken[u]) continue;
                if (pick == unused.size() || min_d2[u] > min_d2[pick]) pick = u;  // ties keep lowest id
            }
            taken[pick] = true;
            kept.push_back(unused[pick]);
            for (std::size_t u = 0; u < unused.size(); ++u) {
                if (taken[u]) continue;
                min_d2[u] = std::min(min_d2[u],
                                     geom.pair_dist2(unused_pts[u].data(), unused_pts[pick].data()));
            }
        }
    }

    std::sort(kept.begin(), kept.end());
    SampleSet out;
    out.n = samples.n;
    out.d = space.dims();
    out.seed = samples.seed;
    out.grid_ids = kept;
    out.coords.resize(out.n * out.d);
    for (std::size_t i = 0; i < out.n; ++i) {
        auto x = center_of(kept[i]);
        std::copy(x.begin(), x.end(), out.point(i));
    }
    out.d_min = (out.n >= 2) ? std::sqrt(min_pairwise_dist2(out, geom)) : 0.0;
    return out;
}

/// n distinct grid points drawn uniformly without replacement (Floyd's
/// algorithm); the random-sampling baseline for benchmarking.
inline SampleSet random_sample(const DesignSpace& space, std::size_t n, std::uint64_t seed,
                               double categorical_weight = 1.0) {
    if (n > space.size())
        throw Error("sample count " + std::to_string(n) + " exceeds space size " +
                    std::to_string(space.size()));
    Rng rng(seed ^ 0x524e4453ull);
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = space.size() - n; j < space.size(); ++j) {
        std::uint64_t t = rng.below(j + 1);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    SampleSet out;
    out.n = n;
    out.d = space.dims();
    out.seed = seed;
    out.grid_ids.assign(chosen.begin(), chosen.end());
    out.coords.resize(n * out.d);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = space.normalize(space.decode(out.grid_ids[i]));
        std::copy(x.begin(), x.end(), out.point(i));
    }
    out.d_min = (n >= 2)
                    ? std::sqrt(min_pairwise_dist2(out, DistanceGeometry::for_space(space, categorical_weight)))
                    : 0.0;
    return out;
}

/// Sample CSV: header `point_id,<param names...>`, one row per grid point.
inline std::string write_sample_csv(const DesignSpace& space, const SampleSet& set) {
    if (set.grid_ids.size() != set.n) throw Error("sample set has no grid ids (snap it first)");
    std::ostringstream out;
    out << "point_id";
    for (const Parameter& p : space.parameters()) out << ',' << p.name;
    out << '\n';
    for (std::uint64_t id : set.grid_ids) {
        out << id;
        auto idx = space.decode(id);
        for (std::size_t k = 0; k < space.dims(); ++k)
            out << ',' << space.parameters()[k].level_text(idx[k]);
        out << '\n';
    }
    return out.str();
}

inline std::vector<std::uint64_t> read_sample_csv(const DesignSpace& space, std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty()) throw ParseError("empty sample CSV");
    auto header = split_csv_line(lines[0]);
    if (header.size() != space.dims() + 1 || header[0] != "point_id")
        throw ParseError(1, "sample CSV header does not match the design space");
    for (std::size_t k = 0; k < space.dims(); ++k)
        if (header[k + 1] != space.parameters()[k].name)
            throw ParseError(1, "sample CSV header column '" + std::string(header[k + 1]) +
                                    "' does not match parameter '" + space.parameters()[k].name + "'");
    std::vector<std::uint64_t> ids;
    std::set<std::uint64_t> seen;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto fields = split_csv_line(lines[ln]);
        if (fields.size() != space.dims() + 1)
            throw ParseError(ln + 1, "wrong field count in sample CSV");
        std::uint64_t id = parse_u64(fields[0]);
        if (id >= space.size()) throw ParseError(ln + 1, "point_id out of range");
        auto idx = space.decode(id);
        for (std::size_t k = 0; k < space.dims(); ++k) {
            const Parameter& p = space.parameters()[k];
            if (p.is_categorical()) {
                if (fields[k + 1] != p.string_levels[idx[k]])
                    throw ParseError(ln + 1, "value does not match point_id for parameter '" + p.name + "'");
            } else if (parse_double(fields[k + 1]) != p.numeric_levels[idx[k]]) {
                throw ParseError(ln + 1, "value does not match point_id for parameter '" + p.name + "'");
            }
        }
        if (!seen.insert(id).second) throw ParseError(ln + 1, "duplicate point_id in sample CSV");
        ids.push_back(id);
    }
    return ids;
}

}  // namespace paforge
