#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "paforge/csv.hpp"
#include "paforge/design_space.hpp"
#include "paforge/error.hpp"
#include "paforge/features.hpp"
#include "paforge/regressor.hpp"
#include "paforge/validation.hpp"

namespace paforge {

struct TargetSpec {
    double target_p2db_dbm = 0.0;  // minimum acceptable P2dB
    double tolerance_dbm = 0.4;    // informational accuracy band half-width

    void validate() const {
        if (tolerance_dbm < 0) throw Error("tolerance_dbm must be >= 0");
    }
};

struct Prediction {
    std::uint64_t point_id = 0;
    double predicted_p2db_dbm = 0.0;
    bool simulated = false;  // point was in the training sample
};

/// One model prediction per grid point; points in simulated_ids are
/// flagged. The model's schema must match the space's derived features.
inline std::vector<Prediction> predict_full_space(const BoostedModel& model, const DesignSpace& space,
                                                  const std::vector<std::uint64_t>& simulated_ids = {}) {
    FeaturePlan plan(space);
    if (plan.schema().names != model.schema.names)
        throw Error("model schema does not match the design space's features");
    std::set<std::uint64_t> simulated(simulated_ids.begin(), simulated_ids.end());
    if (!simulated.empty() && *simulated.rbegin() >= space.size())
        throw Error("simulated point_id out of range");
    std::vector<Prediction> out;
    out.reserve(space.size());
    for (std::uint64_t id = 0; id < space.size(); ++id)
        out.push_back({id, model.predict(plan.row(space, id)), simulated.count(id) > 0});
    return out;
}

struct RankedRow {
    std::size_t rank = 0;
    std::uint64_t point_id = 0;
    double predicted_p2db_dbm = 0.0;
    double ci_low_dbm = 0.0;
    double ci_high_dbm = 0.0;
    double p_meet = 0.0;
    bool simulated = false;
};

struct RankedReport {
    TargetSpec spec;
    std::vector<RankedRow> rows;
    std::vector<std::string> warnings;
    std::string model_description;  // e.g. "paforge-model v1, 100 trees"
};

/// Ranks every prediction by its chance of meeting the target:
/// p_meet = fraction of pooled out-of-fold residuals r with yhat - r >=
/// target. Sort order is p_meet descending, predicted value descending,
/// point_id ascending. CI bounds are yhat + [q2.5, q97.5] of the residual
/// pool, widened to include yhat itself so ci_low <= yhat <= ci_high.
/// An empty residual pool degrades to p_meet in {0,1} with a warning.
inline RankedReport rank(const std::vector<Prediction>& predictions,
                         const std::vector<double>& residual_pool, const TargetSpec& spec) {
    spec.validate();
    RankedReport report;
    report.spec = spec;

    std::vector<double> sorted_residuals = residual_pool;
    std::sort(sorted_residuals.begin(), sorted_residuals.end());
    double lo_offset = 0.0, hi_offset = 0.0;
    if (sorted_residuals.empty()) {
        report.warnings.push_back(
            "empty residual pool: p_meet degrades to a hard threshold and CIs collapse");
    } else {
        lo_offset = std::min(0.0, detail::quantile_sorted(sorted_residuals, 0.025));
        hi_offset = std::max(0.0, detail::quantile_sorted(sorted_residuals, 0.975));
    }

    report.rows.reserve(predictions.size());
    for (const Prediction& p : predictions) {
        RankedRow row;
        row.point_id = p.point_id;
        row.predicted_p2db_dbm = p.predicted_p2db_dbm;
        row.simulated = p.simulated;
        row.ci_low_dbm = p.predicted_p2db_dbm + lo_offset;
        row.ci_high_dbm = p.predicted_p2db_dbm + hi_offset;
        if (sorted_residuals.empty()) {
            row.p_meet = (p.predicted_p2db_dbm >= spec.target_p2db_dbm) ? 1.0 : 0.0;
        } else {
            // yhat - r >= target  <=>  r <= yhat - target
            double margin = p.predicted_p2db_dbm - spec.target_p2db_dbm;
            auto passing = static_cast<std::size_t>(
                std::upper_bound(sorted_residuals.begin(), sorted_residuals.end(), margin) -
                sorted_residuals.begin());
            row.p_meet = static_cast<double>(passing) / static_cast<double>(sorted_residuals.size());
        }
        report.rows.push_back(row);
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const RankedRow& a, const RankedRow& b) {
        if (a.p_meet != b.p_meet) return a.p_meet > b.p_meet;
        if (a.predicted_p2db_dbm != b.predicted_p2db_dbm)
            return a.predicted_p2db_dbm > b.predicted_p2db_dbm;
        return a.point_id < b.point_id;
    });
    for (std::size_t i = 0; i < report.rows.size(); ++i) report.rows[i].rank = i + 1;
    return report;
}

inline RankedReport rank(const std::vector<Prediction>& predictions, const CVReport& cv,
                         const TargetSpec& spec) {
    std::vector<double> pool;
    pool.reserve(cv.pooled.residuals.size());
    for (const auto& [id, r] : cv.pooled.residuals) pool.push_back(r);
    return rank(predictions, pool, spec);
}

inline RankedReport top_n(const RankedReport& report, std::size_t n) {
    RankedReport out;
    out.spec = report.spec;
    out.warnings = report.warnings;
    out.model_description = report.model_description;
    out.rows.assign(report.rows.begin(),
                    report.rows.begin() + std::min<std::size_t>(n, report.rows.size()));
    return out;
}

/// Intermediate artifact between `predict` and `rank`:
/// `point_id,predicted_p2db_dbm,simulated`.
inline std::string write_predictions_csv(const std::vector<Prediction>& predictions) {
    std::ostringstream out;
    out << "point_id,predicted_p2db_dbm,simulated\n";
    for (const Prediction& p : predictions)
        out << p.point_id << ',' << format_double(p.predicted_p2db_dbm) << ','
            << (p.simulated ? "true" : "false") << '\n';
    return out.str();
}

inline std::vector<Prediction> read_predictions_csv(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "point_id,predicted_p2db_dbm,simulated")
        throw ParseError("predictions CSV header must be point_id,predicted_p2db_dbm,simulated");
    std::vector<Prediction> out;
    std::set<std::uint64_t> seen;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto fields = split_csv_line(lines[ln]);
        if (fields.size() != 3) throw ParseError(ln + 1, "wrong field count in predictions CSV");
        Prediction p;
        p.point_id = parse_u64(fields[0]);
        p.predicted_p2db_dbm = parse_double(fields[1]);
        if (fields[2] == "true") p.simulated = true;
        else if (fields[2] == "false") p.simulated = false;
        else throw ParseError(ln + 1, "simulated flag must be true or false");
        if (!seen.insert(p.point_id).second)
            throw ParseError(ln + 1, "duplicate point_id in predictions CSV");
        out.push_back(p);
    }
    return out;
}

inline std::string write_ranked_csv(const DesignSpace& space, const RankedReport& report) {
    std::ostringstream out;
    out << "rank,point_id";
    for (const Parameter& p : space.parameters()) out << ',' << p.name;
    out << ",predicted_p2db_dbm,ci_low_dbm,ci_high_dbm,p_meet,simulated\n";
    for (const RankedRow& row : report.rows) {
        out << row.rank << ',' << row.point_id;
        auto idx = space.decode(row.point_id);
        for (std::size_t k = 0; k < space.dims(); ++k)
            out << ',' << space.parameters()[k].level_text(idx[k]);
        out << ',' << format_double(row.predicted_p2db_dbm) << ',' << format_double(row.ci_low_dbm)
            << ',' << format_double(row.ci_high_dbm) << ',' << format_double(row.p_meet) << ','
            << (row.simulated ? "true" : "false") << '\n';
    }
    return out.str();
}

}  // namespace paforge
