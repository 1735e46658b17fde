#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "paforge/csv.hpp"
#include "paforge/design_space.hpp"
#include "paforge/error.hpp"
#include "paforge/sim_backend.hpp"

namespace paforge {

inline constexpr double kNominalTempC = 25.0;
inline constexpr const char* kTempDeltaFeature = "temp_delta";
inline constexpr const char* kVswrTempFeature = "vswr_temp_interaction";

/// Feature layout: raw parameters in space order (categoricals encoded as
/// their level index), then temp_delta = Temp - 25, then
/// vswr_temp_interaction = VSWR * temp_delta. Engineered features are
/// omitted when the space lacks the parameters they derive from.
struct FeatureSchema {
    std::vector<std::string> names;
    double nominal_temp = kNominalTempC;

    std::size_t arity() const { return names.size(); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        return std::nullopt;
    }
};

struct DatasetRow {
    std::uint64_t point_id = 0;
    std::vector<double> features;
    double target = 0.0;
};

struct Dataset {
    FeatureSchema schema;
    std::vector<DatasetRow> rows;
    std::string mode_label;  // tag for per-mode runs; empty otherwise
};

/// Knows how to turn a grid point into a feature vector for one space.
class FeaturePlan {
public:
    explicit FeaturePlan(const DesignSpace& space) {
        for (std::size_t k = 0; k < space.dims(); ++k) {
            const Parameter& p = space.parameters()[k];
            schema_.names.push_back(p.name);
            if (p.name == "Temp" && !p.is_categorical()) temp_dim_ = k;
            if (p.name == "VSWR" && !p.is_categorical()) vswr_dim_ = k;
        }
        if (temp_dim_) {
            schema_.names.push_back(kTempDeltaFeature);
        } else {
            warnings_.push_back("space has no Temp parameter; omitting temp_delta");
        }
        if (temp_dim_ && vswr_dim_) {
            schema_.names.push_back(kVswrTempFeature);
        } else if (!vswr_dim_) {
            warnings_.push_back("space has no VSWR parameter; omitting vswr_temp_interaction");
        }
    }

    const FeatureSchema& schema() const { return schema_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::vector<double> row(const DesignSpace& space, std::uint64_t point_id) const {
        auto idx = space.decode(point_id);
        std::vector<double> out;
        out.reserve(schema_.arity());
        for (std::size_t k = 0; k < space.dims(); ++k)
            out.push_back(space.parameters()[k].numeric_value(idx[k]));
        if (temp_dim_) {
            double delta = out[*temp_dim_] - schema_.nominal_temp;
            out.push_back(delta);
            if (vswr_dim_) out.push_back(out[*vswr_dim_] * delta);
        }
        return out;
    }

private:
    FeatureSchema schema_;
    std::optional<std::size_t> temp_dim_, vswr_dim_;
    std::vector<std::string> warnings_;
};

struct FeatureBuild {
    Dataset dataset;
    std::vector<std::string> warnings;
};

/// One row per simulation result, sorted by point_id.
inline FeatureBuild build_features(const DesignSpace& space,
                                   const std::vector<SimulationResult>& results) {
    FeaturePlan plan(space);
    FeatureBuild out;
    out.dataset.schema = plan.schema();
    out.warnings = plan.warnings();
    std::set<std::uint64_t> seen;
    for (const SimulationResult& r : results) {
        if (r.point_id >= space.size())
            throw Error("result point_id " + std::to_string(r.point_id) + " out of range");
        if (!seen.insert(r.point_id).second)
            throw Error("duplicate point_id " + std::to_string(r.point_id) + " in results");
        out.dataset.rows.push_back({r.point_id, plan.row(space, r.point_id), r.p2db_dbm});
    }
    std::sort(out.dataset.rows.begin(), out.dataset.rows.end(),
              [](const DatasetRow& a, const DatasetRow& b) { return a.point_id < b.point_id; });
    return out;
}

/// Dataset CSV: `point_id,<feature names...>,p2db_dbm`; categorical
/// features appear as their encoded level index. Round-trips exactly.
inline std::string write_dataset_csv(const Dataset& dataset) {
    std::ostringstream out;
    out << "point_id";
    for (const std::string& name : dataset.schema.names) out << ',' << name;
    out << ",p2db_dbm\n";
    for (const DatasetRow& row : dataset.rows) {
        if (row.features.size() != dataset.schema.arity())
            throw Error("dataset row arity does not match schema");
        out << row.point_id;
        for (double v : row.features) out << ',' << format_double(v);
        out << ',' << format_double(row.target) << '\n';
    }
    return out.str();
}

inline Dataset read_dataset_csv(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty()) throw ParseError("empty dataset CSV");
    auto header = split_csv_line(lines[0]);
    if (header.size() < 2 || header[0] != "point_id" || header.back() != "p2db_dbm")
        throw ParseError(1, "dataset CSV header must be point_id,<features...>,p2db_dbm");
    Dataset out;
    for (std::size_t c = 1; c + 1 < header.size(); ++c)
        out.schema.names.emplace_back(header[c]);
    std::set<std::uint64_t> seen;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        auto fields = split_csv_line(lines[ln]);
        if (fields.size() != header.size())
            throw ParseError(ln + 1, "wrong field count in dataset CSV");
        DatasetRow row;
        row.point_id = parse_u64(fields[0]);
        if (!seen.insert(row.point_id).second)
            throw ParseError(ln + 1, "duplicate point_id in dataset CSV");
        for (std::size_t c = 1; c + 1 < fields.size(); ++c)
            row.features.push_back(parse_double(fields[c]));
        row.target = parse_double(fields.back());
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace paforge
