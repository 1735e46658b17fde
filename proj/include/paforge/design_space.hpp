#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "paforge/csv.hpp"
#include "paforge/error.hpp"

namespace paforge {

enum class ParamKind { ContinuousGrid, DiscreteGrid, Categorical };

/// One swept parameter: a finite ordered list of levels. Grid kinds hold
/// numeric levels (strictly increasing); categorical kinds hold unique
/// strings with no implied order.
struct Parameter {
    std::string name;
    ParamKind kind = ParamKind::ContinuousGrid;
    std::vector<double> numeric_levels;       // grid kinds
    std::vector<std::string> string_levels;   // categorical
    std::string unit;                         // optional label, e.g. "V"

    bool is_categorical() const { return kind == ParamKind::Categorical; }

    std::size_t level_count() const {
        return is_categorical() ? string_levels.size() : numeric_levels.size();
    }

    /// Numeric view of a level: grid value, or the ordinal index for
    /// categoricals (used as the model feature encoding).
    double numeric_value(std::size_t level_index) const {
        return is_categorical() ? static_cast<double>(level_index) : numeric_levels[level_index];
    }

    std::string level_text(std::size_t level_index) const {
        return is_categorical() ? string_levels[level_index] : format_double(numeric_levels[level_index]);
    }
};

/// A point of the grid identified by its canonical index. point_id uses
/// mixed-radix encoding with the last parameter varying fastest.
struct DesignPoint {
    std::uint64_t point_id = 0;
    std::vector<std::size_t> level_indices;  // one per parameter, in order
};

/// Ordered set of parameters defining a finite Cartesian design space.
/// Immutable after construction; validation happens in the constructor.
class DesignSpace {
public:
    DesignSpace() = default;  // empty placeholder; real spaces come from the validating ctor

    explicit DesignSpace(std::vector<Parameter> parameters) : params_(std::move(parameters)) {
        if (params_.empty()) throw Error("design space has no parameters");
        size_ = 1;
        for (std::size_t p = 0; p < params_.size(); ++p) {
            const Parameter& par = params_[p];
            if (par.name.empty()) throw Error("parameter with empty name");
            for (std::size_t q = 0; q < p; ++q)
                if (params_[q].name == par.name)
                    throw Error("duplicate parameter name: " + par.name);
            if (par.level_count() == 0) throw Error("parameter '" + par.name + "' has no levels");
            if (par.is_categorical()) {
                for (std::size_t a = 0; a < par.string_levels.size(); ++a)
                    for (std::size_t b = a + 1; b < par.string_levels.size(); ++b)
                        if (par.string_levels[a] == par.string_levels[b])
                            throw Error("parameter '" + par.name + "' has duplicate level '" +
                                        par.string_levels[a] + "'");
            } else {
                for (std::size_t a = 1; a < par.numeric_levels.size(); ++a)
                    if (!(par.numeric_levels[a - 1] < par.numeric_levels[a]))
                        throw Error("parameter '" + par.name + "' levels must be strictly increasing");
            }
            std::uint64_t count = par.level_count();
            if (__builtin_mul_overflow(size_, count, &size_))
                throw Error("design space size overflows 64 bits");
        }
    }

    const std::vector<Parameter>& parameters() const { return params_; }
    std::size_t dims() const { return params_.size(); }
    std::uint64_t size() const { return size_; }

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return i;
        return std::nullopt;
    }

    std::uint64_t encode(const std::vector<std::size_t>& level_indices) const {
        if (level_indices.size() != params_.size())
            throw Error("level index count does not match parameter count");
        std::uint64_t id = 0;
        for (std::size_t k = 0; k < params_.size(); ++k) {
            if (level_indices[k] >= params_[k].level_count())
                throw Error("level index out of range for parameter '" + params_[k].name + "'");
            id = id * params_[k].level_count() + level_indices[k];
        }
        return id;
    }

    std::vector<std::size_t> decode(std::uint64_t point_id) const {
        if (point_id >= size_)
            throw Error("point_id " + std::to_string(point_id) + " out of range (size " +
                        std::to_string(size_) + ")");
        std::vector<std::size_t> idx(params_.size());
        for (std::size_t k = params_.size(); k-- > 0;) {
            std::uint64_t count = params_[k].level_count();
            idx[k] = static_cast<std::size_t>(point_id % count);
            point_id /= count;
        }
        return idx;
    }

    /// Maps level index k of an L-level parameter to the stratum center
    /// (k + 0.5) / L. Categorical levels are embedded ordinally the same
    /// way; their distance semantics live in the sampler.
    std::vector<double> normalize(const std::vector<std::size_t>& level_indices) const {
        std::vector<double> x(params_.size());
        for (std::size_t k = 0; k < params_.size(); ++k) {
            double count = static_cast<double>(params_[k].level_count());
            x[k] = (static_cast<double>(level_indices[k]) + 0.5) / count;
        }
        return x;
    }

    /// Stratum index containing normalized coordinate u for parameter k;
    /// the containing stratum's center is also the nearest center.
    std::size_t level_from_unit(std::size_t param_index, double u) const {
        std::size_t count = params_[param_index].level_count();
        if (u <= 0.0) return 0;
        auto idx = static_cast<std::size_t>(u * static_cast<double>(count));
        return std::min(idx, count - 1);
    }

private:
    std::vector<Parameter> params_;
    std::uint64_t size_ = 1;
};

inline DesignPoint enumerate(const DesignSpace& space, std::uint64_t point_id) {
    return DesignPoint{point_id, space.decode(point_id)};
}

inline std::uint64_t encode(const DesignSpace& space, const DesignPoint& point) {
    return space.encode(point.level_indices);
}

inline std::vector<double> normalize(const DesignSpace& space, const DesignPoint& point) {
    return space.normalize(point.level_indices);
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

}  // namespace detail

/// Parses the line-oriented design-space format:
///   # comment
///   param <name> continuous grid <v1> <v2> ...
///   param <name> discrete grid <v1> <v2> ...
///   param <name> categorical values <s1> <s2> ...
///   unit <name> <label>
/// Numbers accept scientific notation. Throws ParseError with the line number.
inline DesignSpace parse_space(std::string_view text) {
    std::vector<Parameter> params;
    auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        std::size_t lineno = ln + 1;
        auto tokens = detail::split_ws(lines[ln]);
        if (tokens.empty() || tokens[0][0] == '#') continue;
        if (tokens[0] == "param") {
            if (tokens.size() < 4) throw ParseError(lineno, "param statement too short");
            Parameter par;
            par.name = std::string(tokens[1]);
            for (const Parameter& existing : params)
                if (existing.name == par.name)
                    throw ParseError(lineno, "duplicate parameter name: " + par.name);
            std::string_view kind = tokens[2];
            std::string_view list_kw = tokens[3];
            if (kind == "continuous" || kind == "discrete") {
                if (list_kw != "grid")
                    throw ParseError(lineno, "expected 'grid' after '" + std::string(kind) + "'");
                par.kind = (kind == "continuous") ? ParamKind::ContinuousGrid : ParamKind::DiscreteGrid;
                for (std::size_t t = 4; t < tokens.size(); ++t) {
                    double v;
                    try {
                        v = parse_double(tokens[t]);
                    } catch (const ParseError&) {
                        throw ParseError(lineno, "invalid level value '" + std::string(tokens[t]) + "'");
                    }
                    par.numeric_levels.push_back(v);
                }
                if (par.numeric_levels.empty())
                    throw ParseError(lineno, "parameter '" + par.name + "' declares no levels");
                for (std::size_t a = 1; a < par.numeric_levels.size(); ++a)
                    if (!(par.numeric_levels[a - 1] < par.numeric_levels[a]))
                        throw ParseError(lineno, "parameter '" + par.name +
                                                     "' levels must be strictly increasing");
            } else if (kind == "categorical") {
                if (list_kw != "values")
                    throw ParseError(lineno, "expected 'values' after 'categorical'");
                par.kind = ParamKind::Categorical;
                for (std::size_t t = 4; t < tokens.size(); ++t)
                    par.string_levels.emplace_back(tokens[t]);
                if (par.string_levels.empty())
                    throw ParseError(lineno, "parameter '" + par.name + "' declares no levels");
                for (std::size_t a = 0; a < par.string_levels.size(); ++a)
                    for (std::size_t b = a + 1; b < par.string_levels.size(); ++b)
                        if (par.string_levels[a] == par.string_levels[b])
                            throw ParseError(lineno, "duplicate categorical level '" +
                                                         par.string_levels[a] + "'");
            } else {
                throw ParseError(lineno, "unknown parameter kind '" + std::string(kind) + "'");
            }
            params.push_back(std::move(par));
        } else if (tokens[0] == "unit") {
            if (tokens.size() < 3) throw ParseError(lineno, "unit statement too short");
            std::string name(tokens[1]);
            auto it = std::find_if(params.begin(), params.end(),
                                   [&](const Parameter& p) { return p.name == name; });
            if (it == params.end())
                throw ParseError(lineno, "unit for undeclared parameter '" + name + "'");
            std::string label;
            for (std::size_t t = 2; t < tokens.size(); ++t) {
                if (t > 2) label += ' ';
                label += std::string(tokens[t]);
            }
            it->unit = label;
        } else {
            throw ParseError(lineno, "unknown statement '" + std::string(tokens[0]) + "'");
        }
    }
    try {
        return DesignSpace(std::move(params));
    } catch (const Error& e) {
        throw ParseError(std::string(e.what()));
    }
}

inline DesignSpace parse_space_file(const std::filesystem::path& path) {
    return parse_space(read_file(path));
}

/// Canonical text form; parse(serialize(parse(text))) is a fixed point.
inline std::string serialize(const DesignSpace& space) {
    std::ostringstream out;
    for (const Parameter& par : space.parameters()) {
        out << "param " << par.name;
        switch (par.kind) {
            case ParamKind::ContinuousGrid: out << " continuous grid"; break;
            case ParamKind::DiscreteGrid: out << " discrete grid"; break;
            case ParamKind::Categorical: out << " categorical values"; break;
        }
        if (par.is_categorical())
            for (const std::string& s : par.string_levels) out << ' ' << s;
        else
            for (double v : par.numeric_levels) out << ' ' << format_double(v);
        out << '\n';
        if (!par.unit.empty()) out << "unit " << par.name << ' ' << par.unit << '\n';
    }
    return out.str();
}

}  // namespace paforge
