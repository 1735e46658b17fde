#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "paforge/csv.hpp"
#include "paforge/design_space.hpp"
#include "paforge/error.hpp"
#include "paforge/rng.hpp"

namespace paforge {

struct SimulationResult {
    std::uint64_t point_id = 0;
    double p2db_dbm = 0.0;
};

struct SimulationFailure {
    std::uint64_t point_id = 0;
    int attempts = 0;
    std::string message;
};

/// Raised when a batch completes with failures; carries whatever results
/// did succeed so callers can report partial progress.
class BatchError : public Error {
public:
    BatchError(std::vector<SimulationResult> partial, std::vector<SimulationFailure> failures)
        : Error(describe(failures)), partial_(std::move(partial)), failures_(std::move(failures)) {}

    const std::vector<SimulationResult>& partial_results() const { return partial_; }
    const std::vector<SimulationFailure>& failures() const { return failures_; }

private:
    static std::string describe(const std::vector<SimulationFailure>& failures) {
        std::ostringstream out;
        out << failures.size() << " point(s) failed to simulate";
        if (!failures.empty())
            out << " (first: point " << failures[0].point_id << " after " << failures[0].attempts
                << " attempt(s): " << failures[0].message << ")";
        return out.str();
    }

    std::vector<SimulationResult> partial_;
    std::vector<SimulationFailure> failures_;
};

/// Behavioral P2dB model coefficients. The constants are invented but
/// fixed: a 28 dBm baseline, strong supply-voltage slope, mild negative
/// temperature slope, a mismatch penalty that worsens when hot, a small
/// frequency/phase ripple, and a per-mode offset. Temperature and supply
/// dominate by construction.
struct SyntheticPAConfig {
    double noise_sigma_dbm = 0.1;
    std::uint64_t seed = 0;
    double p0_dbm = 28.0;
    double vcc_slope_db_per_v = 2.5;
    double temp_slope_db_per_c = -0.015;
    double vswr_penalty_db = -0.8;
    double vswr_temp_coupling_per_c = 0.004;
    double ripple_db = 0.3;
    double mode_step_db = 0.25;
};

/// Reference operating point: all deviation terms vanish there.
inline constexpr double kRefVcc = 3.4;
inline constexpr double kRefTemp = 25.0;
inline constexpr double kRefVswr = 1.0;
inline constexpr double kRefFreq = 5.0e9;
inline constexpr double kRefPhase = 90.0;

inline double synthetic_p2db(const DesignSpace& space, std::uint64_t point_id,
                             const SyntheticPAConfig& config) {
    if (config.noise_sigma_dbm < 0) throw Error("noise_sigma_dbm must be >= 0");
    double vcc = kRefVcc, temp = kRefTemp, vswr = kRefVswr, freq = kRefFreq, phase = kRefPhase;
    double mode_index = 0.0;
    auto idx = space.decode(point_id);
    for (std::size_t k = 0; k < space.dims(); ++k) {
        const Parameter& p = space.parameters()[k];
        if (p.name == "Vcc") vcc = p.numeric_value(idx[k]);
        else if (p.name == "Temp") temp = p.numeric_value(idx[k]);
        else if (p.name == "VSWR") vswr = p.numeric_value(idx[k]);
        else if (p.name == "Freq") freq = p.numeric_value(idx[k]);
        else if (p.name == "Phase") phase = p.numeric_value(idx[k]);
        else if (p.name == "Mode") mode_index = static_cast<double>(idx[k]);
        // anything else is ignored; SyntheticBackend surfaces a warning once
    }
    double value = config.p0_dbm;
    value += config.vcc_slope_db_per_v * (vcc - kRefVcc);
    value += config.temp_slope_db_per_c * (temp - kRefTemp);
    value += config.vswr_penalty_db * (vswr - kRefVswr) *
             (1.0 + config.vswr_temp_coupling_per_c * (temp - kRefTemp));
    value += config.ripple_db * std::sin(2.0 * std::numbers::pi * (freq - kRefFreq) / 2.0e9) *
             std::cos(phase * std::numbers::pi / 180.0);
    value += config.mode_step_db * mode_index;
    if (config.noise_sigma_dbm > 0) {
        Rng rng(splitmix64(config.seed) + point_id);
        value += config.noise_sigma_dbm * rng.normal();
    }
    return value;
}

class SimBackend {
public:
    virtual ~SimBackend() = default;
    virtual double simulate_point(const DesignSpace& space, std::uint64_t point_id) = 0;
    virtual int max_retries() const { return 0; }
    virtual std::string name() const = 0;
};

class SyntheticBackend : public SimBackend {
public:
    explicit SyntheticBackend(SyntheticPAConfig config = {}) : config_(config) {}

    double simulate_point(const DesignSpace& space, std::uint64_t point_id) override {
        return synthetic_p2db(space, point_id, config_);
    }

    std::string name() const override { return "synthetic"; }
    const SyntheticPAConfig& config() const { return config_; }

    /// One warning per parameter the behavioral formula does not know about.
    std::vector<std::string> unknown_parameter_warnings(const DesignSpace& space) const {
        static const std::set<std::string> known = {"Vcc", "Temp", "VSWR", "Freq", "Phase", "Mode"};
        std::vector<std::string> warnings;
        for (const Parameter& p : space.parameters())
            if (!known.count(p.name))
                warnings.push_back("synthetic model ignores unknown parameter '" + p.name + "'");
        return warnings;
    }

private:
    SyntheticPAConfig config_;
};

/// Replays P2dB values from a previously written results CSV. The file is
/// the complete oracle: asking for a point it does not contain is an error.
class CsvReplayBackend : public SimBackend {
public:
    CsvReplayBackend(const DesignSpace& space, std::string_view csv_text) {
        for (const SimulationResult& r : read_results_csv(space, csv_text))
            values_.emplace(r.point_id, r.p2db_dbm);
    }

    static CsvReplayBackend from_file(const DesignSpace& space, const std::string& path) {
        return CsvReplayBackend(space, read_file(path));
    }

    double simulate_point(const DesignSpace&, std::uint64_t point_id) override {
        auto it = values_.find(point_id);
        if (it == values_.end())
            throw Error("replay store has no result for point " + std::to_string(point_id));
        return it->second;
    }

    std::string name() const override { return "csv"; }
    std::size_t stored_count() const { return values_.size(); }

    /// Results CSV: header `point_id,<param names...>,p2db_dbm`. Values
    /// round-trip at full double precision. Rows must match the space and
    /// carry distinct ids.
    static std::vector<SimulationResult> read_results_csv(const DesignSpace& space,
                                                          std::string_view text) {
        auto lines = split_lines(text);
        if (lines.empty()) throw ParseError("empty results CSV");
        auto header = split_csv_line(lines[0]);
        if (header.size() != space.dims() + 2 || header[0] != "point_id" ||
            header.back() != "p2db_dbm")
            throw ParseError(1, "results CSV header does not match the design space");
        for (std::size_t k = 0; k < space.dims(); ++k)
            if (header[k + 1] != space.parameters()[k].name)
                throw ParseError(1, "results CSV header column '" + std::string(header[k + 1]) +
                                        "' does not match parameter '" + space.parameters()[k].name +
                                        "'");
        std::vector<SimulationResult> out;
        std::set<std::uint64_t> seen;
        for (std::size_t ln = 1; ln < lines.size(); ++ln) {
            if (lines[ln].empty()) continue;
            auto fields = split_csv_line(lines[ln]);
            if (fields.size() != space.dims() + 2)
                throw ParseError(ln + 1, "wrong field count in results CSV");
            SimulationResult r;
            r.point_id = parse_u64(fields[0]);
            if (r.point_id >= space.size()) throw ParseError(ln + 1, "point_id out of range");
            r.p2db_dbm = parse_double(fields.back());
            if (!std::isfinite(r.p2db_dbm)) throw ParseError(ln + 1, "p2db_dbm is not finite");
            if (!seen.insert(r.point_id).second)
                throw ParseError(ln + 1, "duplicate point_id in results CSV");
            out.push_back(r);
        }
        return out;
    }

private:
    std::unordered_map<std::uint64_t, double> values_;
};

/// Bridges to an external simulator: one process invocation per point with
/// `--param <name>=<value>` arguments; the first whitespace-delimited token
/// of stdout is the P2dB value in dBm. Nonzero exit or an unparseable
/// token counts as a failure (retried by simulate_batch).
class CommandBackend : public SimBackend {
public:
    explicit CommandBackend(std::string command) : command_(std::move(command)) {
        if (command_.empty()) throw Error("external command is empty");
    }

    /// Falls back to $PAFORGE_SIM_CMD when the command spec is empty.
    static CommandBackend from_spec(const std::string& command) {
        if (!command.empty()) return CommandBackend(command);
        const char* env = std::getenv("PAFORGE_SIM_CMD");
        if (!env || !*env)
            throw Error("no external command given and PAFORGE_SIM_CMD is not set");
        return CommandBackend(env);
    }

    double simulate_point(const DesignSpace& space, std::uint64_t point_id) override {
        std::string cmd = command_;
        auto idx = space.decode(point_id);
        for (std::size_t k = 0; k < space.dims(); ++k) {
            const Parameter& p = space.parameters()[k];
            cmd += " --param " + shell_quote(p.name + "=" + p.level_text(idx[k]));
        }
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe) throw Error("failed to start external command");
        std::string output;
        char buf[256];
        while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, got);
        int status = pclose(pipe);
        if (status != 0)
            throw Error("external command exited with status " + std::to_string(status));
        std::istringstream in(output);
        std::string token;
        if (!(in >> token)) throw Error("external command produced no output");
        return parse_double(token);
    }

    int max_retries() const override { return 2; }
    std::string name() const override { return "command"; }
    const std::string& command() const { return command_; }

private:
    static std::string shell_quote(const std::string& s) {
        std::string out = "'";
        for (char c : s) {
            if (c == '\'') out += "'\\''";
            else out += c;
        }
        out += "'";
        return out;
    }

    std::string command_;
};

/// Counts simulate_point invocations; wraps any backend.
class CountingBackend : public SimBackend {
public:
    explicit CountingBackend(SimBackend& inner) : inner_(inner) {}

    double simulate_point(const DesignSpace& space, std::uint64_t point_id) override {
        count_.fetch_add(1, std::memory_order_relaxed);
        return inner_.simulate_point(space, point_id);
    }

    int max_retries() const override { return inner_.max_retries(); }
    std::string name() const override { return inner_.name(); }
    std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }

private:
    SimBackend& inner_;
    std::atomic<std::uint64_t> count_{0};
};

struct BatchOptions {
    std::size_t workers = 0;  // 0 → number of logical processors
};

/// Simulates every requested point, in parallel up to the worker count.
/// Results come back sorted by point_id regardless of scheduling. Failed
/// points are retried per the backend's policy; if any still fail, throws
/// BatchError carrying the successful results and a per-point report.
inline std::vector<SimulationResult> simulate_batch(SimBackend& backend, const DesignSpace& space,
                                                    const std::vector<std::uint64_t>& point_ids,
                                                    const BatchOptions& options = {}) {
    {
        std::set<std::uint64_t> distinct(point_ids.begin(), point_ids.end());
        if (distinct.size() != point_ids.size())
            throw Error("simulate_batch request contains duplicate point_ids");
        if (!distinct.empty() && *distinct.rbegin() >= space.size())
            throw Error("simulate_batch request contains out-of-range point_ids");
    }
    std::vector<std::optional<SimulationResult>> slots(point_ids.size());
    std::vector<SimulationFailure> failures;
    std::mutex failure_mutex;
    std::atomic<std::size_t> cursor{0};
    const int attempts_allowed = backend.max_retries() + 1;

    auto work = [&] {
        for (;;) {
            std::size_t i = cursor.fetch_add(1, std::memory_order_relaxed);
            if (i >= point_ids.size()) return;
            std::uint64_t id = point_ids[i];
            std::string last_error;
            for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
                try {
                    slots[i] = SimulationResult{id, backend.simulate_point(space, id)};
                    break;
                } catch (const std::exception& e) {
                    last_error = e.what();
                }
            }
            if (!slots[i]) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failures.push_back({id, attempts_allowed, last_error});
            }
        }
    };

    std::size_t workers = options.workers ? options.workers
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(1, point_ids.size()));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    std::vector<SimulationResult> results;
    results.reserve(point_ids.size());
    for (const auto& slot : slots)
        if (slot) results.push_back(*slot);
    std::sort(results.begin(), results.end(),
              [](const SimulationResult& a, const SimulationResult& b) { return a.point_id < b.point_id; });
    if (!failures.empty()) {
        std::sort(failures.begin(), failures.end(),
                  [](const SimulationFailure& a, const SimulationFailure& b) { return a.point_id < b.point_id; });
        throw BatchError(std::move(results), std::move(failures));
    }
    return results;
}

inline std::string write_results_csv(const DesignSpace& space,
                                     const std::vector<SimulationResult>& results) {
    std::ostringstream out;
    out << "point_id";
    for (const Parameter& p : space.parameters()) out << ',' << p.name;
    out << ",p2db_dbm\n";
    for (const SimulationResult& r : results) {
        out << r.point_id;
        auto idx = space.decode(r.point_id);
        for (std::size_t k = 0; k < space.dims(); ++k)
            out << ',' << space.parameters()[k].level_text(idx[k]);
        out << ',' << format_double(r.p2db_dbm) << '\n';
    }
    return out.str();
}

}  // namespace paforge
