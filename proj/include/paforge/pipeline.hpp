#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "paforge/csv.hpp"
#include "paforge/design_space.hpp"
#include "paforge/error.hpp"
#include "paforge/features.hpp"
#include "paforge/ranking.hpp"
#include "paforge/regressor.hpp"
#include "paforge/sampler.hpp"
#include "paforge/sim_backend.hpp"
#include "paforge/validation.hpp"

namespace paforge {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kManifestVersion = 1;

/// A stage failure after configuration was validated; the pipeline writes
/// a partial manifest naming the stage before this propagates.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct PipelineConfig {
    std::string space_path;
    std::string backend = "synthetic";  // synthetic | csv:<path> | command[:<cmd>]
    double fraction = 0.35;
    std::string sampler = "maxmin";  // maxmin | random
    BoostConfig boost;
    int k = 5;
    TargetSpec target;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    std::size_t workers = 0;  // 0 → logical processors
    std::string mode_column;  // per-mode operation when non-empty
    std::size_t top = 10;
    double noise_sigma_dbm = 0.1;  // synthetic backend only

    // Derived module seeds; one master knob reproduces everything.
    std::uint64_t sampler_seed() const { return seed + 1; }
    std::uint64_t noise_seed() const { return seed + 2; }
    std::uint64_t folds_seed() const { return seed + 3; }
    std::uint64_t model_seed() const { return seed + 4; }

    void validate() const {
        if (space_path.empty()) throw Error("no space file given");
        if (!(fraction > 0.0) || fraction > 1.0) throw Error("fraction must be in (0, 1]");
        if (sampler != "maxmin" && sampler != "random")
            throw Error("sampler must be 'maxmin' or 'random'");
        if (k < 2) throw Error("k must be >= 2");
        boost.validate();
        target.validate();
        if (noise_sigma_dbm < 0) throw Error("noise sigma must be >= 0");
        if (backend != "synthetic" && backend != "command" && backend.rfind("csv:", 0) != 0 &&
            backend.rfind("command:", 0) != 0)
            throw Error("backend must be synthetic, csv:<path>, or command:<cmd>");
    }
};

/// Sample count rule: ceil(fraction * grid size), floored at max(k+1, d+1)
/// so CV folds and tree fitting stay well-posed, capped at the grid size.
inline std::uint64_t sample_count(double fraction, std::uint64_t space_size, int k,
                                  std::size_t dims) {
    auto n = static_cast<std::uint64_t>(std::ceil(fraction * static_cast<double>(space_size)));
    auto floor_n = static_cast<std::uint64_t>(
        std::max<std::size_t>(static_cast<std::size_t>(k) + 1, dims + 1));
    n = std::max(n, floor_n);
    return std::min(n, space_size);
}

inline std::unique_ptr<SimBackend> make_backend(const PipelineConfig& config,
                                                const DesignSpace& space) {
    if (config.backend == "synthetic") {
        SyntheticPAConfig sc;
        sc.noise_sigma_dbm = config.noise_sigma_dbm;
        sc.seed = config.noise_seed();
        return std::make_unique<SyntheticBackend>(sc);
    }
    if (config.backend.rfind("csv:", 0) == 0) {
        std::string path = config.backend.substr(4);
        if (path.empty()) throw Error("csv backend needs a path: csv:<path>");
        return std::make_unique<CsvReplayBackend>(CsvReplayBackend::from_file(space, path));
    }
    std::string cmd = (config.backend == "command") ? "" : config.backend.substr(8);
    return std::make_unique<CommandBackend>(CommandBackend::from_spec(cmd));
}

/// The sampling stage, shared by `run_single` and the `sample` subcommand
/// so both produce identical artifacts for the same config. For MaxMin the
/// reported d_min is the optimizer's continuous-stage value; snapping onto
/// a dense grid saturates post-snap distances for both samplers alike.
inline SampleSet run_sampling(const PipelineConfig& config, const DesignSpace& space) {
    std::uint64_t n = sample_count(config.fraction, space.size(), config.k, space.dims());
    if (config.sampler == "random") return random_sample(space, n, config.sampler_seed());
    SamplerConfig sc;
    sc.fraction = config.fraction;
    sc.seed = config.sampler_seed();
    SampleSet initial = lhs_initial(n, space.dims(), config.sampler_seed());
    SampleSet optimized = maxmin_optimize(initial, sc, &space);
    SampleSet snapped = snap_to_grid(optimized, space, config.sampler_seed());
    snapped.d_min = optimized.d_min;
    return snapped;
}

struct StageRecord {
    std::string name;
    double duration_ms = 0.0;
};

struct PipelineResult {
    DesignSpace space;
    SampleSet sample;
    std::vector<SimulationResult> results;
    CVReport cv;
    BoostedModel model;
    RankedReport ranked;
    std::vector<StageRecord> stages;
    nlohmann::json manifest;
    std::uint64_t n_samples = 0;
};

namespace detail {

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["space"] = c.space_path;
    j["backend"] = c.backend;
    j["fraction"] = c.fraction;
    j["sampler"] = c.sampler;
    j["iterations"] = c.boost.iterations;
    j["depth"] = c.boost.depth;
    j["learning_rate"] = c.boost.learning_rate;
    j["l2"] = c.boost.l2_leaf_reg;
    j["k"] = c.k;
    j["target"] = c.target.target_p2db_dbm;
    j["tolerance"] = c.target.tolerance_dbm;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["mode_column"] = c.mode_column;
    j["top"] = c.top;
    j["noise_sigma_dbm"] = c.noise_sigma_dbm;
    j["out"] = c.out_dir;
    return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.space_path = j.at("space").get<std::string>();
    c.backend = j.at("backend").get<std::string>();
    c.fraction = j.at("fraction").get<double>();
    c.sampler = j.at("sampler").get<std::string>();
    c.boost.iterations = j.at("iterations").get<int>();
    c.boost.depth = j.at("depth").get<int>();
    c.boost.learning_rate = j.at("learning_rate").get<double>();
    c.boost.l2_leaf_reg = j.at("l2").get<double>();
    c.k = j.at("k").get<int>();
    c.target.target_p2db_dbm = j.at("target").get<double>();
    c.target.tolerance_dbm = j.at("tolerance").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.workers = j.at("workers").get<std::size_t>();
    c.mode_column = j.at("mode_column").get<std::string>();
    c.top = j.at("top").get<std::size_t>();
    c.noise_sigma_dbm = j.at("noise_sigma_dbm").get<double>();
    c.out_dir = j.at("out").get<std::string>();
    return c;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json j;
    if (m.r2) j["r2"] = *m.r2;
    else j["r2"] = nullptr;
    j["rmse_dbm"] = m.rmse_dbm;
    j["mae_dbm"] = m.mae_dbm;
    j["n"] = m.n;
    return j;
}

inline std::string artifact_name(const std::string& stem, const std::string& mode,
                                 const std::string& ext) {
    return mode.empty() ? stem + ext : stem + "_" + mode + ext;
}

class StageClock {
public:
    explicit StageClock(std::vector<StageRecord>& records) : records_(records) {}

    template <typename F>
    auto run(const std::string& name, F&& body) -> decltype(body()) {
        auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(body())>) {
                body();
                finish(name, start);
            } else {
                auto value = body();
                finish(name, start);
                return value;
            }
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            finish(name, start);
            throw StageError(name, e.what());
        }
    }

private:
    void finish(const std::string& name, std::chrono::steady_clock::time_point start) {
        auto end = std::chrono::steady_clock::now();
        records_.push_back(
            {name, std::chrono::duration<double, std::milli>(end - start).count()});
    }

    std::vector<StageRecord>& records_;
};

}  // namespace detail

/// Sub-space with one categorical parameter pinned to a single level,
/// used for per-mode runs. Point ids in per-mode artifacts index the
/// sub-space, not the parent grid; rows stay self-describing through
/// their parameter-value columns.
inline DesignSpace slice_space(const DesignSpace& space, const std::string& param_name,
                               std::size_t level) {
    auto dim = space.find(param_name);
    if (!dim) throw Error("no parameter named '" + param_name + "'");
    std::vector<Parameter> params = space.parameters();
    Parameter& p = params[*dim];
    if (!p.is_categorical()) throw Error("mode column '" + param_name + "' is not categorical");
    p.string_levels = {p.string_levels.at(level)};
    return DesignSpace(std::move(params));
}

/// One full run against one space (the whole space, or one mode's slice).
/// Writes every artifact atomically into out_dir with the mode suffix.
inline PipelineResult run_single(const PipelineConfig& config, const DesignSpace& space,
                                 SimBackend& backend, const std::string& mode = {}) {
    namespace fs = std::filesystem;
    PipelineResult result;
    result.space = space;
    detail::StageClock clock(result.stages);
    const fs::path out(config.out_dir);
    auto path_of = [&](const std::string& stem, const std::string& ext) {
        return (out / detail::artifact_name(stem, mode, ext)).string();
    };

    result.n_samples = sample_count(config.fraction, space.size(), config.k, space.dims());
    result.sample = clock.run("sample", [&] { return run_sampling(config, space); });
    clock.run("write_sample",
              [&] { atomic_write_file(path_of("sample", ".csv"), write_sample_csv(space, result.sample)); });

    result.results = clock.run("simulate", [&] {
        BatchOptions opts;
        opts.workers = config.workers;
        return simulate_batch(backend, space, result.sample.grid_ids, opts);
    });
    clock.run("write_results", [&] {
        atomic_write_file(path_of("results", ".csv"), write_results_csv(space, result.results));
    });

    Dataset dataset = clock.run("features", [&] { return build_features(space, result.results).dataset; });
    dataset.mode_label = mode;

    result.cv = clock.run("cross_validate", [&] {
        BoostConfig bc = config.boost;
        bc.seed = config.model_seed();
        return cross_validate(dataset, bc, config.k, config.folds_seed());
    });
    clock.run("write_cv", [&] {
        atomic_write_file(path_of("cv_folds", ".csv"), write_cv_csv(result.cv));
        atomic_write_file(path_of("cv_residuals", ".csv"), write_residuals_csv(result.cv));
        nlohmann::json summary;
        summary["k"] = result.cv.k;
        summary["pooled"] = detail::metrics_to_json(result.cv.pooled);
        summary["residual_quantiles"] = {{"q025", result.cv.q025}, {"q975", result.cv.q975}};
        summary["mean_residual"] = result.cv.mean_residual;
        atomic_write_file(path_of("cv_summary", ".json"), summary.dump(2) + "\n");
    });

    result.model = clock.run("train", [&] {
        BoostConfig bc = config.boost;
        bc.seed = config.model_seed();
        return fit(dataset, bc);
    });
    clock.run("write_model",
              [&] { atomic_write_file(path_of("model", ".txt"), save_model(result.model)); });

    auto predictions = clock.run("predict", [&] {
        return predict_full_space(result.model, space, result.sample.grid_ids);
    });
    result.ranked = clock.run("rank", [&] { return rank(predictions, result.cv, config.target); });
    result.ranked.model_description =
        "paforge-model v1, " + std::to_string(result.model.trees.size()) + " trees";
    clock.run("write_ranked", [&] {
        atomic_write_file(path_of("ranked", ".csv"), write_ranked_csv(space, result.ranked));
    });
    return result;
}

/// End-to-end pipeline: validate config, resolve the space and backend,
/// then sample → simulate → cross-validate → train → predict → rank.
/// With mode_column set, each categorical level runs separately and the
/// manifest indexes the per-mode artifacts. A manifest (JSON) always
/// lands in out_dir; on stage failure it is partial and names the failed
/// stage before the error propagates. backend_override, when given,
/// replaces backend construction (used to instrument runs).
inline PipelineResult run_pipeline(const PipelineConfig& config,
                                   SimBackend* backend_override = nullptr) {
    namespace fs = std::filesystem;
    config.validate();
    DesignSpace space = parse_space_file(config.space_path);
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) throw Error("cannot create output directory " + config.out_dir + ": " + ec.message());
    std::unique_ptr<SimBackend> owned;
    if (!backend_override) {
        owned = make_backend(config, space);  // validated before any long stage
        backend_override = owned.get();
    }
    if (!config.mode_column.empty()) {
        auto dim = space.find(config.mode_column);
        if (!dim) throw Error("no parameter named '" + config.mode_column + "'");
        if (!space.parameters()[*dim].is_categorical())
            throw Error("mode column '" + config.mode_column + "' is not categorical");
    }

    nlohmann::json manifest;
    manifest["manifest_version"] = kManifestVersion;
    manifest["tool"] = {{"name", "paforge"}, {"version", kToolVersion}};
    manifest["config"] = detail::config_to_json(config);
    manifest["seeds"] = {{"master", config.seed},
                         {"sampler", config.sampler_seed()},
                         {"noise", config.noise_seed()},
                         {"folds", config.folds_seed()},
                         {"model", config.model_seed()}};
    auto manifest_path = (fs::path(config.out_dir) / "manifest.json").string();
    auto fail = [&](const StageError& e) {
        manifest["status"] = "failed";
        manifest["failed_stage"] = e.stage();
        manifest["error"] = e.what();
        atomic_write_file(manifest_path, manifest.dump(2) + "\n");
    };

    try {
        PipelineResult result;
        if (config.mode_column.empty()) {
            result = run_single(config, space, *backend_override);
            manifest["metrics"] = {{"n_grid", space.size()},
                                   {"n_samples", result.n_samples},
                                   {"sample_d_min", result.sample.d_min},
                                   {"cv_pooled", detail::metrics_to_json(result.cv.pooled)},
                                   {"residual_q025", result.cv.q025},
                                   {"residual_q975", result.cv.q975}};
            nlohmann::json stages = nlohmann::json::array();
            for (const StageRecord& s : result.stages)
                stages.push_back({{"name", s.name}, {"duration_ms", s.duration_ms}});
            manifest["stages"] = stages;
            manifest["artifacts"] = {{"sample", "sample.csv"},
                                     {"results", "results.csv"},
                                     {"model", "model.txt"},
                                     {"cv_folds", "cv_folds.csv"},
                                     {"cv_residuals", "cv_residuals.csv"},
                                     {"cv_summary", "cv_summary.json"},
                                     {"ranked", "ranked.csv"}};
        } else {
            std::size_t dim = *space.find(config.mode_column);
            const Parameter& mode_param = space.parameters()[dim];
            nlohmann::json modes = nlohmann::json::array();
            for (std::size_t level = 0; level < mode_param.level_count(); ++level) {
                const std::string mode = mode_param.string_levels[level];
                DesignSpace sub = slice_space(space, config.mode_column, level);
                PipelineResult sub_result = run_single(config, sub, *backend_override, mode);
                nlohmann::json entry;
                entry["mode"] = mode;
                entry["n_grid"] = sub.size();
                entry["n_samples"] = sub_result.n_samples;
                entry["sample_d_min"] = sub_result.sample.d_min;
                entry["cv_pooled"] = detail::metrics_to_json(sub_result.cv.pooled);
                entry["artifacts"] = {
                    {"sample", detail::artifact_name("sample", mode, ".csv")},
                    {"results", detail::artifact_name("results", mode, ".csv")},
                    {"model", detail::artifact_name("model", mode, ".txt")},
                    {"cv_folds", detail::artifact_name("cv_folds", mode, ".csv")},
                    {"cv_residuals", detail::artifact_name("cv_residuals", mode, ".csv")},
                    {"cv_summary", detail::artifact_name("cv_summary", mode, ".json")},
                    {"ranked", detail::artifact_name("ranked", mode, ".csv")}};
                nlohmann::json stages = nlohmann::json::array();
                for (const StageRecord& s : sub_result.stages)
                    stages.push_back({{"name", s.name}, {"duration_ms", s.duration_ms}});
                entry["stages"] = stages;
                modes.push_back(entry);
                result = std::move(sub_result);  // keep the last mode's in-memory view
            }
            manifest["modes"] = modes;
        }
        manifest["status"] = "ok";
        atomic_write_file(manifest_path, manifest.dump(2) + "\n");
        result.manifest = manifest;
        return result;
    } catch (const StageError& e) {
        fail(e);
        throw;
    }
}

/// Reruns the configuration a previous manifest recorded. Deterministic
/// backends reproduce every artifact byte-identically.
inline PipelineResult run_from_manifest(const std::string& manifest_path,
                                        SimBackend* backend_override = nullptr) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("cannot parse manifest " + manifest_path + ": " + e.what());
    }
    if (!manifest.contains("manifest_version") ||
        manifest["manifest_version"].get<int>() != kManifestVersion)
        throw Error("unsupported manifest version in " + manifest_path);
    PipelineConfig config = detail::config_from_json(manifest.at("config"));
    return run_pipeline(config, backend_override);
}

}  // namespace paforge
