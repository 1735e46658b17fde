// paforge: sample a design grid, simulate the sample, train a boosted
// oblivious-tree surrogate, and rank the full grid against a P2dB target.
//
// Exit codes: 0 success, 1 usage error, 2 configuration/input error,
// 3 simulation or pipeline stage failure.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "paforge/paforge.hpp"

namespace fs = std::filesystem;
using namespace paforge;

namespace {

std::string require_artifact(const std::string& out_dir, const std::string& name,
                             const std::string& producer) {
    fs::path p = fs::path(out_dir) / name;
    if (!fs::exists(p))
        throw Error(p.string() + " not found; run `paforge " + producer + "` first");
    return read_file(p.string());
}

void print_fold_table(const CVReport& cv) {
    std::cout << "fold  r2        rmse_dbm  mae_dbm   n\n";
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
        const Metrics& m = cv.folds[f];
        std::cout << (f + 1) << "     " << (m.r2 ? format_double(*m.r2) : "undefined") << "  "
                  << format_double(m.rmse_dbm) << "  " << format_double(m.mae_dbm) << "  " << m.n
                  << '\n';
    }
    std::cout << "pooled: rmse=" << format_double(cv.pooled.rmse_dbm)
              << " dBm, mae=" << format_double(cv.pooled.mae_dbm) << " dBm";
    if (cv.pooled.r2) std::cout << ", r2=" << format_double(*cv.pooled.r2);
    std::cout << "\nresidual quantiles: [" << format_double(cv.q025) << ", "
              << format_double(cv.q975) << "] dBm\n";
}

void print_top_rows(const DesignSpace& space, const RankedReport& report, std::size_t top) {
    RankedReport head = top_n(report, top);
    if (head.rows.empty()) return;
    std::cout << "rank  point_id  predicted  ci_low   ci_high  p_meet  simulated\n";
    for (const RankedRow& row : head.rows) {
        std::cout << row.rank << "  " << row.point_id << "  "
                  << format_double(row.predicted_p2db_dbm) << "  " << format_double(row.ci_low_dbm)
                  << "  " << format_double(row.ci_high_dbm) << "  " << format_double(row.p_meet)
                  << "  " << (row.simulated ? "true" : "false") << "  ";
        auto idx = space.decode(row.point_id);
        for (std::size_t k = 0; k < space.dims(); ++k) {
            if (k) std::cout << ' ';
            std::cout << space.parameters()[k].name << '=' << space.parameters()[k].level_text(idx[k]);
        }
        std::cout << '\n';
    }
}

int cmd_space(const PipelineConfig& config, bool enumerate_points) {
    DesignSpace space = parse_space_file(config.space_path);
    if (enumerate_points) {
        std::cout << "point_id";
        for (const Parameter& p : space.parameters()) std::cout << ',' << p.name;
        std::cout << '\n';
        for (std::uint64_t id = 0; id < space.size(); ++id) {
            std::cout << id;
            auto idx = space.decode(id);
            for (std::size_t k = 0; k < space.dims(); ++k)
                std::cout << ',' << space.parameters()[k].level_text(idx[k]);
            std::cout << '\n';
        }
        return 0;
    }
    std::cout << "parameters: " << space.dims() << ", grid points: " << space.size() << '\n';
    for (const Parameter& p : space.parameters()) {
        std::cout << "  " << p.name << ": " << p.level_count()
                  << (p.is_categorical() ? " categorical levels" : " levels");
        if (!p.unit.empty()) std::cout << " [" << p.unit << "]";
        std::cout << '\n';
    }
    return 0;
}

int cmd_sample(const PipelineConfig& config) {
    DesignSpace space = parse_space_file(config.space_path);
    fs::create_directories(config.out_dir);
    SampleSet sample = run_sampling(config, space);
    atomic_write_file((fs::path(config.out_dir) / "sample.csv").string(),
                      write_sample_csv(space, sample));
    std::cout << "sampled " << sample.n << " of " << space.size() << " grid points ("
              << config.sampler << "), d_min=" << format_double(sample.d_min) << '\n';
    return 0;
}

int cmd_simulate(const PipelineConfig& config) {
    DesignSpace space = parse_space_file(config.space_path);
    auto ids = read_sample_csv(space, require_artifact(config.out_dir, "sample.csv", "sample"));
    auto backend = make_backend(config, space);
    BatchOptions opts;
    opts.workers = config.workers;
    auto results = simulate_batch(*backend, space, ids, opts);
    atomic_write_file((fs::path(config.out_dir) / "results.csv").string(),
                      write_results_csv(space, results));
    std::cout << "simulated " << results.size() << " points via " << backend->name() << '\n';
    return 0;
}

Dataset load_dataset(const PipelineConfig& config, const DesignSpace& space) {
    auto results = CsvReplayBackend::read_results_csv(
        space, require_artifact(config.out_dir, "results.csv", "simulate"));
    FeatureBuild build = build_features(space, results);
    for (const std::string& w : build.warnings) std::cerr << "warning: " << w << '\n';
    return build.dataset;
}

int cmd_train(const PipelineConfig& config) {
    DesignSpace space = parse_space_file(config.space_path);
    Dataset dataset = load_dataset(config, space);
    BoostConfig bc = config.boost;
    bc.seed = config.model_seed();
    BoostedModel model = fit(dataset, bc);
    atomic_write_file((fs::path(config.out_dir) / "model.txt").string(), save_model(model));
    std::cout << "trained " << model.trees.size() << " trees on " << dataset.rows.size()
              << " rows; final training rmse=" << format_double(model.rmse_curve.back())
              << " dBm\nimportances:\n";
    for (std::size_t f = 0; f < model.schema.arity(); ++f)
        std::cout << "  " << model.schema.names[f] << ": " << format_double(model.importances[f])
                  << '\n';
    return 0;
}

int cmd_cv(const PipelineConfig& config) {
    DesignSpace space = parse_space_file(config.space_path);
    Dataset dataset = load_dataset(config, space);
    BoostConfig bc = config.boost;
    bc.seed = config.model_seed();
    CVReport cv = cross_validate(dataset, bc, config.k, config.folds_seed());
    fs::path out(config.out_dir);
    atomic_write_file((out / "cv_folds.csv").string(), write_cv_csv(cv));
    atomic_write_file((out / "cv_residuals.csv").string(), write_residuals_csv(cv));
    nlohmann::json summary;
    summary["k"] = cv.k;
    summary["pooled"] = detail::metrics_to_json(cv.pooled);
    summary["residual_quantiles"] = {{"q025", cv.q025}, {"q975", cv.q975}};
    summary["mean_residual"] = cv.mean_residual;
    atomic_write_file((out / "cv_summary.json").string(), summary.dump(2) + "\n");
    print_fold_table(cv);
    return 0;
}

int cmd_predict(const PipelineConfig& config) {
    DesignSpace space = parse_space_file(config.space_path);
    BoostedModel model = load_model(require_artifact(config.out_dir, "model.txt", "train"));
    std::vector<std::uint64_t> sampled;
    fs::path sample_path = fs::path(config.out_dir) / "sample.csv";
    if (fs::exists(sample_path)) {
        sampled = read_sample_csv(space, read_file(sample_path.string()));
    } else {
        std::cerr << "warning: no sample.csv; the simulated flag will be false everywhere\n";
    }
    auto predictions = predict_full_space(model, space, sampled);
    atomic_write_file((fs::path(config.out_dir) / "predictions.csv").string(),
                      write_predictions_csv(predictions));
    std::cout << "predicted " << predictions.size() << " grid points\n";
    return 0;
}

int cmd_rank(const PipelineConfig& config) {
    DesignSpace space = parse_space_file(config.space_path);
    auto predictions =
        read_predictions_csv(require_artifact(config.out_dir, "predictions.csv", "predict"));
    auto residuals =
        read_residuals_csv(require_artifact(config.out_dir, "cv_residuals.csv", "cv"));
    std::vector<double> pool;
    pool.reserve(residuals.size());
    for (const auto& [id, r] : residuals) pool.push_back(r);
    RankedReport report = rank(predictions, pool, config.target);
    for (const std::string& w : report.warnings) std::cerr << "warning: " << w << '\n';
    atomic_write_file((fs::path(config.out_dir) / "ranked.csv").string(),
                      write_ranked_csv(space, report));
    std::cout << "ranked " << report.rows.size() << " points against target "
              << format_double(config.target.target_p2db_dbm) << " dBm\n";
    print_top_rows(space, report, config.top);
    return 0;
}

int cmd_pipeline(const PipelineConfig& config, const std::string& manifest_path) {
    PipelineResult result =
        manifest_path.empty() ? run_pipeline(config) : run_from_manifest(manifest_path);
    const auto& m = result.manifest;
    if (m.contains("metrics")) {
        std::cout << "pipeline complete: " << m["metrics"]["n_samples"] << " of "
                  << m["metrics"]["n_grid"] << " points simulated\n";
        print_fold_table(result.cv);
        print_top_rows(result.space, result.ranked, config.top);
    } else {
        std::cout << "pipeline complete: " << m["modes"].size() << " modes\n";
        for (const auto& entry : m["modes"])
            std::cout << "  mode " << entry["mode"].get<std::string>() << ": rmse="
                      << entry["cv_pooled"]["rmse_dbm"].get<double>() << " dBm over "
                      << entry["n_samples"] << " samples\n";
    }
    return 0;
}

int cmd_benchmark(const PipelineConfig& config, std::size_t n_seeds) {
    DesignSpace space = parse_space_file(config.space_path);
    auto backend = make_backend(config, space);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(config.seed + i);
    SamplerConfig sc;
    sc.fraction = config.fraction;
    auto rows = benchmark_samplers(space, *backend, config.fraction, seeds, sc, config.boost);
    fs::create_directories(config.out_dir);
    atomic_write_file((fs::path(config.out_dir) / "benchmark.csv").string(),
                      write_benchmark_csv(rows));
    for (const auto& [name, stats] : summarize_benchmark(rows)) {
        std::cout << name << ": mean r2=" << format_double(stats.mean_r2)
                  << " (std " << format_double(stats.std_r2)
                  << "), mean rmse=" << format_double(stats.mean_rmse) << " dBm (std "
                  << format_double(stats.std_rmse)
                  << "), mean d_min=" << format_double(stats.mean_d_min) << " over " << stats.runs
                  << " runs\n";
    }
    return 0;
}

void add_boost_flags(CLI::App* cmd, PipelineConfig& config) {
    cmd->add_option("--iterations", config.boost.iterations, "Boosting iterations");
    cmd->add_option("--depth", config.boost.depth, "Oblivious tree depth");
    cmd->add_option("--learning-rate", config.boost.learning_rate, "Shrinkage per tree");
    cmd->add_option("--l2", config.boost.l2_leaf_reg, "L2 leaf regularization");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-space sweep accelerator: MaxMin LHS sampling, simulation, "
                 "boosted oblivious-tree surrogate, ranked P2dB report"};
    app.require_subcommand(1);

    PipelineConfig config;
    bool enumerate_points = false;
    std::string manifest_path;
    std::size_t n_seeds = 20;

    auto add_space = [&](CLI::App* cmd, bool required = true) {
        auto* opt = cmd->add_option("--space", config.space_path, "Design space file");
        if (required) opt->required();
    };
    auto add_out = [&](CLI::App* cmd) {
        cmd->add_option("--out", config.out_dir, "Artifact directory");
    };
    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", config.seed, "Master seed (module seeds derive from it)");
    };
    auto add_backend = [&](CLI::App* cmd) {
        cmd->add_option("--backend", config.backend,
                        "synthetic | csv:<path> | command:<cmd> (or command + PAFORGE_SIM_CMD)");
    };

    auto* c_space = app.add_subcommand("space", "Validate a design space file");
    add_space(c_space);
    c_space->add_flag("--enumerate", enumerate_points, "Print every grid point as CSV");

    auto* c_sample = app.add_subcommand("sample", "Select grid points to simulate");
    add_space(c_sample);
    add_out(c_sample);
    add_seed(c_sample);
    c_sample->add_option("--fraction", config.fraction, "Fraction of the grid to sample");
    c_sample->add_option("--sampler", config.sampler, "maxmin | random");
    c_sample->add_option("--k", config.k, "CV fold count (sets the sample-size floor)");

    auto* c_simulate = app.add_subcommand("simulate", "Run the backend over sample.csv");
    add_space(c_simulate);
    add_out(c_simulate);
    add_seed(c_simulate);
    add_backend(c_simulate);
    c_simulate->add_option("--workers", config.workers, "Concurrent backend calls (0 = auto)");

    auto* c_train = app.add_subcommand("train", "Fit the boosted model on results.csv");
    add_space(c_train);
    add_out(c_train);
    add_seed(c_train);
    add_boost_flags(c_train, config);

    auto* c_cv = app.add_subcommand("cv", "Cross-validate on results.csv");
    add_space(c_cv);
    add_out(c_cv);
    add_seed(c_cv);
    add_boost_flags(c_cv, config);
    c_cv->add_option("--k", config.k, "Fold count");

    auto* c_predict = app.add_subcommand("predict", "Predict every grid point with model.txt");
    add_space(c_predict);
    add_out(c_predict);

    auto* c_rank = app.add_subcommand("rank", "Rank predictions against a P2dB target");
    add_space(c_rank);
    add_out(c_rank);
    c_rank->add_option("--target", config.target.target_p2db_dbm, "Minimum acceptable P2dB (dBm)")
        ->required();
    c_rank->add_option("--tolerance", config.target.tolerance_dbm, "Accuracy band half-width (dBm)");
    c_rank->add_option("--top", config.top, "Rows to print");

    auto* c_pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
    add_space(c_pipeline, false);
    add_out(c_pipeline);
    add_seed(c_pipeline);
    add_backend(c_pipeline);
    add_boost_flags(c_pipeline, config);
    c_pipeline->add_option("--fraction", config.fraction, "Fraction of the grid to sample");
    c_pipeline->add_option("--sampler", config.sampler, "maxmin | random");
    c_pipeline->add_option("--k", config.k, "Fold count");
    c_pipeline->add_option("--target", config.target.target_p2db_dbm, "Minimum acceptable P2dB (dBm)");
    c_pipeline->add_option("--tolerance", config.target.tolerance_dbm,
                           "Accuracy band half-width (dBm)");
    c_pipeline->add_option("--workers", config.workers, "Concurrent backend calls (0 = auto)");
    c_pipeline->add_option("--mode-column", config.mode_column,
                           "Categorical parameter to train per-mode models for");
    c_pipeline->add_option("--top", config.top, "Rows to print");
    c_pipeline->add_option("--manifest", manifest_path, "Re-run the config a manifest records");

    auto* c_benchmark = app.add_subcommand("benchmark", "Compare maxmin vs random sampling");
    add_space(c_benchmark);
    add_out(c_benchmark);
    add_seed(c_benchmark);
    add_backend(c_benchmark);
    add_boost_flags(c_benchmark, config);
    c_benchmark->add_option("--fraction", config.fraction, "Fraction of the grid to sample");
    c_benchmark->add_option("--seeds", n_seeds, "Number of seeds (master seed + 0..n-1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c_space->parsed()) return cmd_space(config, enumerate_points);
        if (c_sample->parsed()) return cmd_sample(config);
        if (c_simulate->parsed()) return cmd_simulate(config);
        if (c_train->parsed()) return cmd_train(config);
        if (c_cv->parsed()) return cmd_cv(config);
        if (c_predict->parsed()) return cmd_predict(config);
        if (c_rank->parsed()) return cmd_rank(config);
        if (c_pipeline->parsed()) return cmd_pipeline(config, manifest_path);
        if (c_benchmark->parsed()) return cmd_benchmark(config, n_seeds);
    } catch (const BatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        for (const SimulationFailure& f : e.failures())
            std::cerr << "  point " << f.point_id << ": " << f.message << " (after " << f.attempts
                      << " attempts)\n";
        return 3;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
