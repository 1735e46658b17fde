#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "fixture.hpp"
#include "paforge/pipeline.hpp"

using namespace paforge;
namespace fs = std::filesystem;

namespace {

const char* kBenchSpace =
    "param Vcc continuous grid 3.0 3.3 3.6\n"
    "param Temp continuous grid -40 0 25 60 85\n";

const char* kModeSpace =
    "param A continuous grid 0 1 2 3\n"
    "param Mode categorical values lo hi\n";

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "paforge_pipeline_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_space(const fs::path& dir, const char* text) {
    fs::path p = dir / "space.txt";
    atomic_write_file(p, text);
    return p.string();
}

PipelineConfig base_config(const fs::path& dir, const char* space_text) {
    PipelineConfig config;
    config.space_path = write_space(dir, space_text);
    config.out_dir = (dir / "out").string();
    config.seed = 11;
    config.boost.iterations = 25;
    config.target.target_p2db_dbm = 27.5;
    return config;
}

class AlwaysFailBackend : public SimBackend {
public:
    double simulate_point(const DesignSpace&, std::uint64_t) override {
        throw Error("rig offline");
    }
    std::string name() const override { return "broken"; }
};

}  // namespace

TEST_CASE("sample_count applies ceil, floor, and cap", "[pipeline]") {
    CHECK(sample_count(0.35, 1755, 5, 6) == 615);  // ceil(614.25)
    CHECK(sample_count(0.35, 16, 5, 2) == 6);      // ceil(5.6)
    CHECK(sample_count(0.01, 16, 5, 2) == 6);      // floored at k+1
    CHECK(sample_count(0.01, 16, 2, 8) == 9);      // floored at d+1
    CHECK(sample_count(1.0, 4, 5, 2) == 4);        // capped at the grid
    CHECK(sample_count(0.5, 1000, 3, 9) == 500);
}

TEST_CASE("config validation rejects bad values", "[pipeline]") {
    PipelineConfig config;
    CHECK_THROWS_AS(config.validate(), Error);  // no space path
    config.space_path = "space.txt";
    CHECK_NOTHROW(config.validate());

    auto broken = config;
    broken.fraction = 0.0;
    CHECK_THROWS_AS(broken.validate(), Error);
    broken = config;
    broken.sampler = "sobol";
    CHECK_THROWS_AS(broken.validate(), Error);
    broken = config;
    broken.k = 1;
    CHECK_THROWS_AS(broken.validate(), Error);
    broken = config;
    broken.backend = "ftp:somewhere";
    CHECK_THROWS_AS(broken.validate(), Error);
    broken = config;
    broken.noise_sigma_dbm = -1.0;
    CHECK_THROWS_AS(broken.validate(), Error);

    CHECK(config.sampler_seed() == 1);
    config.seed = 10;
    CHECK(config.sampler_seed() == 11);
    CHECK(config.noise_seed() == 12);
    CHECK(config.folds_seed() == 13);
    CHECK(config.model_seed() == 14);
}

TEST_CASE("make_backend resolves the backend spec", "[pipeline]") {
    fs::path dir = fresh_dir("backend");
    DesignSpace space = parse_space(kBenchSpace);
    PipelineConfig config;
    config.space_path = "unused";

    config.backend = "synthetic";
    CHECK(make_backend(config, space)->name() == "synthetic");

    SyntheticBackend truth;
    auto results = simulate_batch(truth, space, {0, 1, 2});
    fs::path csv = dir / "results.csv";
    atomic_write_file(csv, write_results_csv(space, results));
    config.backend = "csv:" + csv.string();
    auto replay = make_backend(config, space);
    CHECK(replay->name() == "csv");
    CHECK(replay->simulate_point(space, 1) == results[1].p2db_dbm);

    config.backend = "csv:";
    CHECK_THROWS_AS(make_backend(config, space), Error);

    config.backend = "command:echo 1";
    CHECK(make_backend(config, space)->name() == "command");

    unsetenv("PAFORGE_SIM_CMD");
    config.backend = "command";
    CHECK_THROWS_AS(make_backend(config, space), Error);
    fs::remove_all(dir);
}

TEST_CASE("run_sampling honors the sampler choice deterministically", "[pipeline]") {
    DesignSpace space = parse_space(kBenchSpace);
    PipelineConfig config;
    config.space_path = "unused";
    config.seed = 3;

    SampleSet maxmin = run_sampling(config, space);
    CHECK(maxmin.n == 6);
    CHECK(maxmin.d_min > 0.0);
    CHECK(run_sampling(config, space).grid_ids == maxmin.grid_ids);

    config.sampler = "random";
    SampleSet random = run_sampling(config, space);
    CHECK(random.n == 6);
    CHECK(random.grid_ids != maxmin.grid_ids);
}

TEST_CASE("run_pipeline writes every artifact and a manifest", "[pipeline]") {
    fs::path dir = fresh_dir("full");
    PipelineConfig config = base_config(dir, kBenchSpace);
    PipelineResult result = run_pipeline(config);

    for (const char* name : {"sample.csv", "results.csv", "model.txt", "cv_folds.csv",
                             "cv_residuals.csv", "cv_summary.json", "ranked.csv", "manifest.json"})
        CHECK(fs::exists(fs::path(config.out_dir) / name));

    CHECK(result.n_samples == 6);
    CHECK(result.results.size() == 6);
    CHECK(result.ranked.rows.size() == 15);
    std::size_t simulated = 0;
    for (const auto& row : result.ranked.rows) simulated += row.simulated ? 1 : 0;
    CHECK(simulated == 6);
    CHECK(result.ranked.model_description == "paforge-model v1, 25 trees");

    const auto& manifest = result.manifest;
    CHECK(manifest.at("status") == "ok");
    CHECK(manifest.at("manifest_version") == 1);
    CHECK(manifest.at("tool").at("name") == "paforge");
    CHECK(manifest.at("seeds").at("master") == 11);
    CHECK(manifest.at("seeds").at("model") == 15);
    CHECK(manifest.at("metrics").at("n_grid") == 15);
    CHECK(manifest.at("metrics").at("n_samples") == 6);
    CHECK(manifest.at("config").at("seed") == 11);
    CHECK(manifest.at("artifacts").at("ranked") == "ranked.csv");
    CHECK(!manifest.at("stages").empty());

    SECTION("identical config reproduces ranked bytes") {
        std::string first = read_file(fs::path(config.out_dir) / "ranked.csv");
        PipelineConfig again = config;
        again.out_dir = (dir / "out2").string();
        run_pipeline(again);
        CHECK(read_file(fs::path(again.out_dir) / "ranked.csv") == first);
    }

    SECTION("run_from_manifest reproduces the artifacts in place") {
        std::string first = read_file(fs::path(config.out_dir) / "ranked.csv");
        std::string model_first = read_file(fs::path(config.out_dir) / "model.txt");
        fs::remove(fs::path(config.out_dir) / "ranked.csv");
        run_from_manifest((fs::path(config.out_dir) / "manifest.json").string());
        CHECK(read_file(fs::path(config.out_dir) / "ranked.csv") == first);
        CHECK(read_file(fs::path(config.out_dir) / "model.txt") == model_first);
    }

    fs::remove_all(dir);
}

TEST_CASE("a failing backend leaves a failed manifest naming the stage", "[pipeline]") {
    fs::path dir = fresh_dir("fail");
    PipelineConfig config = base_config(dir, kBenchSpace);
    AlwaysFailBackend backend;
    CHECK_THROWS_AS(run_pipeline(config, &backend), StageError);

    auto manifest = nlohmann::json::parse(read_file(fs::path(config.out_dir) / "manifest.json"));
    CHECK(manifest.at("status") == "failed");
    CHECK(manifest.at("failed_stage") == "simulate");
    std::string error = manifest.at("error").get<std::string>();
    CHECK(error.find("rig offline") != std::string::npos);
    CHECK(!fs::exists(fs::path(config.out_dir) / "ranked.csv"));
    fs::remove_all(dir);
}

TEST_CASE("mode_column fans out into per-mode artifacts", "[pipeline]") {
    fs::path dir = fresh_dir("modes");
    PipelineConfig config = base_config(dir, kModeSpace);
    config.mode_column = "Mode";
    config.k = 2;
    PipelineResult result = run_pipeline(config);

    for (const char* name : {"sample_lo.csv", "ranked_lo.csv", "model_lo.txt", "sample_hi.csv",
                             "ranked_hi.csv", "model_hi.txt", "manifest.json"})
        CHECK(fs::exists(fs::path(config.out_dir) / name));
    CHECK(!fs::exists(fs::path(config.out_dir) / "ranked.csv"));

    const auto& modes = result.manifest.at("modes");
    REQUIRE(modes.size() == 2);
    CHECK(modes[0].at("mode") == "lo");
    CHECK(modes[1].at("mode") == "hi");
    CHECK(modes[0].at("n_grid") == 4);
    CHECK(modes[0].at("artifacts").at("ranked") == "ranked_lo.csv");

    // Per-mode ids index the 4-point slice, so every id is below 4.
    auto ids = read_sample_csv(slice_space(parse_space(kModeSpace), "Mode", 0),
                               read_file(fs::path(config.out_dir) / "sample_lo.csv"));
    for (auto id : ids) CHECK(id < 4);

    config.mode_column = "A";
    CHECK_THROWS_AS(run_pipeline(config), Error);
    config.mode_column = "Missing";
    CHECK_THROWS_AS(run_pipeline(config), Error);
    fs::remove_all(dir);
}

TEST_CASE("slice_space pins one categorical level", "[pipeline]") {
    DesignSpace space = parse_space(kModeSpace);
    DesignSpace lo = slice_space(space, "Mode", 0);
    CHECK(lo.size() == 4);
    CHECK(lo.parameters()[1].string_levels == std::vector<std::string>(1, "lo"));
    CHECK_THROWS_AS(slice_space(space, "A", 0), Error);
    CHECK_THROWS_AS(slice_space(space, "Nope", 0), Error);
}

TEST_CASE("run_from_manifest validates its input", "[pipeline]") {
    fs::path dir = fresh_dir("manifest");
    CHECK_THROWS_AS(run_from_manifest((dir / "missing.json").string()), Error);

    fs::path garbled = dir / "garbled.json";
    atomic_write_file(garbled, "not json");
    CHECK_THROWS_AS(run_from_manifest(garbled.string()), Error);

    fs::path old = dir / "old.json";
    atomic_write_file(old, "{\"manifest_version\": 99}");
    CHECK_THROWS_AS(run_from_manifest(old.string()), Error);
    fs::remove_all(dir);
}
