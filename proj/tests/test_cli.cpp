#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spectracube/io.hpp"
#include "spectracube/maps.hpp"
#include "spectracube/phantom.hpp"
#include "spectracube/metrics.hpp"
#include "spectracube/rng.hpp"
#include "test_util.hpp"

#ifndef SPECTRACUBE_BIN
#define SPECTRACUBE_BIN "spectracube"
#endif

namespace fs = std::filesystem;
using namespace spectracube;
using nlohmann::json;

namespace {

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "spectracube_cli_tests";
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPECTRACUBE_BIN) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("synth renders frames, truth cubes and the scale sidecar") {
    const fs::path dir = work_dir() / "synth";
    fs::remove_all(dir);
    const int rc = run_cli("synth --script " + q(test_util::data_dir() / "scene_example.json") +
                           " --ext " + q(test_util::extinction_csv()) + " --frames " +
                           q(dir / "frames") + " --truth " + q(dir / "truth") + " --seed 5");
    REQUIRE(rc == 0);
    CHECK(fs::exists(dir / "frames" / "frame_00000.png"));
    CHECK(fs::exists(dir / "frames" / "render_scale.json"));
    const Hypercube cube = read_cube(dir / "truth" / "cube_00000.hsc");
    CHECK(cube.rows == 150);
    CHECK(cube.cols == 100);
    CHECK(cube.grid.count == 341);
}

TEST_CASE("pipeline end to end on the example scene") {
    const fs::path dir = work_dir() / "pipeline";
    fs::remove_all(dir);
    fs::create_directories(dir);

    json cfg;
    cfg["out_dir"] = (dir / "out").string();
    cfg["seed"] = 11;
    cfg["threads"] = 2;
    cfg["extinction_csv"] = test_util::extinction_csv().string();
    cfg["scene"] = (test_util::data_dir() / "scene_example.json").string();
    cfg["line_cols"] = {48, 49, 50, 51, 52};  // 5 x 150 rows = 750 points
    std::ofstream(dir / "config.json") << cfg.dump(2);

    const int rc = run_cli("pipeline --config " + q(dir / "config.json"));
    REQUIRE(rc == 0);

    for (const char* name : {"truth.hsc", "image.png", "line_rgb.csv", "line_spectra.csv",
                             "sampling.json", "model.hsl", "recovered.hsc",
                             "maps_statistical.hsc", "nn.mdl", "maps_nn.hsc", "report.json",
                             "maps_statistical_spo2.png", "maps_nn_spo2.png"})
        CHECK(fs::exists(dir / "out" / name));
    CHECK(fs::exists(dir / "out" / "report.json.prov.json"));

    const json report = read_json_file(dir / "out" / "report.json");
    CHECK(report["sam_truth_vs_recovered"]["mean_rad"].get<double>() < 0.01);
    CHECK(report["ssim_spo2_stat_vs_nn"].get<double>() > 0.9);
    CHECK(report["sampling_pass"].get<bool>());
    CHECK(report["regression"]["m_train"].get<int>() == 600);
    CHECK(report["regression"]["m_test"].get<int>() == 150);

    // maps containers round trip through the reader
    const HemodynamicMaps maps = read_maps(dir / "out" / "maps_statistical.hsc");
    CHECK(maps.rows == 150);
    CHECK(maps.spo2.minCoeff() >= 0.0);
    CHECK(maps.spo2.maxCoeff() <= 1.0);
}

TEST_CASE("pipeline config errors exit with the config code") {
    const fs::path dir = work_dir() / "badcfg";
    fs::remove_all(dir);
    fs::create_directories(dir);

    json cfg;
    cfg["out_dir"] = (dir / "out").string();
    cfg["extinction_csv"] = (dir / "missing.csv").string();
    cfg["scene"] = (test_util::data_dir() / "scene_example.json").string();
    std::ofstream(dir / "config.json") << cfg.dump(2);
    CHECK(run_cli("pipeline --config " + q(dir / "config.json")) == 2);

    json unknown = cfg;
    unknown["extinction_csv"] = test_util::extinction_csv().string();
    unknown["surprise"] = 1;
    std::ofstream(dir / "config2.json") << unknown.dump(2);
    CHECK(run_cli("pipeline --config " + q(dir / "config2.json")) == 2);

    CHECK(run_cli("pipeline --config " + q(dir / "nonexistent.json")) == 2);
}

TEST_CASE("normalize, colorfit and metrics subcommands") {
    const fs::path dir = work_dir() / "misc";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // image normalization with flat-field scalar references
    Rng rng(61);
    RgbImage img(6, 5);
    for (auto& v : img.data) v = static_cast<float>(0.2 + 0.5 * rng.uniform01());
    write_image_png(img, dir / "in.png", 16);
    REQUIRE(run_cli("normalize --white 0.9,0.9,0.9 --black 0.1,0.1,0.1 --in " + q(dir / "in.png") +
                    " --out " + q(dir / "norm.png")) == 0);
    const RgbImage norm = read_image(dir / "norm.png");
    CHECK(norm.at(0, 0, 0) ==
          doctest::Approx((img.at(0, 0, 0) - 0.1) / 0.8).epsilon(1e-3));
    CHECK(fs::exists(dir / "norm.png.prov.json"));

    // colorfit on matched samples
    CsvTable samples;
    samples.columns = {"r", "g", "b"};
    samples.data.assign(3, {});
    for (int i = 0; i < 50; ++i)
        for (int ch = 0; ch < 3; ++ch)
            samples.data[static_cast<size_t>(ch)].push_back(rng.uniform01());
    write_csv(samples, dir / "src.csv");
    write_csv(samples, dir / "dst.csv");
    REQUIRE(run_cli("colorfit --src " + q(dir / "src.csv") + " --dst " + q(dir / "dst.csv") +
                    " --out " + q(dir / "cc.json")) == 0);
    const json cc = read_json_file(dir / "cc.json");
    CHECK(cc["M"][0][0].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(cc["M"][0][1].get<double>() == doctest::Approx(0.0).epsilon(1e-8));

    // sam of a cube against itself
    WavelengthGrid grid;
    grid.count = 4;
    Hypercube cube(3, 3, grid);
    for (auto& v : cube.data) v = static_cast<float>(0.3 + rng.uniform01());
    write_cube(cube, dir / "cube.hsc");
    REQUIRE(run_cli("metrics sam --a " + q(dir / "cube.hsc") + " --b " + q(dir / "cube.hsc") +
                    " --report " + q(dir / "sam.json")) == 0);
    CHECK(read_json_file(dir / "sam.json")["mean_rad"].get<double>() == doctest::Approx(0.0));
}

TEST_CASE("video command produces a phase report from synthesized frames") {
    const fs::path dir = work_dir() / "video";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // oscillating-saturation scene rendered to frames
    SceneScript scene;
    scene.rows = 32;
    scene.cols = 24;
    scene.b1 = FieldSpec::bands_y(0.55, 0.586, {{7.0, 0.0, 2.0, 0.12}, {16.0, 0.0, 3.0, -0.09}});
    scene.b2 = FieldSpec::constant(-1.0);
    scene.b3 = FieldSpec::constant(0.05);
    scene.b4 = FieldSpec::bands_y(1.2, 1.335, {{7.0, 0.0, 2.0, 0.45}, {16.0, 0.0, 3.0, -0.34}});
    scene.b5 = FieldSpec::bands_y(0.65, 0.734, {{7.0, 0.0, 2.0, 0.28}, {16.0, 0.0, 3.0, -0.21}});
    scene.frame_count = 64;
    scene.frame_interval_s = 0.25;  // 4 Hz
    scene.b5_dynamics.kind = B5Dynamics::Kind::Oscillation;
    scene.b5_dynamics.freq_hz = 0.05;
    scene.b5_dynamics.amplitude = 0.15;
    std::ofstream(dir / "scene.json") << scene_to_json_string(scene);

    REQUIRE(run_cli("synth --script " + q(dir / "scene.json") + " --ext " +
                    q(test_util::extinction_csv()) + " --frames " + q(dir / "frames") +
                    " --truth " + q(dir / "truth") + " --seed 3") == 0);

    // model trained on the first frame's center line
    const Hypercube truth = read_cube(dir / "truth" / "cube_00000.hsc");
    const RgbImage frame0 = read_image(dir / "frames" / "frame_00000.png");
    const SampledLine line = extract_line(truth, frame0, 12);
    write_line(line, dir / "line_rgb.csv", dir / "line_spectra.csv");
    REQUIRE(run_cli("train-nn --line " + q(dir / "line_rgb.csv") + " " +
                    q(dir / "line_spectra.csv") + " --ext " + q(test_util::extinction_csv()) +
                    " --labels-from fit --out " + q(dir / "nn.mdl") + " --seed 9") == 0);

    // thresholds wide open so the mask is never empty on a phantom frame
    std::ofstream(dir / "thresholds.json")
        << R"({"vessel": {"r": [0.0, 1.0], "g": [0.0, 1.0], "b": [0.0, 1.0]},
               "avascular": {"r": [0.0, 0.0], "g": [0.0, 0.0], "b": [0.0, 0.0]}})";

    REQUIRE(run_cli("video --frames " + q(dir / "frames") + " --model " + q(dir / "nn.mdl") +
                    " --fs 4 --mask-thresholds " + q(dir / "thresholds.json") + " --report " +
                    q(dir / "phase.json") + " --series-out " + q(dir / "series.csv")) == 0);
    const json phase = read_json_file(dir / "phase.json");
    CHECK(phase["frames"].get<int>() == 64);
    CHECK(std::isfinite(phase["phase_deg"].get<double>()));
    CHECK(fs::exists(dir / "series.csv"));

    // hbo2 = b4*b5 and hb = b4*(1-b5) should move in antiphase over frames
    const CsvTable series = read_csv(dir / "series.csv");
    const auto& dhbo2 = series.data[1];
    const auto& dhb = series.data[2];
    double dot = 0.0;
    for (size_t i = 0; i < dhbo2.size(); ++i) dot += dhbo2[i] * dhb[i];
    CHECK(dot < 0.0);
}

TEST_CASE("line-to-maps workflow through the individual subcommands") {
    const fs::path dir = work_dir() / "workflow";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // small phantom inputs
    const ExtinctionTable ext = load_extinction(test_util::extinction_csv(), WavelengthGrid{});
    SceneScript scene = test_util::oracle_scene(40, 24);
    const Hypercube truth = render_cube(scene, ext, 0);
    const RgbImage image =
        render_rgb(truth, SensitivityFunction::gaussian_default(ext.grid), 0.0, 21).image;
    write_image_png(image, dir / "image.png", 16);
    const SampledLine line = merge_lines(
        {extract_line(truth, image, 11), extract_line(truth, image, 12)});
    write_line(line, dir / "line_rgb.csv", dir / "line_spectra.csv");

    // short lines carry noisy quantile statistics; non-strict mode reports
    // and proceeds either way (exit 0), strict mode fails the stage
    REQUIRE(run_cli("validate-sampling --image " + q(dir / "image.png") + " --line " +
                    q(dir / "line_rgb.csv") + " --report " + q(dir / "sampling.json")) == 0);
    const json sampling = read_json_file(dir / "sampling.json");
    CHECK(sampling.contains("pass"));
    CHECK(sampling["range_coverage"].get<double>() > 0.9);
    if (!sampling["pass"].get<bool>())
        CHECK(run_cli("validate-sampling --image " + q(dir / "image.png") + " --line " +
                      q(dir / "line_rgb.csv") + " --report " + q(dir / "sampling2.json") +
                      " --strict") == 1);

    REQUIRE(run_cli("train-regression --line " + q(dir / "line_rgb.csv") + " " +
                    q(dir / "line_spectra.csv") + " --out " + q(dir / "model.hsl") +
                    " --seed 4 --auto-ridge --residuals " + q(dir / "residuals.csv")) == 0);
    CHECK(fs::exists(dir / "residuals.csv"));

    REQUIRE(run_cli("recover --model " + q(dir / "model.hsl") + " --image " +
                    q(dir / "image.png") + " --out " + q(dir / "recovered.hsc") +
                    " --mask-out " + q(dir / "mask.png")) == 0);
    CHECK(fs::exists(dir / "mask.png"));

    REQUIRE(run_cli("fit-hemo --cube " + q(dir / "recovered.hsc") + " --ext " +
                    q(test_util::extinction_csv()) + " --out " + q(dir / "maps.hsc") +
                    " --threads 2 --png-out " + q(dir / "maps")) == 0);
    CHECK(fs::exists(dir / "maps_spo2.png"));

    REQUIRE(run_cli("train-nn --line " + q(dir / "line_rgb.csv") + " " +
                    q(dir / "line_spectra.csv") + " --ext " + q(test_util::extinction_csv()) +
                    " --labels-from fit --out " + q(dir / "nn.mdl") + " --seed 6 --epochs 15") ==
            0);
    REQUIRE(run_cli("infer-nn --model " + q(dir / "nn.mdl") + " --image " + q(dir / "image.png") +
                    " --out " + q(dir / "maps_nn.hsc")) == 0);

    REQUIRE(run_cli("metrics ssim --a " + q(dir / "maps.hsc") + " --b " + q(dir / "maps_nn.hsc") +
                    " --plane spo2 --report " + q(dir / "ssim.json")) == 0);
    CHECK(read_json_file(dir / "ssim.json")["value"].get<double>() > 0.5);

    REQUIRE(run_cli("metrics residuals --truth " + q(dir / "line_spectra.csv") + " --estimate " +
                    q(dir / "line_spectra.csv") + " --report " + q(dir / "res.json")) == 0);
    const json res = read_json_file(dir / "res.json");
    CHECK(res["mean_residual"][0].get<double>() == 0.0);

    // the recovered cube matches the truth on this noiseless loop
    const Hypercube recovered = read_cube(dir / "recovered.hsc");
    const auto map = sam_map(truth, recovered);
    CHECK(map.mean < 0.02);  // 16-bit frame quantization adds a little angle
}

TEST_CASE("every documented subcommand exposes help") {
    for (const char* sub : {"normalize", "colorfit", "validate-sampling", "train-regression",
                            "recover", "fit-hemo", "train-nn", "infer-nn", "metrics", "video",
                            "synth", "pipeline"})
        CHECK(run_cli(std::string(sub) + " --help") == 0);
}
