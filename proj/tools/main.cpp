#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spectracube/io.hpp"
#include "spectracube/maps.hpp"
#include "spectracube/metrics.hpp"
#include "spectracube/neural.hpp"
#include "spectracube/phantom.hpp"
#include "spectracube/preprocess.hpp"
#include "spectracube/provenance.hpp"
#include "spectracube/regression.hpp"
#include "spectracube/render.hpp"
#include "spectracube/sampling.hpp"
#include "spectracube/signal.hpp"
#include "spectracube/tissue.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spectracube;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStageFailure = 1;
constexpr int kExitConfigError = 2;

std::string g_command_line;

Provenance make_provenance(const std::vector<fs::path>& inputs, json options = {}) {
    Provenance prov;
    prov.command = g_command_line;
    for (const auto& in : inputs) prov.add_input(in);
    prov.options = std::move(options);
    return prov;
}

void write_json(const json& doc, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

Eigen::Vector3d parse_triple(const std::string& text) {
    Eigen::Vector3d v;
    std::stringstream ss(text);
    std::string cell;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("expected r,g,b triple");
        v[i] = std::stod(cell);
    }
    return v;
}

std::pair<double, double> parse_window(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::runtime_error("expected lo:hi window");
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
}

Eigen::MatrixXd read_rgb_samples_csv(const fs::path& path) {
    const CsvTable table = read_csv(path);
    const int cols[3] = {table.find_column("r"), table.find_column("g"), table.find_column("b")};
    if (cols[0] < 0 || cols[1] < 0 || cols[2] < 0)
        throw std::runtime_error(path.string() + ": expected columns r,g,b");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(table.row_count()), 3);
    for (size_t i = 0; i < table.row_count(); ++i)
        for (int ch = 0; ch < 3; ++ch)
            m(static_cast<Eigen::Index>(i), ch) = table.data[static_cast<size_t>(cols[ch])][i];
    return m;
}

json sampling_report_json(const SamplingReport& report) {
    json doc;
    const char* names[3] = {"r", "g", "b"};
    for (int ch = 0; ch < 3; ++ch) {
        const auto& stats = report.channels[static_cast<size_t>(ch)];
        json channel;
        channel["max_qq_deviation"] = stats.max_qq_deviation;
        channel["ks_statistic"] = stats.ks_statistic;
        channel["range_coverage"] = stats.range_coverage;
        json points = json::array();
        for (const auto& [sq, pq] : stats.qq_points) points.push_back({sq, pq});
        channel["qq_points"] = points;
        doc["channels"][names[ch]] = channel;
    }
    doc["max_qq_deviation"] = report.max_qq_deviation;
    doc["ks_statistic"] = report.ks_statistic;
    doc["range_coverage"] = report.range_coverage;
    doc["thresholds"] = {{"tau_qq", report.thresholds.tau_qq},
                         {"tau_rc", report.thresholds.tau_rc}};
    doc["pass"] = report.pass;
    return doc;
}

SegmentationThresholds thresholds_from_json(const json& doc) {
    SegmentationThresholds t;
    auto fill = [&doc](const char* key, std::array<ChannelRange, 3>& box) {
        if (!doc.contains(key)) return;
        const char* names[3] = {"r", "g", "b"};
        for (int ch = 0; ch < 3; ++ch) {
            const auto& range = doc[key].at(names[ch]);
            box[static_cast<size_t>(ch)] = {range[0].get<double>(), range[1].get<double>()};
        }
    };
    fill("vessel", t.vessel);
    fill("avascular", t.avascular);
    return t;
}

// Writes through a .partial path; an interrupted stage leaves it behind.
template <typename WriteFn>
void write_artifact(const fs::path& path, WriteFn&& writer) {
    const fs::path partial = path.string() + ".partial";
    writer(partial);
    fs::rename(partial, path);
}

std::vector<fs::path> list_frames(const fs::path& dir) {
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".ppm") frames.push_back(entry.path());
    }
    std::sort(frames.begin(), frames.end());
    if (frames.empty()) throw std::runtime_error(dir.string() + ": no frames found");
    return frames;
}

// ---------------------------------------------------------------------------

struct NormalizeArgs {
    std::string white, black, in, out;
    double eps_den = 1e-6;
    double clamp_max = 2.0;
};

int run_normalize(const NormalizeArgs& args) {
    NormalizeOptions opts;
    opts.eps_den = args.eps_den;
    opts.clamp_max = args.clamp_max;

    const fs::path in_path = args.in;
    std::vector<fs::path> prov_inputs = {in_path};
    if (in_path.extension() == ".hsc") {
        const Hypercube cube = read_cube(in_path);
        const Spectrum white = read_spectrum_csv(args.white, cube.grid);
        const Spectrum black = read_spectrum_csv(args.black, cube.grid);
        prov_inputs.push_back(args.white);
        prov_inputs.push_back(args.black);
        const Hypercube out = normalize_reflectance(cube, white, black, opts);
        write_artifact(args.out, [&](const fs::path& p) { write_cube(out, p); });
    } else {
        const RgbImage img = read_image(in_path);
        RgbImage out;
        if (fs::exists(args.white) || fs::exists(args.black)) {
            const RgbImage white = read_image(args.white);
            const RgbImage black = read_image(args.black);
            prov_inputs.push_back(args.white);
            prov_inputs.push_back(args.black);
            out = normalize_reflectance(img, white, black, opts);
        } else {
            // flat-field scalars "r,g,b"
            out = normalize_reflectance(img, parse_triple(args.white), parse_triple(args.black),
                                        opts);
        }
        write_artifact(args.out,
                       [&](const fs::path& p) { write_image_png(out, p, 16); });
    }
    make_provenance(prov_inputs, {{"eps_den", args.eps_den}, {"clamp_max", args.clamp_max}})
        .write_sidecar(args.out);
    return kExitOk;
}

struct ColorfitArgs {
    std::string src, dst, out;
};

int run_colorfit(const ColorfitArgs& args) {
    const Eigen::MatrixXd x1 = read_rgb_samples_csv(args.src);
    const Eigen::MatrixXd x2 = read_rgb_samples_csv(args.dst);
    const ColorCorrection cc = fit_color_correction(x1, x2);

    json doc;
    doc["M"] = json::array();
    for (int r = 0; r < 3; ++r)
        doc["M"].push_back({cc.M(r, 0), cc.M(r, 1), cc.M(r, 2)});
    doc["condition_number"] = cc.condition_number;
    doc["residual_rms"] = cc.residual_rms;
    write_artifact(args.out, [&](const fs::path& p) { write_json(doc, p); });
    make_provenance({args.src, args.dst}).write_sidecar(args.out);
    return kExitOk;
}

struct ValidateSamplingArgs {
    std::string image, line, report;
    int levels = 100;
    SamplingThresholds thresholds;
    bool strict = false;
};

int run_validate_sampling(const ValidateSamplingArgs& args) {
    const RgbImage img = read_image(args.image);
    const CsvTable coords = read_csv(args.line);
    const int row_col = coords.find_column("row");
    const int col_col = coords.find_column("col");
    if (row_col < 0 || col_col < 0)
        throw std::runtime_error(args.line + ": expected row,col coordinate columns");

    Eigen::MatrixXd sample(static_cast<Eigen::Index>(coords.row_count()), 3);
    for (size_t i = 0; i < coords.row_count(); ++i) {
        const int r = static_cast<int>(coords.data[static_cast<size_t>(row_col)][i]);
        const int c = static_cast<int>(coords.data[static_cast<size_t>(col_col)][i]);
        if (r < 0 || r >= img.rows || c < 0 || c >= img.cols)
            throw std::runtime_error("line coordinate outside the image");
        for (int ch = 0; ch < 3; ++ch)
            sample(static_cast<Eigen::Index>(i), ch) = img.at(r, c, ch);
    }

    const SamplingReport report = qq_compare(sample, img.as_matrix(), args.levels, args.thresholds);
    write_artifact(args.report,
                   [&](const fs::path& p) { write_json(sampling_report_json(report), p); });
    make_provenance({args.image, args.line}).write_sidecar(args.report);

    if (!report.pass) {
        std::cerr << "spectracube: sampling check failed (max_qq_deviation="
                  << report.max_qq_deviation << ", range_coverage=" << report.range_coverage
                  << ")\n";
        if (args.strict) return kExitStageFailure;
        std::cerr << "spectracube: proceeding anyway (pass --strict to fail)\n";
    }
    return kExitOk;
}

struct TrainRegressionArgs {
    std::vector<std::string> line;  // rgb.csv spectra.csv
    std::string out;
    std::string residuals_out;
    uint64_t seed = 0;
    double train_frac = 0.8;
    TrainOptions opts;
};

int run_train_regression(const TrainRegressionArgs& args) {
    const WavelengthGrid grid = grid_from_csv(args.line[1]);
    const SampledLine line = read_line(args.line[0], args.line[1], grid);
    const TrainResult result = train(line, args.seed, args.train_frac, args.opts);

    write_artifact(args.out, [&](const fs::path& p) { save_model(result.model, p); });
    make_provenance({args.line[0], args.line[1]},
                    {{"seed", args.seed},
                     {"train_frac", args.train_frac},
                     {"bias", args.opts.bias},
                     {"ridge_lambda", result.model.ridge_lambda}})
        .write_sidecar(args.out);

    if (!args.residuals_out.empty()) {
        const ResidualBand band = residual_band(result.test_truth, result.test_predicted);
        CsvTable table;
        table.columns = {"wavelength_nm", "mean_residual", "ci95_half_width"};
        table.data.assign(3, {});
        for (int k = 0; k < grid.count; ++k) {
            table.data[0].push_back(grid.wavelength(k));
            table.data[1].push_back(band.mean_residual[k]);
            table.data[2].push_back(band.ci_half_width[k]);
        }
        write_artifact(args.residuals_out, [&](const fs::path& p) { write_csv(table, p); });
    }
    std::cout << "trained on " << result.model.stats.m_train << " points, held out "
              << result.model.stats.m_test << "; rmse_train=" << result.model.stats.rmse_train
              << " rmse_test=" << result.model.stats.rmse_test
              << " cond=" << result.model.stats.condition_number << "\n";
    return kExitOk;
}

struct RecoverArgs {
    std::string model, image, out, mask_out;
    int threads = 0;
};

int run_recover(const RecoverArgs& args) {
    const RegressionModel model = load_model(args.model);
    const RgbImage img = read_image(args.image);
    const RecoverResult result = recover_cube(model, img, args.threads);
    write_artifact(args.out, [&](const fs::path& p) { write_cube(result.cube, p); });
    make_provenance({args.model, args.image}).write_sidecar(args.out);

    if (!args.mask_out.empty()) {
        RgbImage mask(img.rows, img.cols);
        for (int r = 0; r < img.rows; ++r)
            for (int c = 0; c < img.cols; ++c) {
                const float v = result.out_of_range_mask[static_cast<size_t>(r) *
                                                             static_cast<size_t>(img.cols) +
                                                         static_cast<size_t>(c)]
                                    ? 1.0f
                                    : 0.0f;
                for (int ch = 0; ch < 3; ++ch) mask.at(r, c, ch) = v;
            }
        write_artifact(args.mask_out, [&](const fs::path& p) { write_image_png(mask, p, 8); });
    }
    return kExitOk;
}

struct FitHemoArgs {
    std::string cube, ext, out, png_prefix;
    bool lipid = false;
    std::string window = "450:650";
    int max_iter = 2000;
    int threads = 0;
};

void write_map_pngs(const HemodynamicMaps& maps, const std::string& prefix) {
    render_map_png(maps.spo2, "heat", 0.0, 1.0, prefix + "_spo2.png");
    const double hbo2_hi = std::max(1e-9, maps.hbo2.maxCoeff());
    const double hb_hi = std::max(1e-9, maps.hb.maxCoeff());
    render_map_png(maps.hbo2, "heat", 0.0, hbo2_hi, prefix + "_hbo2.png");
    render_map_png(maps.hb, "heat", 0.0, hb_hi, prefix + "_hb.png");
}

int run_fit_hemo(const FitHemoArgs& args) {
    const Hypercube cube = read_cube(args.cube);
    const ExtinctionTable ext = load_extinction(args.ext, cube.grid);
    FitOptions opts;
    opts.fit_lipid = args.lipid;
    std::tie(opts.window_lo_nm, opts.window_hi_nm) = parse_window(args.window);
    opts.max_iter = args.max_iter;
    opts.threads = args.threads;

    const HemodynamicMaps maps = fit_cube(cube, ext, opts);
    write_artifact(args.out, [&](const fs::path& p) { write_maps(maps, p); });
    make_provenance({args.cube, args.ext},
                    {{"lipid", args.lipid},
                     {"window", args.window},
                     {"extinction_sha256", ext.source_sha256}})
        .write_sidecar(args.out);
    if (!args.png_prefix.empty()) write_map_pngs(maps, args.png_prefix);

    size_t converged = 0;
    for (uint8_t v : maps.converged) converged += v;
    std::cout << "fitted " << maps.converged.size() << " pixels, " << converged << " converged\n";
    return kExitOk;
}

struct TrainNnArgs {
    std::vector<std::string> line;
    std::string ext, labels_from = "fit", labels_csv, out;
    MlpTrainConfig cfg;
};

int run_train_nn(const TrainNnArgs& args) {
    const WavelengthGrid grid = grid_from_csv(args.line[1]);
    const SampledLine line = read_line(args.line[0], args.line[1], grid);

    Eigen::MatrixXd labels(line.size(), 2);
    std::vector<fs::path> prov_inputs = {args.line[0], args.line[1]};
    if (args.labels_from == "fit") {
        if (args.ext.empty())
            throw std::runtime_error("--labels-from fit requires --ext <extinction csv>");
        const ExtinctionTable ext = load_extinction(args.ext, grid);
        prov_inputs.push_back(args.ext);
        FitOptions opts;
        for (Eigen::Index i = 0; i < line.size(); ++i) {
            Spectrum s;
            s.grid = grid;
            s.values = line.spectra.row(i).transpose();
            const TissueFit fit = fit_spectrum(s, ext, opts);
            labels(i, 0) = fit.hbo2;
            labels(i, 1) = fit.hb;
        }
    } else if (args.labels_from == "model-free") {
        if (args.labels_csv.empty())
            throw std::runtime_error("--labels-from model-free requires --labels <csv>");
        const CsvTable table = read_csv(args.labels_csv);
        const int o_col = table.find_column("hbo2");
        const int d_col = table.find_column("hb");
        if (o_col < 0 || d_col < 0)
            throw std::runtime_error(args.labels_csv + ": expected columns hbo2,hb");
        if (table.row_count() != static_cast<size_t>(line.size()))
            throw std::runtime_error("label count does not match line length");
        prov_inputs.push_back(args.labels_csv);
        for (Eigen::Index i = 0; i < line.size(); ++i) {
            labels(i, 0) = table.data[static_cast<size_t>(o_col)][static_cast<size_t>(i)];
            labels(i, 1) = table.data[static_cast<size_t>(d_col)][static_cast<size_t>(i)];
        }
    } else {
        throw std::runtime_error("--labels-from must be fit or model-free");
    }

    const MlpTrainResult result = train_mlp(line.rgb, labels, args.cfg);
    write_artifact(args.out, [&](const fs::path& p) { save_mlp(result.model, p); });
    make_provenance(prov_inputs,
                    {{"seed", args.cfg.seed},
                     {"labels_from", args.labels_from},
                     {"epochs", args.cfg.epochs},
                     {"batch_size", args.cfg.batch_size},
                     {"lr0", args.cfg.lr0},
                     {"weight_decay", args.cfg.weight_decay}})
        .write_sidecar(args.out);
    std::cout << "final train loss " << result.history.train_loss.back() << ", val loss "
              << result.history.val_loss.back() << "\n";
    return kExitOk;
}

struct InferNnArgs {
    std::string model, image, out, png_prefix;
    int threads = 0;
};

int run_infer_nn(const InferNnArgs& args) {
    const MlpModel model = load_mlp(args.model);
    const RgbImage img = read_image(args.image);
    const HemodynamicMaps maps = infer_maps(model, img, args.threads);
    write_artifact(args.out, [&](const fs::path& p) { write_maps(maps, p); });
    make_provenance({args.model, args.image}).write_sidecar(args.out);
    if (!args.png_prefix.empty()) write_map_pngs(maps, args.png_prefix);
    return kExitOk;
}

struct MetricsArgs {
    std::string a, b, report, map_out;
    std::string plane = "spo2";
    double o1 = 0.01, o2 = 0.03, h = 0.0;
    std::string truth, estimate;
};

Eigen::MatrixXd maps_plane(const HemodynamicMaps& maps, const std::string& name) {
    if (name == "hbo2") return maps.hbo2;
    if (name == "hb") return maps.hb;
    if (name == "spo2") return maps.spo2;
    if (name == "rss") return maps.rss;
    throw std::runtime_error("unknown plane '" + name + "' (hbo2, hb, spo2, rss)");
}

int run_metrics_sam(const MetricsArgs& args) {
    const Hypercube cube_a = read_cube(args.a);
    const Hypercube cube_b = read_cube(args.b);
    const SamMap map = sam_map(cube_a, cube_b);
    json doc;
    doc["mean_rad"] = map.mean;
    doc["median_rad"] = map.median;
    write_artifact(args.report, [&](const fs::path& p) { write_json(doc, p); });
    make_provenance({args.a, args.b}).write_sidecar(args.report);
    if (!args.map_out.empty()) {
        WavelengthGrid one;
        one.start_nm = 0.0;
        one.step_nm = 1.0;
        one.count = 2;  // container needs >= 2 planes; duplicate the angle map
        Hypercube out(static_cast<int>(map.angle.rows()), static_cast<int>(map.angle.cols()), one);
        for (int r = 0; r < out.rows; ++r)
            for (int c = 0; c < out.cols; ++c) {
                out.at(r, c, 0) = static_cast<float>(map.angle(r, c));
                out.at(r, c, 1) = static_cast<float>(map.angle(r, c));
            }
        write_artifact(args.map_out,
                       [&](const fs::path& p) { write_cube(out, p, {"sam_rad", "sam_rad"}); });
    }
    std::cout << "mean SAM " << map.mean << " rad, median " << map.median << " rad\n";
    return kExitOk;
}

int run_metrics_ssim(const MetricsArgs& args) {
    const HemodynamicMaps maps_a = read_maps(args.a);
    const HemodynamicMaps maps_b = read_maps(args.b);
    const Eigen::MatrixXd plane_a = maps_plane(maps_a, args.plane);
    const Eigen::MatrixXd plane_b = maps_plane(maps_b, args.plane);
    const SsimResult res = args.h > 0.0 ? ssim(plane_a, plane_b, args.o1, args.o2, args.h)
                                        : ssim_auto(plane_a, plane_b, args.o1, args.o2);
    json doc;
    doc["value"] = res.value;
    doc["luminance"] = res.luminance;
    doc["contrast"] = res.contrast;
    doc["structure"] = res.structure;
    doc["o1"] = res.o1;
    doc["o2"] = res.o2;
    doc["h"] = res.h;
    doc["plane"] = args.plane;
    write_artifact(args.report, [&](const fs::path& p) { write_json(doc, p); });
    make_provenance({args.a, args.b}).write_sidecar(args.report);
    std::cout << "ssim(" << args.plane << ") = " << res.value << "\n";
    return kExitOk;
}

int run_metrics_residuals(const MetricsArgs& args) {
    const WavelengthGrid grid = grid_from_csv(args.truth);
    const Eigen::MatrixXd truth = read_spectra_table(args.truth, grid);
    const Eigen::MatrixXd estimate = read_spectra_table(args.estimate, grid);
    const ResidualBand band = residual_band(truth, estimate);
    json doc;
    doc["wavelength_nm"] = json::array();
    doc["mean_residual"] = json::array();
    doc["ci95_half_width"] = json::array();
    for (int k = 0; k < grid.count; ++k) {
        doc["wavelength_nm"].push_back(grid.wavelength(k));
        doc["mean_residual"].push_back(band.mean_residual[k]);
        doc["ci95_half_width"].push_back(band.ci_half_width[k]);
    }
    write_artifact(args.report, [&](const fs::path& p) { write_json(doc, p); });
    make_provenance({args.truth, args.estimate}).write_sidecar(args.report);
    return kExitOk;
}

struct VideoArgs {
    std::string frames_dir, model, ext, thresholds_json, report, maps_out, series_out;
    double fs = 0.0;
    double f_lo = 0.01, f_hi = 0.1;
    std::string phase_method = "hilbert";
    int threads = 0;
};

int run_video(const VideoArgs& args) {
    const auto frame_paths = list_frames(args.frames_dir);
    const bool use_nn = fs::path(args.model).extension() == ".mdl";

    MlpModel nn;
    RegressionModel reg;
    std::optional<ExtinctionTable> ext;
    if (use_nn) {
        nn = load_mlp(args.model);
    } else {
        reg = load_model(args.model);
        if (args.ext.empty())
            throw std::runtime_error("regression model maps need --ext for the tissue fit");
        ext = load_extinction(args.ext, reg.grid);
    }

    SegmentationThresholds thresholds = SegmentationThresholds::defaults();
    if (!args.thresholds_json.empty()) {
        std::ifstream in(args.thresholds_json);
        if (!in) throw std::runtime_error("cannot open " + args.thresholds_json);
        thresholds = thresholds_from_json(json::parse(in));
    }

    if (!args.maps_out.empty()) fs::create_directories(args.maps_out);

    std::vector<HemodynamicMaps> sequence;
    sequence.reserve(frame_paths.size());
    SegmentationMask mask;
    for (size_t i = 0; i < frame_paths.size(); ++i) {
        const RgbImage frame = read_image(frame_paths[i]);
        if (i == 0) {
            mask = segment_vessels(frame, thresholds);
            if (mask.vessel_count() == 0)
                throw std::runtime_error("vessel mask is empty on the first frame");
        }
        HemodynamicMaps maps;
        if (use_nn) {
            maps = infer_maps(nn, frame, args.threads);
        } else {
            const RecoverResult rec = recover_cube(reg, frame, args.threads);
            FitOptions fopts;
            fopts.threads = args.threads;
            maps = fit_cube(rec.cube, *ext, fopts);
        }
        if (!args.maps_out.empty()) {
            char name[32];
            snprintf(name, sizeof(name), "maps_%05zu.hsc", i);
            write_artifact(fs::path(args.maps_out) / name,
                           [&](const fs::path& p) { write_maps(maps, p); });
        }
        sequence.push_back(std::move(maps));
    }

    const RoiSeries roi = roi_timeseries(sequence, mask);
    const std::vector<double> filt_o = bandpass(roi.dhbo2, args.fs, args.f_lo, args.f_hi);
    const std::vector<double> filt_d = bandpass(roi.dhb, args.fs, args.f_lo, args.f_hi);

    PhaseOptions popts;
    popts.f_lo = args.f_lo;
    popts.f_hi = args.f_hi;
    popts.method =
        args.phase_method == "xspec" ? PhaseMethod::CrossSpectrum : PhaseMethod::Hilbert;
    const PhaseReport phase = phase_difference(filt_o, filt_d, args.fs, popts);

    json doc;
    doc["frames"] = frame_paths.size();
    doc["fs_hz"] = args.fs;
    doc["band_hz"] = {args.f_lo, args.f_hi};
    doc["method"] = args.phase_method;
    doc["phase_deg"] = phase.phase_deg;
    doc["resultant_length"] = phase.resultant_length;
    doc["low_confidence"] = phase.low_confidence;
    doc["vessel_pixels"] = mask.vessel_count();
    write_artifact(args.report, [&](const fs::path& p) { write_json(doc, p); });
    make_provenance({frame_paths.front(), args.model}).write_sidecar(args.report);

    if (!args.series_out.empty()) {
        CsvTable table;
        table.columns = {"frame", "dhbo2", "dhb", "dhbo2_filtered", "dhb_filtered"};
        table.data.assign(5, {});
        for (size_t i = 0; i < roi.dhbo2.size(); ++i) {
            table.data[0].push_back(static_cast<double>(i));
            table.data[1].push_back(roi.dhbo2[i]);
            table.data[2].push_back(roi.dhb[i]);
            table.data[3].push_back(filt_o[i]);
            table.data[4].push_back(filt_d[i]);
        }
        write_artifact(args.series_out, [&](const fs::path& p) { write_csv(table, p); });
    }
    std::cout << "time-averaged phase " << phase.phase_deg << " deg (resultant "
              << phase.resultant_length << ")\n";
    return kExitOk;
}

struct SynthArgs {
    std::string script, ext, sens, frames_dir, truth_dir;
    double noise = 0.0;
    uint64_t seed = 0;
    int bits = 16;
};

int run_synth(const SynthArgs& args) {
    const SceneScript scene = scene_from_json_file(args.script);
    WavelengthGrid grid;  // default working grid
    const ExtinctionTable ext = load_extinction(args.ext, grid);
    const SensitivityFunction sens = args.sens.empty()
                                         ? SensitivityFunction::gaussian_default(grid)
                                         : load_sensitivity(args.sens, grid);

    fs::create_directories(args.frames_dir);
    fs::create_directories(args.truth_dir);

    // the scale locks on frame 0 so the video stays temporally comparable
    std::optional<RescaleBounds> bounds;
    for (int f = 0; f < scene.frame_count; ++f) {
        const Hypercube cube = render_cube(scene, ext, f);
        RenderedRgb rgb = render_rgb(cube, sens, args.noise, args.seed + static_cast<uint64_t>(f),
                                     bounds);
        if (!bounds) bounds = rgb.bounds;

        char cube_name[32], frame_name[32];
        snprintf(cube_name, sizeof(cube_name), "cube_%05d.hsc", f);
        snprintf(frame_name, sizeof(frame_name), "frame_%05d.png", f);
        write_artifact(fs::path(args.truth_dir) / cube_name,
                       [&](const fs::path& p) { write_cube(cube, p); });
        write_artifact(fs::path(args.frames_dir) / frame_name, [&](const fs::path& p) {
            write_image_png(rgb.image, p, args.bits);
        });
    }

    json scale;
    scale["lo"] = bounds->lo;
    scale["hi"] = bounds->hi;
    scale["bits"] = args.bits;
    scale["noise_sigma"] = args.noise;
    scale["seed"] = args.seed;
    write_json(scale, fs::path(args.frames_dir) / "render_scale.json");
    make_provenance({args.script, args.ext},
                    {{"noise", args.noise}, {"seed", args.seed}, {"bits", args.bits}})
        .write_sidecar(fs::path(args.frames_dir) / "render_scale.json");
    std::cout << "rendered " << scene.frame_count << " frame(s) of " << scene.rows << "x"
              << scene.cols << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// pipeline

void reject_unknown_keys(const json& doc, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::runtime_error("config: unknown key '" + key + "' in " + where);
    }
}

struct PipelineConfig {
    fs::path out_dir = "out";
    uint64_t seed = 0;
    int threads = 0;
    bool strict_sampling = false;
    fs::path extinction_csv;
    std::optional<fs::path> sensitivity_csv;
    std::optional<fs::path> scene;  // synth mode
    std::optional<fs::path> image;  // ingest mode
    std::optional<fs::path> line_rgb, line_spectra;
    double noise_sigma = 0.0;
    std::vector<int> line_cols;  // empty -> center column
    int line_points = 0;         // 0 -> keep all
    TrainOptions train_opts{.bias = false, .ridge_lambda = 0.0, .auto_ridge = true};
    double train_frac = 0.8;
    FitOptions fit_opts;
    MlpTrainConfig nn_cfg;
    SamplingThresholds sampling;
    int sampling_levels = 100;
};

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config: " + std::string(e.what()));
    }

    reject_unknown_keys(doc, {"out_dir", "seed", "threads", "strict_sampling", "extinction_csv",
                              "sensitivity_csv", "scene", "image", "line_rgb", "line_spectra",
                              "noise_sigma", "line_cols", "line_points", "train", "fit", "nn",
                              "sampling"},
                        "top level");

    PipelineConfig cfg;
    cfg.out_dir = doc.value("out_dir", "out");
    cfg.seed = doc.value("seed", 0ULL);
    cfg.threads = doc.value("threads", 0);
    cfg.strict_sampling = doc.value("strict_sampling", false);
    if (!doc.contains("extinction_csv"))
        throw std::runtime_error("config: extinction_csv is required");
    cfg.extinction_csv = doc["extinction_csv"].get<std::string>();
    if (doc.contains("sensitivity_csv") && !doc["sensitivity_csv"].is_null())
        cfg.sensitivity_csv = doc["sensitivity_csv"].get<std::string>();
    if (doc.contains("scene")) cfg.scene = doc["scene"].get<std::string>();
    if (doc.contains("image")) cfg.image = doc["image"].get<std::string>();
    if (doc.contains("line_rgb")) cfg.line_rgb = doc["line_rgb"].get<std::string>();
    if (doc.contains("line_spectra")) cfg.line_spectra = doc["line_spectra"].get<std::string>();
    cfg.noise_sigma = doc.value("noise_sigma", 0.0);
    if (doc.contains("line_cols")) cfg.line_cols = doc["line_cols"].get<std::vector<int>>();
    cfg.line_points = doc.value("line_points", 0);

    if (doc.contains("train")) {
        const auto& t = doc["train"];
        reject_unknown_keys(t, {"bias", "ridge", "auto_ridge", "train_frac"}, "train");
        cfg.train_opts.bias = t.value("bias", false);
        cfg.train_opts.ridge_lambda = t.value("ridge", 0.0);
        cfg.train_opts.auto_ridge = t.value("auto_ridge", true);
        cfg.train_frac = t.value("train_frac", 0.8);
    }
    if (doc.contains("fit")) {
        const auto& f = doc["fit"];
        reject_unknown_keys(f, {"lipid", "window_nm", "max_iter"}, "fit");
        cfg.fit_opts.fit_lipid = f.value("lipid", false);
        if (f.contains("window_nm")) {
            cfg.fit_opts.window_lo_nm = f["window_nm"][0].get<double>();
            cfg.fit_opts.window_hi_nm = f["window_nm"][1].get<double>();
        }
        cfg.fit_opts.max_iter = f.value("max_iter", 2000);
    }
    if (doc.contains("nn")) {
        const auto& n = doc["nn"];
        reject_unknown_keys(n,
                            {"epochs", "batch_size", "lr0", "lr_drop_period", "lr_drop_factor",
                             "weight_decay", "hidden", "val_frac"},
                            "nn");
        cfg.nn_cfg.epochs = n.value("epochs", 15);
        cfg.nn_cfg.batch_size = n.value("batch_size", 20);
        cfg.nn_cfg.lr0 = n.value("lr0", 0.01);
        cfg.nn_cfg.lr_drop_period = n.value("lr_drop_period", 5);
        cfg.nn_cfg.lr_drop_factor = n.value("lr_drop_factor", 0.1);
        cfg.nn_cfg.weight_decay = n.value("weight_decay", 1e-5);
        if (n.contains("hidden")) cfg.nn_cfg.hidden = n["hidden"].get<std::vector<int>>();
        cfg.nn_cfg.val_frac = n.value("val_frac", 0.2);
    }
    if (doc.contains("sampling")) {
        const auto& s = doc["sampling"];
        reject_unknown_keys(s, {"levels", "tau_qq", "tau_rc"}, "sampling");
        cfg.sampling_levels = s.value("levels", 100);
        cfg.sampling.tau_qq = s.value("tau_qq", 0.05);
        cfg.sampling.tau_rc = s.value("tau_rc", 0.99);
    }

    // referenced files must exist at load
    auto require_file = [](const fs::path& p, const std::string& what) {
        if (!fs::exists(p))
            throw std::runtime_error("config: " + what + " file not found: " + p.string());
    };
    require_file(cfg.extinction_csv, "extinction_csv");
    if (cfg.sensitivity_csv) require_file(*cfg.sensitivity_csv, "sensitivity_csv");
    if (cfg.scene) require_file(*cfg.scene, "scene");
    if (cfg.image) require_file(*cfg.image, "image");
    if (cfg.line_rgb) require_file(*cfg.line_rgb, "line_rgb");
    if (cfg.line_spectra) require_file(*cfg.line_spectra, "line_spectra");

    const bool synth_mode = cfg.scene.has_value();
    const bool ingest_mode = cfg.image && cfg.line_rgb && cfg.line_spectra;
    if (!synth_mode && !ingest_mode)
        throw std::runtime_error(
            "config: provide either scene (synthetic) or image+line_rgb+line_spectra");
    return cfg;
}

int run_pipeline(const fs::path& config_path, int threads_override) {
    PipelineConfig cfg = load_pipeline_config(config_path);
    if (threads_override > 0) cfg.threads = threads_override;
    cfg.fit_opts.threads = cfg.threads;
    cfg.nn_cfg.seed = cfg.seed;
    fs::create_directories(cfg.out_dir);

    json report;
    report["seed"] = cfg.seed;

    // --- inputs
    WavelengthGrid grid;
    std::optional<Hypercube> truth;
    RgbImage image;
    SampledLine line;

    if (cfg.scene) {
        const SceneScript scene = scene_from_json_file(*cfg.scene);
        const ExtinctionTable ext = load_extinction(cfg.extinction_csv, grid);
        const SensitivityFunction sens = cfg.sensitivity_csv
                                             ? load_sensitivity(*cfg.sensitivity_csv, grid)
                                             : SensitivityFunction::gaussian_default(grid);
        truth = render_cube(scene, ext, 0);
        const RenderedRgb rendered =
            render_rgb(*truth, sens, cfg.noise_sigma, cfg.seed, std::nullopt);
        image = rendered.image;

        std::vector<int> cols = cfg.line_cols;
        if (cols.empty()) cols = {scene.cols / 2};
        std::vector<SampledLine> lines;
        for (int col : cols) lines.push_back(extract_line(*truth, image, col));
        line = merge_lines(lines);
        if (cfg.line_points > 0 && line.size() > cfg.line_points) {
            SampledLine cut;
            cut.grid = line.grid;
            cut.rgb = line.rgb.topRows(cfg.line_points);
            cut.spectra = line.spectra.topRows(cfg.line_points);
            cut.pixel_coords.assign(line.pixel_coords.begin(),
                                    line.pixel_coords.begin() + cfg.line_points);
            line = std::move(cut);
        }

        write_artifact(cfg.out_dir / "truth.hsc",
                       [&](const fs::path& p) { write_cube(*truth, p); });
        write_artifact(cfg.out_dir / "image.png",
                       [&](const fs::path& p) { write_image_png(image, p, 16); });
        write_line(line, (cfg.out_dir / "line_rgb.csv.partial"),
                   (cfg.out_dir / "line_spectra.csv.partial"));
        fs::rename(cfg.out_dir / "line_rgb.csv.partial", cfg.out_dir / "line_rgb.csv");
        fs::rename(cfg.out_dir / "line_spectra.csv.partial", cfg.out_dir / "line_spectra.csv");
        report["scene"] = cfg.scene->string();
        report["render_scale"] = {rendered.bounds.lo, rendered.bounds.hi};
    } else {
        image = read_image(*cfg.image);
        grid = grid_from_csv(*cfg.line_spectra);
        line = read_line(*cfg.line_rgb, *cfg.line_spectra, grid);
    }
    const ExtinctionTable ext = load_extinction(cfg.extinction_csv, grid);

    // --- sampling check
    const SamplingReport sampling =
        qq_compare(line.rgb, image.as_matrix(), cfg.sampling_levels, cfg.sampling);
    write_artifact(cfg.out_dir / "sampling.json",
                   [&](const fs::path& p) { write_json(sampling_report_json(sampling), p); });
    report["sampling_pass"] = sampling.pass;
    if (!sampling.pass) {
        std::cerr << "spectracube: sampling check failed";
        if (cfg.strict_sampling) {
            std::cerr << " (strict mode, aborting)\n";
            write_artifact(cfg.out_dir / "report.json",
                           [&](const fs::path& p) { write_json(report, p); });
            return kExitStageFailure;
        }
        std::cerr << ", proceeding\n";
    }

    // --- statistical learning
    const TrainResult trained = train(line, cfg.seed, cfg.train_frac, cfg.train_opts);
    write_artifact(cfg.out_dir / "model.hsl",
                   [&](const fs::path& p) { save_model(trained.model, p); });
    report["regression"] = {{"rmse_train", trained.model.stats.rmse_train},
                            {"rmse_test", trained.model.stats.rmse_test},
                            {"condition_number", trained.model.stats.condition_number},
                            {"m_train", trained.model.stats.m_train},
                            {"m_test", trained.model.stats.m_test}};

    const RecoverResult recovered = recover_cube(trained.model, image, cfg.threads);
    write_artifact(cfg.out_dir / "recovered.hsc",
                   [&](const fs::path& p) { write_cube(recovered.cube, p); });

    const HemodynamicMaps maps_stat = fit_cube(recovered.cube, ext, cfg.fit_opts);
    write_artifact(cfg.out_dir / "maps_statistical.hsc",
                   [&](const fs::path& p) { write_maps(maps_stat, p); });
    write_map_pngs(maps_stat, (cfg.out_dir / "maps_statistical").string());

    // --- informed deep learning (labels from tissue fits of the line)
    Eigen::MatrixXd labels(line.size(), 2);
    for (Eigen::Index i = 0; i < line.size(); ++i) {
        Spectrum s;
        s.grid = grid;
        s.values = line.spectra.row(i).transpose();
        const TissueFit fit = fit_spectrum(s, ext, cfg.fit_opts);
        labels(i, 0) = fit.hbo2;
        labels(i, 1) = fit.hb;
    }
    const MlpTrainResult nn = train_mlp(line.rgb, labels, cfg.nn_cfg);
    write_artifact(cfg.out_dir / "nn.mdl", [&](const fs::path& p) { save_mlp(nn.model, p); });
    report["nn"] = {{"train_loss", nn.history.train_loss.back()},
                    {"val_loss", nn.history.val_loss.back()}};

    const HemodynamicMaps maps_nn = infer_maps(nn.model, image, cfg.threads);
    write_artifact(cfg.out_dir / "maps_nn.hsc",
                   [&](const fs::path& p) { write_maps(maps_nn, p); });
    write_map_pngs(maps_nn, (cfg.out_dir / "maps_nn").string());

    // --- metrics
    if (truth) {
        const SamMap sam = sam_map(*truth, recovered.cube);
        report["sam_truth_vs_recovered"] = {{"mean_rad", sam.mean}, {"median_rad", sam.median}};
    }
    const SsimResult cross = ssim_auto(maps_stat.spo2, maps_nn.spo2);
    report["ssim_spo2_stat_vs_nn"] = cross.value;

    write_artifact(cfg.out_dir / "report.json",
                   [&](const fs::path& p) { write_json(report, p); });

    std::vector<fs::path> prov_inputs = {config_path, cfg.extinction_csv};
    if (cfg.scene) prov_inputs.push_back(*cfg.scene);
    if (cfg.image) prov_inputs.push_back(*cfg.image);
    make_provenance(prov_inputs, {{"seed", cfg.seed}}).write_sidecar(cfg.out_dir / "report.json");

    std::cout << "pipeline complete; report at " << (cfg.out_dir / "report.json").string()
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 0; i < argc; ++i) {
        if (i) g_command_line += ' ';
        g_command_line += argv[i];
    }

    CLI::App app{"spectracube: hyperspectral learning from RGB images"};
    app.require_subcommand(1);

    NormalizeArgs normalize_args;
    auto* cmd_normalize =
        app.add_subcommand("normalize", "White/black reflectance normalization");
    cmd_normalize->add_option("--white", normalize_args.white, "white reference (csv/image/r,g,b)")
        ->required();
    cmd_normalize->add_option("--black", normalize_args.black, "black reference (csv/image/r,g,b)")
        ->required();
    cmd_normalize->add_option("--in", normalize_args.in, "input cube (.hsc) or image")->required();
    cmd_normalize->add_option("--out", normalize_args.out, "output path")->required();
    cmd_normalize->add_option("--eps-den", normalize_args.eps_den,
                              "minimum white-black denominator");
    cmd_normalize->add_option("--clamp-max", normalize_args.clamp_max,
                              "reflectance clamp ceiling");

    ColorfitArgs colorfit_args;
    auto* cmd_colorfit = app.add_subcommand("colorfit", "Fit a 3x3 cross-camera color matrix");
    cmd_colorfit->add_option("--src", colorfit_args.src, "source rgb samples csv")->required();
    cmd_colorfit->add_option("--dst", colorfit_args.dst, "target rgb samples csv")->required();
    cmd_colorfit->add_option("--out", colorfit_args.out, "output json matrix")->required();

    ValidateSamplingArgs sampling_args;
    auto* cmd_sampling = app.add_subcommand(
        "validate-sampling", "Q-Q and range-coverage check of the sampled subarea");
    cmd_sampling->add_option("--image", sampling_args.image, "full image")->required();
    cmd_sampling->add_option("--line", sampling_args.line, "line coordinates csv (row,col)")
        ->required();
    cmd_sampling->add_option("--report", sampling_args.report, "output json report")->required();
    cmd_sampling->add_option("--levels", sampling_args.levels, "quantile levels");
    cmd_sampling->add_option("--tau-qq", sampling_args.thresholds.tau_qq, "max Q-Q deviation");
    cmd_sampling->add_option("--tau-rc", sampling_args.thresholds.tau_rc, "min range coverage");
    cmd_sampling->add_flag("--strict", sampling_args.strict, "fail instead of warn");

    TrainRegressionArgs train_args;
    auto* cmd_train = app.add_subcommand("train-regression",
                                         "Learn the RGB-to-spectrum polynomial transform");
    cmd_train->add_option("--line", train_args.line, "line files: rgb.csv spectra.csv")
        ->expected(2)
        ->required();
    cmd_train->add_option("--out", train_args.out, "output model (.hsl)")->required();
    cmd_train->add_option("--seed", train_args.seed, "split seed");
    cmd_train->add_option("--train-frac", train_args.train_frac, "training fraction");
    cmd_train->add_flag("--bias", train_args.opts.bias, "prepend a constant feature (p=35)");
    cmd_train->add_option("--ridge", train_args.opts.ridge_lambda, "Tikhonov ridge lambda");
    cmd_train->add_flag("--auto-ridge", train_args.opts.auto_ridge,
                        "ridge at 1e-8 * trace of the Gram matrix");
    cmd_train->add_option("--residuals", train_args.residuals_out,
                          "write held-out residual band csv");

    RecoverArgs recover_args;
    auto* cmd_recover = app.add_subcommand("recover", "Recover a hypercube from an RGB image");
    cmd_recover->add_option("--model", recover_args.model, "regression model (.hsl)")->required();
    cmd_recover->add_option("--image", recover_args.image, "input image")->required();
    cmd_recover->add_option("--out", recover_args.out, "output cube (.hsc)")->required();
    cmd_recover->add_option("--mask-out", recover_args.mask_out,
                            "out-of-training-range mask png");
    cmd_recover->add_option("--threads", recover_args.threads, "worker threads (0 = auto)");

    FitHemoArgs fit_args;
    auto* cmd_fit = app.add_subcommand("fit-hemo",
                                       "Per-pixel tissue reflectance model inversion");
    cmd_fit->add_option("--cube", fit_args.cube, "input cube (.hsc)")->required();
    cmd_fit->add_option("--ext", fit_args.ext, "extinction csv")->required();
    cmd_fit->add_option("--out", fit_args.out, "output maps (.hsc)")->required();
    cmd_fit->add_flag("--lipid", fit_args.lipid, "fit the lipid absorption term");
    cmd_fit->add_option("--window", fit_args.window, "fit window lo:hi in nm");
    cmd_fit->add_option("--max-iter", fit_args.max_iter, "simplex iteration cap");
    cmd_fit->add_option("--png-out", fit_args.png_prefix, "false-color png prefix");
    cmd_fit->add_option("--threads", fit_args.threads, "worker threads (0 = auto)");

    TrainNnArgs nn_args;
    auto* cmd_nn = app.add_subcommand("train-nn", "Train the informed MLP (RGB -> HbO2, Hb)");
    cmd_nn->add_option("--line", nn_args.line, "line files: rgb.csv spectra.csv")
        ->expected(2)
        ->required();
    cmd_nn->add_option("--ext", nn_args.ext, "extinction csv (for --labels-from fit)");
    cmd_nn->add_option("--labels-from", nn_args.labels_from, "fit | model-free");
    cmd_nn->add_option("--labels", nn_args.labels_csv, "labels csv (hbo2,hb) for model-free");
    cmd_nn->add_option("--out", nn_args.out, "output model (.mdl)")->required();
    cmd_nn->add_option("--seed", nn_args.cfg.seed, "training seed");
    cmd_nn->add_option("--epochs", nn_args.cfg.epochs, "epochs");
    cmd_nn->add_option("--batch-size", nn_args.cfg.batch_size, "batch size");
    cmd_nn->add_option("--lr0", nn_args.cfg.lr0, "initial learning rate");
    cmd_nn->add_option("--lr-drop-period", nn_args.cfg.lr_drop_period, "epochs per lr drop");
    cmd_nn->add_option("--weight-decay", nn_args.cfg.weight_decay, "l2 regularization factor");

    InferNnArgs infer_args;
    auto* cmd_infer = app.add_subcommand("infer-nn", "Hemodynamic maps via the informed MLP");
    cmd_infer->add_option("--model", infer_args.model, "MLP model (.mdl)")->required();
    cmd_infer->add_option("--image", infer_args.image, "input image")->required();
    cmd_infer->add_option("--out", infer_args.out, "output maps (.hsc)")->required();
    cmd_infer->add_option("--png-out", infer_args.png_prefix, "false-color png prefix");
    cmd_infer->add_option("--threads", infer_args.threads, "worker threads (0 = auto)");

    MetricsArgs metrics_args;
    auto* cmd_metrics = app.add_subcommand("metrics", "Validation metrics");
    cmd_metrics->require_subcommand(1);
    auto* cmd_sam = cmd_metrics->add_subcommand("sam", "Spectral angle mapper between cubes");
    cmd_sam->add_option("--a", metrics_args.a, "first cube")->required();
    cmd_sam->add_option("--b", metrics_args.b, "second cube")->required();
    cmd_sam->add_option("--report", metrics_args.report, "output json")->required();
    cmd_sam->add_option("--map-out", metrics_args.map_out, "per-pixel angle container");
    auto* cmd_ssim = cmd_metrics->add_subcommand("ssim", "Structural similarity between maps");
    cmd_ssim->add_option("--a", metrics_args.a, "first maps container")->required();
    cmd_ssim->add_option("--b", metrics_args.b, "second maps container")->required();
    cmd_ssim->add_option("--plane", metrics_args.plane, "hbo2|hb|spo2|rss");
    cmd_ssim->add_option("--o1", metrics_args.o1, "luminance stabilizer");
    cmd_ssim->add_option("--o2", metrics_args.o2, "contrast stabilizer");
    cmd_ssim->add_option("--dynamic-range", metrics_args.h, "dynamic range H (0 = from data)");
    cmd_ssim->add_option("--report", metrics_args.report, "output json")->required();
    auto* cmd_res = cmd_metrics->add_subcommand("residuals", "Per-wavelength residual band");
    cmd_res->add_option("--truth", metrics_args.truth, "truth spectra table")->required();
    cmd_res->add_option("--estimate", metrics_args.estimate, "estimate spectra table")
        ->required();
    cmd_res->add_option("--report", metrics_args.report, "output json")->required();

    VideoArgs video_args;
    auto* cmd_video = app.add_subcommand("video",
                                         "Frame-by-frame maps, ROI series and phase analysis");
    cmd_video->add_option("--frames", video_args.frames_dir, "directory of numbered frames")
        ->required();
    cmd_video->add_option("--model", video_args.model, "nn.mdl or model.hsl")->required();
    cmd_video->add_option("--ext", video_args.ext, "extinction csv (for .hsl models)");
    cmd_video->add_option("--fs", video_args.fs, "frame rate in Hz")->required();
    cmd_video->add_option("--mask-thresholds", video_args.thresholds_json,
                          "segmentation thresholds json");
    cmd_video->add_option("--report", video_args.report, "phase report json")->required();
    cmd_video->add_option("--maps-out", video_args.maps_out, "per-frame maps directory");
    cmd_video->add_option("--series-out", video_args.series_out, "ROI time series csv");
    cmd_video->add_option("--f-lo", video_args.f_lo, "bandpass low cut (Hz)");
    cmd_video->add_option("--f-hi", video_args.f_hi, "bandpass high cut (Hz)");
    cmd_video->add_option("--phase-method", video_args.phase_method, "hilbert | xspec");
    cmd_video->add_option("--threads", video_args.threads, "worker threads (0 = auto)");

    SynthArgs synth_args;
    auto* cmd_synth = app.add_subcommand("synth", "Render a scripted phantom scene");
    cmd_synth->add_option("--script", synth_args.script, "scene json")->required();
    cmd_synth->add_option("--ext", synth_args.ext, "extinction csv")->required();
    cmd_synth->add_option("--sens", synth_args.sens, "sensitivity csv (default: gaussian bands)");
    cmd_synth->add_option("--frames", synth_args.frames_dir, "output frames directory")
        ->required();
    cmd_synth->add_option("--truth", synth_args.truth_dir, "output truth cube directory")
        ->required();
    cmd_synth->add_option("--noise", synth_args.noise, "gaussian noise sigma (pre-rescale)");
    cmd_synth->add_option("--seed", synth_args.seed, "noise seed");
    cmd_synth->add_option("--bits", synth_args.bits, "frame bit depth 8|10|16");

    std::string pipeline_config;
    int pipeline_threads = 0;
    auto* cmd_pipeline = app.add_subcommand("pipeline", "Run the full configured pipeline");
    cmd_pipeline->add_option("--config", pipeline_config, "pipeline config json")->required();
    cmd_pipeline->add_option("--threads", pipeline_threads, "worker threads (0 = auto)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_normalize) return run_normalize(normalize_args);
        if (*cmd_colorfit) return run_colorfit(colorfit_args);
        if (*cmd_sampling) return run_validate_sampling(sampling_args);
        if (*cmd_train) return run_train_regression(train_args);
        if (*cmd_recover) return run_recover(recover_args);
        if (*cmd_fit) return run_fit_hemo(fit_args);
        if (*cmd_nn) return run_train_nn(nn_args);
        if (*cmd_infer) return run_infer_nn(infer_args);
        if (*cmd_metrics) {
            if (*cmd_sam) return run_metrics_sam(metrics_args);
            if (*cmd_ssim) return run_metrics_ssim(metrics_args);
            if (*cmd_res) return run_metrics_residuals(metrics_args);
        }
        if (*cmd_video) return run_video(video_args);
        if (*cmd_synth) return run_synth(synth_args);
        if (*cmd_pipeline) {
            try {
                return run_pipeline(pipeline_config, pipeline_threads);
            } catch (const std::runtime_error& e) {
                if (std::string(e.what()).rfind("config:", 0) == 0) {
                    std::cerr << "spectracube: " << e.what() << "\n";
                    return kExitConfigError;
                }
                throw;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "spectracube: error: " << e.what() << "\n";
        return kExitStageFailure;
    }
    return kExitOk;
}
