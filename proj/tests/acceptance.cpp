// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier end-to-end runs than the unit tests; expect a few minutes.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spectracube/io.hpp"
#include "spectracube/metrics.hpp"
#include "spectracube/provenance.hpp"
#include "spectracube/nelder_mead.hpp"
#include "spectracube/neural.hpp"
#include "spectracube/phantom.hpp"
#include "spectracube/regression.hpp"
#include "spectracube/sampling.hpp"
#include "spectracube/signal.hpp"
#include "spectracube/tissue.hpp"
#include "test_util.hpp"

#ifndef SPECTRACUBE_BIN
#define SPECTRACUBE_BIN "spectracube"
#endif

namespace fs = std::filesystem;
using namespace spectracube;
using nlohmann::json;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << detail
              << std::endl;
    if (!pass) ++g_failures;
}

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "spectracube_acceptance";
    fs::create_directories(dir);
    return dir;
}

const ExtinctionTable& ext_table() {
    static ExtinctionTable ext = load_extinction(test_util::extinction_csv(), WavelengthGrid{});
    return ext;
}

struct PhantomRun {
    SceneScript scene;
    Hypercube truth;
    RgbImage image;
    SampledLine line;  // 750 points from the center-line block
    RegressionModel model;
    Hypercube recovered;
    double mean_sam = 0.0;
    std::vector<Eigen::Index> nn_val_indices;  // filled by criterion 4
};

SampledLine center_line_750(const Hypercube& truth, const RgbImage& image) {
    const int c0 = truth.cols / 2;
    SampledLine merged = merge_lines({extract_line(truth, image, c0 - 1),
                                      extract_line(truth, image, c0),
                                      extract_line(truth, image, c0 + 1)});
    SampledLine cut;
    cut.grid = merged.grid;
    cut.rgb = merged.rgb.topRows(750);
    cut.spectra = merged.spectra.topRows(750);
    cut.pixel_coords.assign(merged.pixel_coords.begin(), merged.pixel_coords.begin() + 750);
    return cut;
}

PhantomRun run_phantom(double noise_sigma, uint64_t seed, int threads) {
    PhantomRun run;
    run.scene = test_util::oracle_scene(300, 300);
    const ExtinctionTable& ext = ext_table();
    run.truth = render_cube(run.scene, ext, 0);
    const SensitivityFunction sens = SensitivityFunction::gaussian_default(ext.grid);
    run.image = render_rgb(run.truth, sens, noise_sigma, seed).image;
    run.line = center_line_750(run.truth, run.image);

    TrainOptions topts;
    topts.auto_ridge = true;
    run.model = train(run.line, seed, 0.8, topts).model;
    run.recovered = recover_cube(run.model, run.image, threads).cube;
    run.mean_sam = sam_map(run.truth, run.recovered).mean;
    return run;
}

// 1% of the noiseless tristimulus signal range
double one_percent_noise_sigma(const Hypercube& truth) {
    const SensitivityFunction sens = SensitivityFunction::gaussian_default(truth.grid);
    const RenderedRgb clean = render_rgb(truth, sens, 0.0, 0);
    return 0.01 * (clean.bounds.hi - clean.bounds.lo);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPECTRACUBE_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> hash_dir(const fs::path& dir) {
    std::map<std::string, std::string> hashes;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            hashes[fs::relative(entry.path(), dir).string()] = sha256_file(entry.path());
    return hashes;
}

std::vector<double> sinusoid(double freq, double fs, double seconds, double amp, double phase) {
    const auto n = static_cast<size_t>(seconds * fs);
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / fs + phase);
    return x;
}

std::vector<std::array<int, 3>> enumerate_monomials() {
    std::vector<std::array<int, 3>> out;
    for (int total = 1; total <= 4; ++total)
        for (int a = total; a >= 0; --a)
            for (int b = total - a; b >= 0; --b) out.push_back({a, b, total - a - b});
    return out;
}

}  // namespace

// --------------------------------------------------------------------------

static PhantomRun criterion_1(PhantomRun* noisy_out) {
    const auto t0 = std::chrono::steady_clock::now();

    PhantomRun clean = run_phantom(0.0, 1234, 1);     // single-threaded for the timing bound
    const double sigma = one_percent_noise_sigma(clean.truth);
    PhantomRun noisy = run_phantom(sigma, 1234, 1);

    const auto t1 = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(t1 - t0).count();

    const bool split_ok = clean.model.stats.m_train == 600 && clean.model.stats.m_test == 150;
    const bool pass =
        clean.mean_sam < 0.01 && noisy.mean_sam < 0.05 && seconds < 120.0 && split_ok;
    char detail[256];
    snprintf(detail, sizeof(detail),
             "round-trip recovery: noiseless SAM %.5f rad (<0.01), 1%%-noise SAM %.5f rad "
             "(<0.05), split %lld/%lld, %.1f s single-threaded (<120)",
             clean.mean_sam, noisy.mean_sam, static_cast<long long>(clean.model.stats.m_train),
             static_cast<long long>(clean.model.stats.m_test), seconds);
    report(1, pass, detail);
    *noisy_out = std::move(noisy);
    return clean;
}

static void criterion_2() {
    // standalone simplex check on the banana function
    auto rosenbrock = [](const Eigen::VectorXd& x) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    NelderMeadOptions nm;
    nm.max_iter = 5000;
    const NelderMeadResult rb = nelder_mead(rosenbrock, x0, nm);
    const bool rb_ok =
        rb.converged && std::abs(rb.x[0] - 1.0) < 1e-6 && std::abs(rb.x[1] - 1.0) < 1e-6;

    const ExtinctionTable& ext = ext_table();
    Rng rng(777);
    int ok = 0;
    double worst_b4 = 0.0, worst_b5 = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const TissueParams truth = test_util::random_params(rng);
        const Spectrum spec = forward_reflectance(truth, ext, ext.grid);
        FitOptions opts;
        opts.init = test_util::perturb(truth, rng, 0.2);
        const TissueFit fit = fit_spectrum(spec, ext, opts);
        const double db4 = std::abs(fit.params.b4 - truth.b4) / truth.b4;
        const double db5 = std::abs(fit.params.b5 - truth.b5);
        worst_b4 = std::max(worst_b4, db4);
        worst_b5 = std::max(worst_b5, db5);
        if (db4 <= 0.01 && db5 <= 0.01) ++ok;
    }
    char detail[256];
    snprintf(detail, sizeof(detail),
             "tissue inversion: %d/100 recoveries within tolerance (worst b4 %.4f rel, worst "
             "b5 %.4f abs), rosenbrock %s",
             ok, worst_b4, worst_b5, rb_ok ? "converged" : "FAILED");
    report(2, ok == 100 && rb_ok, detail);
}

static HemodynamicMaps criterion_3(const PhantomRun& noisy, int threads) {
    const ExtinctionTable& ext = ext_table();
    FitOptions opts;
    opts.threads = threads;
    std::vector<TissueParams> params;
    const HemodynamicMaps maps = fit_cube(noisy.recovered, ext, opts, &params);

    // fitted forward model compared with the truth over the fit window
    std::vector<int> window;
    for (int k = 0; k < ext.grid.count; ++k) {
        const double wl = ext.grid.wavelength(k);
        if (wl >= opts.window_lo_nm && wl <= opts.window_hi_nm) window.push_back(k);
    }
    double total = 0.0;
    for (int r = 0; r < noisy.truth.rows; ++r)
        for (int c = 0; c < noisy.truth.cols; ++c) {
            const Spectrum model = forward_reflectance(
                params[static_cast<size_t>(r) * 300 + static_cast<size_t>(c)], ext, ext.grid);
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (int k : window) {
                const double a = static_cast<double>(noisy.truth.at(r, c, k));
                const double b = model.values[k];
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            total += std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0));
        }
    const double mean_sam = total / (300.0 * 300.0);
    char detail[160];
    snprintf(detail, sizeof(detail),
             "fitted-spectrum similarity: SAM(truth, forward(fit)) mean %.5f rad (<0.02, "
             "450-650 nm window)",
             mean_sam);
    report(3, mean_sam < 0.02, detail);
    return maps;
}

static MlpModel criterion_4(const PhantomRun& clean) {
    const ExtinctionTable& ext = ext_table();
    // labels via tissue fits of the sampled line
    Eigen::MatrixXd labels(clean.line.size(), 2);
    FitOptions fopts;
    for (Eigen::Index i = 0; i < clean.line.size(); ++i) {
        Spectrum s;
        s.grid = ext.grid;
        s.values = clean.line.spectra.row(i).transpose();
        const TissueFit fit = fit_spectrum(s, ext, fopts);
        labels(i, 0) = fit.hbo2;
        labels(i, 1) = fit.hb;
    }

    MlpTrainConfig cfg;  // lr0 0.01, decay 1e-5, batch 20, epochs 15
    cfg.seed = 2024;
    const MlpTrainResult result = train_mlp(clean.line.rgb, labels, cfg);

    Eigen::MatrixXd val_rgb(static_cast<Eigen::Index>(result.val_indices.size()), 3);
    for (size_t i = 0; i < result.val_indices.size(); ++i)
        val_rgb.row(static_cast<Eigen::Index>(i)) = clean.line.rgb.row(result.val_indices[i]);
    const Eigen::MatrixXd pred = result.model.predict(val_rgb);
    double mae = 0.0;
    for (size_t i = 0; i < result.val_indices.size(); ++i) {
        const auto [r, c] = clean.line.pixel_coords[static_cast<size_t>(result.val_indices[i])];
        const double truth_spo2 = clean.scene.params_at(r, c, 0).b5;
        const double o = std::max(0.0, pred(static_cast<Eigen::Index>(i), 0));
        const double d = std::max(0.0, pred(static_cast<Eigen::Index>(i), 1));
        mae += std::abs((o + d) > 0.0 ? o / (o + d) - truth_spo2 : truth_spo2);
    }
    mae /= static_cast<double>(result.val_indices.size());

    // analytic vs central-difference gradients on a fixed batch
    MlpModel probe_model = result.model;
    Eigen::MatrixXd xb = clean.line.rgb.topRows(16);
    Eigen::MatrixXd tb = labels.topRows(16);
    // z-score the probe labels the way training does
    for (int j = 0; j < 2; ++j)
        tb.col(j) = (tb.col(j).array() - probe_model.label_mean[j]) / probe_model.label_std[j];
    const MlpGradients grads = mlp_batch_gradients(probe_model, xb, tb, cfg.weight_decay);
    double worst_rel = 0.0;
    auto check_tensor = [&](auto& param, const auto& analytic) {
        Eigen::MatrixXd fd(param.rows(), param.cols());
        for (Eigen::Index r = 0; r < param.rows(); ++r)
            for (Eigen::Index c = 0; c < param.cols(); ++c) {
                const double save = param(r, c);
                const double h = 1e-6 * std::max(1.0, std::abs(save));
                param(r, c) = save + h;
                const double up = mlp_batch_loss(probe_model, xb, tb, cfg.weight_decay);
                param(r, c) = save - h;
                const double down = mlp_batch_loss(probe_model, xb, tb, cfg.weight_decay);
                param(r, c) = save;
                fd(r, c) = (up - down) / (2.0 * h);
            }
        const double scale = analytic.norm() + fd.norm();
        if (scale < 1e-8) return;  // structurally zero (biases under batch norm)
        worst_rel = std::max(worst_rel, (Eigen::MatrixXd(analytic) - fd).norm() / scale);
    };
    for (size_t l = 0; l < probe_model.layers.size(); ++l) {
        check_tensor(probe_model.layers[l].W, grads.layers[l].W);
        check_tensor(probe_model.layers[l].b, grads.layers[l].b);
        if (probe_model.layers[l].has_bn) {
            check_tensor(probe_model.layers[l].gamma, grads.layers[l].gamma);
            check_tensor(probe_model.layers[l].beta, grads.layers[l].beta);
        }
    }

    char detail[200];
    snprintf(detail, sizeof(detail),
             "informed MLP (lr 0.01, decay 1e-5, batch 20, epochs 15): held-out sPO2 MAE %.4f "
             "(<0.05), gradient check rel %.2e (<1e-5)",
             mae, worst_rel);
    report(4, mae < 0.05 && worst_rel < 1e-5, detail);
    return result.model;
}

static void criterion_5(const PhantomRun& clean, const MlpModel& nn, int threads) {
    const ExtinctionTable& ext = ext_table();
    FitOptions opts;
    opts.threads = threads;
    const HemodynamicMaps stat = fit_cube(clean.recovered, ext, opts);
    const HemodynamicMaps deep = infer_maps(nn, clean.image, threads);

    const SsimResult cross = ssim_auto(stat.spo2, deep.spo2);
    const SsimResult self = ssim_auto(stat.spo2, stat.spo2);
    char detail[160];
    snprintf(detail, sizeof(detail),
             "cross-framework consistency: SSIM(stat sPO2, MLP sPO2) %.4f (>=0.90), "
             "ssim(P,P) %s 1.0 exactly",
             cross.value, self.value == 1.0 ? "==" : "!=");
    report(5, cross.value >= 0.90 && self.value == 1.0, detail);
}

static void criterion_6() {
    Rng rng(4096);
    const double fs = 60.0, seconds = 180.0;
    const auto carrier = sinusoid(0.05, fs, seconds, 1.0, 0.0);
    const auto interferer = sinusoid(1.0, fs, seconds, 1.0, 0.8);
    const double noise_sigma = std::sqrt(0.5 / 10.0);  // 10 dB SNR against the carrier
    std::vector<double> a(carrier.size()), b(carrier.size());
    for (size_t i = 0; i < carrier.size(); ++i) {
        a[i] = carrier[i] + interferer[i] + rng.normal(0.0, noise_sigma);
        b[i] = -carrier[i] + interferer[i] + rng.normal(0.0, noise_sigma);
    }
    const auto fa = bandpass(a, fs);
    const auto fb = bandpass(b, fs);
    const PhaseReport phase = phase_difference(fa, fb, fs);
    const bool phase_ok = std::abs(phase.phase_deg - 180.0) <= 2.0;

    // DC rejection, measured against the analytic response
    std::vector<double> dc(6000, 3.0);
    const auto dc_out = bandpass(dc, 10.0);
    double dc_peak = 0.0;
    for (size_t i = dc_out.size() / 10; i < dc_out.size() * 9 / 10; ++i)
        dc_peak = std::max(dc_peak, std::abs(dc_out[i]));
    const bool dc_ok = dc_peak < 1e-6 * 3.0 && butterworth_bandpass_response(0.0, 0.01, 0.1, 3) == 0.0;

    // 1 Hz attenuation below 1%, analytic and measured (steady-state interior)
    const auto hb = sinusoid(1.0, 60.0, 600.0, 1.0, 0.0);
    const auto hb_out = bandpass(hb, 60.0);
    double hb_peak = 0.0;
    for (size_t i = hb_out.size() * 3 / 10; i < hb_out.size() * 7 / 10; ++i)
        hb_peak = std::max(hb_peak, std::abs(hb_out[i]));
    const double analytic_1hz = std::pow(butterworth_bandpass_response(1.0, 0.01, 0.1, 3), 2.0);
    const bool att_ok = hb_peak < 1e-2 && analytic_1hz < 1e-2;

    char detail[220];
    snprintf(detail, sizeof(detail),
             "phase pipeline: recovered %.2f deg (180+-2), DC residual %.1e (<1e-6), 1 Hz "
             "attenuation measured %.1e / analytic %.1e (<1e-2)",
             phase.phase_deg, dc_peak / 3.0, hb_peak, analytic_1hz);
    report(6, phase_ok && dc_ok && att_ok, detail);
}

static void criterion_7() {
    Rng rng(31415);
    bool reflexive = true;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 50 + static_cast<Eigen::Index>(rng.uniform_index(400));
        Eigen::MatrixXd x(n, 3);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int ch = 0; ch < 3; ++ch) x(i, ch) = rng.uniform(-5.0, 5.0);
        if (!qq_compare(x, x, 40).pass) reflexive = false;
    }

    // 750-row random subsets of a 225,000-pixel rendered parent (8-bit video
    // emulation). Modest scene contrast
    // keeps per-channel spreads tissue-photo-like; at full [0,1] stretch the
    // m=750 quantile noise alone would straddle the tau_qq threshold.
    SceneScript scene;
    scene.rows = 750;
    scene.cols = 300;
    auto shared = [&](double offset, double scale) {
        return FieldSpec::bands_y(offset, offset + 0.3 * scale,
                                  {{750 * 0.25, 0.0, 750 * 0.08, 0.075 * scale},
                                   {750 * 0.60, 0.0, 750 * 0.10, -0.06 * scale}});
    };
    scene.b1 = shared(0.55, 0.12);
    scene.b2 = FieldSpec::constant(-1.0);
    scene.b3 = FieldSpec::constant(0.05);
    scene.b4 = shared(1.1, 0.45);
    scene.b5 = shared(0.55, 0.30);
    const Hypercube truth = render_cube(scene, ext_table(), 0);
    const SensitivityFunction sens = SensitivityFunction::gaussian_default(truth.grid);
    const RgbImage image = quantize(render_rgb(truth, sens, 0.0, 9).image, 8);
    const Eigen::MatrixXd parent = image.as_matrix();

    int passes = 0;
    std::vector<Eigen::Index> order(static_cast<size_t>(parent.rows()));
    std::iota(order.begin(), order.end(), 0);
    for (int trial = 0; trial < 100; ++trial) {
        rng.shuffle(order);
        Eigen::MatrixXd sample(750, 3);
        for (Eigen::Index i = 0; i < 750; ++i)
            sample.row(i) = parent.row(order[static_cast<size_t>(i)]);
        if (qq_compare(sample, parent, 100).pass) ++passes;
    }
    char detail[160];
    snprintf(detail, sizeof(detail),
             "sampling check: reflexivity %s, random 750-subsets passed %d/100 (>=99)",
             reflexive ? "holds" : "FAILED", passes);
    report(7, reflexive && passes >= 99, detail);
}

static void criterion_8() {
    // identify each feature's exponents against a brute-force enumerator
    const Eigen::VectorXd probe = expand_rgb(2.0, 3.0, 5.0);
    std::map<double, std::array<int, 3>> oracle;
    for (const auto& m : enumerate_monomials())
        oracle[std::pow(2.0, m[0]) * std::pow(3.0, m[1]) * std::pow(5.0, m[2])] = m;
    bool exact = probe.size() == 34 && oracle.size() == 34;
    std::vector<std::array<int, 3>> found;
    for (Eigen::Index i = 0; i < probe.size() && exact; ++i) {
        const auto it = oracle.find(probe[i]);
        if (it == oracle.end())
            exact = false;
        else
            found.push_back(it->second);
    }
    if (exact) {
        std::sort(found.begin(), found.end());
        auto expected = enumerate_monomials();
        std::sort(expected.begin(), expected.end());
        exact = found == expected;
    }

    // degree scaling over the exhaustive 5x5x5 grid
    const auto degrees = feature_degrees();
    const double levels[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    double worst = 0.0;
    for (double a : {0.5, 2.0, 3.0})
        for (double r : levels)
            for (double g : levels)
                for (double b : levels) {
                    const Eigen::VectorXd base = expand_rgb(r, g, b);
                    const Eigen::VectorXd scaled = expand_rgb(a * r, a * g, a * b);
                    for (Eigen::Index i = 0; i < base.size(); ++i) {
                        const double expect =
                            std::pow(a, degrees[static_cast<size_t>(i)]) * base[i];
                        worst = std::max(worst, std::abs(scaled[i] - expect) /
                                                    std::max(1.0, std::abs(expect)));
                    }
                }
    char detail[160];
    snprintf(detail, sizeof(detail),
             "expansion: 34 monomials match the brute-force enumerator %s, degree scaling "
             "worst rel err %.1e",
             exact ? "exactly" : "MISMATCH", worst);
    report(8, exact && worst < 1e-12, detail);
}

static void criterion_9() {
    const fs::path dir = work_dir() / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // both runs use the identical command and config; outputs are moved
    // aside between runs so every byte (provenance included) must agree
    json cfg;
    cfg["seed"] = 97;
    cfg["threads"] = 2;
    cfg["out_dir"] = (dir / "out").string();
    cfg["extinction_csv"] = test_util::extinction_csv().string();
    cfg["scene"] = (test_util::data_dir() / "scene_example.json").string();
    cfg["line_cols"] = {48, 49, 50, 51, 52};
    std::ofstream(dir / "config.json") << cfg.dump(2);
    const std::string cmd = "pipeline --config '" + (dir / "config.json").string() + "'";

    std::map<std::string, std::string> first_hashes;
    for (int pass = 0; pass < 2; ++pass) {
        if (run_cli(cmd) != 0) {
            report(9, false, "determinism: pipeline run failed");
            return;
        }
        const fs::path kept = dir / ("out" + std::to_string(pass));
        fs::rename(dir / "out", kept);
        if (pass == 0) first_hashes = hash_dir(kept);
    }
    const auto second_hashes = hash_dir(dir / "out1");
    bool identical = first_hashes.size() == second_hashes.size();
    for (const auto& [name, hash] : second_hashes) {
        const auto it = first_hashes.find(name);
        if (it == first_hashes.end() || it->second != hash) identical = false;
    }
    report(9, identical, identical ? "determinism: two pipeline runs byte-identical across all "
                                     "artifacts"
                                   : "determinism: artifact hashes differ between runs");
}

static void criterion_10() {
    Rng rng(2718);
    // three labelled populations drawn inside the vessel box, the avascular
    // box, and the gap between them
    const int per_class = 400;
    RgbImage img(3, per_class);
    for (int i = 0; i < per_class; ++i) {
        img.set_pixel(0, i,
                      {rng.uniform(0.29, 1.0), rng.uniform(0.14, 1.0), rng.uniform(0.14, 1.0)});
        img.set_pixel(1, i,
                      {rng.uniform(0.0, 0.29), rng.uniform(0.0, 0.11), rng.uniform(0.0, 0.13)});
        img.set_pixel(2, i, {rng.uniform(0.0, 0.29), rng.uniform(0.111, 0.139),
                             rng.uniform(0.0, 0.13)});
    }
    const SegmentationMask mask = segment_vessels(img);
    int wrong = 0, gap_unclassified = 0;
    for (int i = 0; i < per_class; ++i) {
        if (!mask.vessel_at(0, i) || mask.avascular_at(0, i)) ++wrong;
        if (!mask.avascular_at(1, i) || mask.vessel_at(1, i)) ++wrong;
        if (mask.unclassified_at(2, i)) ++gap_unclassified;
        if (mask.vessel_at(2, i) || mask.avascular_at(2, i)) ++wrong;
    }
    char detail[160];
    snprintf(detail, sizeof(detail),
             "segmentation thresholds: %d misassignments (0 required), %d/%d gap pixels "
             "reported unclassified",
             wrong, gap_unclassified, per_class);
    report(10, wrong == 0 && gap_unclassified == per_class, detail);
}

int main() {
    std::cout << "spectracube acceptance suite\n";
    const int threads = 2;

    PhantomRun noisy;
    const PhantomRun clean = criterion_1(&noisy);
    criterion_2();
    criterion_3(noisy, threads);
    const MlpModel nn = criterion_4(clean);
    criterion_5(clean, nn, threads);
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();

    if (g_failures == 0) {
        std::cout << "all acceptance criteria passed\n";
        return 0;
    }
    std::cout << g_failures << " criterion(s) failed\n";
    return 1;
}
