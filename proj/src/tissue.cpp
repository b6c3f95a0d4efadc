#include "spectracube/tissue.hpp"

#include <cmath>

#include "spectracube/io.hpp"
#include "spectracube/nelder_mead.hpp"
#include "spectracube/provenance.hpp"
#include "spectracube/threads.hpp"

namespace spectracube {

void ExtinctionTable::validate() const {
    grid.validate();
    if (eps_hbo2.size() != grid.count || eps_hb.size() != grid.count)
        throw std::invalid_argument("extinction vectors do not match grid");
    if ((eps_hbo2.array() <= 0.0).any() || (eps_hb.array() <= 0.0).any())
        throw std::invalid_argument("extinction coefficients must be strictly positive");
    if (eps_lipid && (eps_lipid->size() != grid.count || (eps_lipid->array() <= 0.0).any()))
        throw std::invalid_argument("lipid extinction must be strictly positive on the grid");
}

ExtinctionTable load_extinction(const std::filesystem::path& path, const WavelengthGrid& grid) {
    const CsvTable csv = read_csv(path);
    const int wl_col = csv.find_column("wavelength_nm");
    const int o_col = csv.find_column("eps_hbo2");
    const int d_col = csv.find_column("eps_hb");
    const int l_col = csv.find_column("eps_lipid");
    if (wl_col < 0 || o_col < 0 || d_col < 0)
        throw std::runtime_error(path.string() +
                                 ": expected columns wavelength_nm,eps_hbo2,eps_hb[,eps_lipid]");
    const auto& wl = csv.data[static_cast<size_t>(wl_col)];
    if (wl.size() < 2) throw std::runtime_error(path.string() + ": too few rows");
    for (size_t i = 1; i < wl.size(); ++i)
        if (wl[i] <= wl[i - 1])
            throw std::runtime_error(path.string() + ": wavelengths must be strictly increasing");
    if (grid.start_nm < wl.front() || grid.end_nm() > wl.back())
        throw std::runtime_error(path.string() + ": table does not cover the working grid");

    auto resample = [&](const std::vector<double>& col) {
        Eigen::VectorXd out(grid.count);
        size_t j = 0;
        for (int k = 0; k < grid.count; ++k) {
            const double x = grid.wavelength(k);
            while (j + 2 < wl.size() && wl[j + 1] < x) ++j;
            const double t = (x - wl[j]) / (wl[j + 1] - wl[j]);
            out[k] = col[j] + t * (col[j + 1] - col[j]);
        }
        return out;
    };

    ExtinctionTable ext;
    ext.grid = grid;
    ext.eps_hbo2 = resample(csv.data[static_cast<size_t>(o_col)]);
    ext.eps_hb = resample(csv.data[static_cast<size_t>(d_col)]);
    if (l_col >= 0) ext.eps_lipid = resample(csv.data[static_cast<size_t>(l_col)]);
    ext.source_path = path.string();
    ext.source_sha256 = sha256_file(path);
    ext.validate();
    return ext;
}

Spectrum forward_reflectance(const TissueParams& params, const ExtinctionTable& ext,
                             const WavelengthGrid& grid) {
    params.validate();
    if (ext.grid != grid) throw std::invalid_argument("extinction table not aligned to grid");
    if (params.lipid_coeff > 0.0 && !ext.eps_lipid)
        throw std::invalid_argument("lipid term requested but table has no eps_lipid column");

    Spectrum out;
    out.grid = grid;
    out.values.resize(grid.count);
    for (int k = 0; k < grid.count; ++k) {
        const double ratio = grid.wavelength(k) / TissueParams::lambda0_nm;
        const double scattering =
            params.b1 * std::pow(ratio, params.b2) + params.b3 * std::pow(ratio, -4.0);
        double absorbance =
            params.b4 * (params.b5 * ext.eps_hbo2[k] + (1.0 - params.b5) * ext.eps_hb[k]);
        if (params.lipid_coeff > 0.0) absorbance += params.lipid_coeff * (*ext.eps_lipid)[k];
        out.values[k] = scattering * std::exp(-absorbance);
    }
    return out;
}

namespace {

constexpr double kLogFloor = 1e-12;

double logit(double p) {
    const double q = std::clamp(p, 1e-9, 1.0 - 1e-9);
    return std::log(q / (1.0 - q));
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Precomputed per-window quantities so the simplex objective stays cheap.
struct FitWorkspace {
    std::vector<int> window;   // grid indices inside the fit window
    Eigen::ArrayXd spec;       // measured values in the window
    Eigen::ArrayXd log_ratio;  // log(lambda / lambda0)
    Eigen::ArrayXd rayleigh;   // (lambda / lambda0)^-4
    Eigen::ArrayXd eps_o;
    Eigen::ArrayXd eps_d;
    Eigen::ArrayXd eps_l;  // zero-size when lipid disabled
    bool fit_lipid = false;

    static FitWorkspace build(const WavelengthGrid& grid, const ExtinctionTable& ext,
                              const FitOptions& opts) {
        if (grid != ext.grid)
            throw std::invalid_argument("spectrum and extinction table grids differ");
        if (opts.fit_lipid && !ext.eps_lipid)
            throw std::invalid_argument("lipid fit requested but table has no eps_lipid column");

        FitWorkspace ws;
        for (int k = 0; k < grid.count; ++k) {
            const double wl = grid.wavelength(k);
            if (wl >= opts.window_lo_nm && wl <= opts.window_hi_nm) ws.window.push_back(k);
        }
        if (ws.window.size() < 8)
            throw std::invalid_argument("fit window covers too few grid points");

        const auto n = static_cast<Eigen::Index>(ws.window.size());
        ws.spec.resize(n);
        ws.log_ratio.resize(n);
        ws.rayleigh.resize(n);
        ws.eps_o.resize(n);
        ws.eps_d.resize(n);
        if (opts.fit_lipid) ws.eps_l.resize(n);
        ws.fit_lipid = opts.fit_lipid;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int k = ws.window[static_cast<size_t>(i)];
            const double ratio = grid.wavelength(k) / TissueParams::lambda0_nm;
            ws.log_ratio[i] = std::log(ratio);
            ws.rayleigh[i] = std::pow(ratio, -4.0);
            ws.eps_o[i] = ext.eps_hbo2[k];
            ws.eps_d[i] = ext.eps_hb[k];
            if (opts.fit_lipid) ws.eps_l[i] = (*ext.eps_lipid)[k];
        }
        return ws;
    }

    void load(const Spectrum& s) {
        for (size_t i = 0; i < window.size(); ++i)
            spec[static_cast<Eigen::Index>(i)] = s.values[window[i]];
    }

    void load(const Hypercube& cube, int r, int c) {
        for (size_t i = 0; i < window.size(); ++i)
            spec[static_cast<Eigen::Index>(i)] = static_cast<double>(cube.at(r, c, window[i]));
    }

    double rss(const Eigen::VectorXd& u) const {
        const double b1 = std::exp(u[0]);
        const double b2 = u[1];
        const double b3 = std::exp(u[2]);
        const double b4 = std::exp(u[3]);
        const double b5 = sigmoid(u[4]);
        const Eigen::ArrayXd scattering = b1 * (b2 * log_ratio).exp() + b3 * rayleigh;
        Eigen::ArrayXd absorbance = b4 * (b5 * eps_o + (1.0 - b5) * eps_d);
        if (fit_lipid) absorbance += std::exp(u[5]) * eps_l;
        return (spec - scattering * (-absorbance).exp()).square().sum();
    }

    Eigen::VectorXd pack(const TissueParams& p) const {
        Eigen::VectorXd u(fit_lipid ? 6 : 5);
        u[0] = std::log(std::max(p.b1, kLogFloor));
        u[1] = p.b2;
        u[2] = std::log(std::max(p.b3, kLogFloor));
        u[3] = std::log(std::max(p.b4, kLogFloor));
        u[4] = logit(p.b5);
        if (fit_lipid) u[5] = std::log(std::max(p.lipid_coeff, kLogFloor));
        return u;
    }

    TissueParams unpack(const Eigen::VectorXd& u) const {
        TissueParams p;
        p.b1 = std::exp(u[0]);
        p.b2 = u[1];
        p.b3 = std::exp(u[2]);
        p.b4 = std::exp(u[3]);
        p.b5 = sigmoid(u[4]);
        p.lipid_coeff = fit_lipid ? std::exp(u[5]) : 0.0;
        return p;
    }
};

TissueFit fit_with_workspace(const FitWorkspace& ws, const FitOptions& opts,
                             const TissueParams& init) {
    TissueFit fit;
    // Degenerate spectra cannot be inverted; flag instead of iterating.
    if ((ws.spec == 0.0).all() || !ws.spec.isFinite().all()) {
        fit.params = init;
        fit.converged = false;
        fit.rss = ws.spec.isFinite().all() ? ws.rss(ws.pack(init))
                                           : std::numeric_limits<double>::quiet_NaN();
        fit.hbo2 = init.b4 * init.b5;
        fit.hb = init.b4 * (1.0 - init.b5);
        fit.spo2 = init.b5;
        return fit;
    }

    NelderMeadOptions nm_opts;
    nm_opts.tol_x = opts.tol_x;
    nm_opts.tol_f = opts.tol_f;
    nm_opts.max_iter = opts.max_iter;
    // the simplex runs over log/logit coordinates; a fixed absolute step
    // explores them far better than relative perturbations
    nm_opts.initial_step = 0.25;
    const auto objective = [&](const Eigen::VectorXd& u) { return ws.rss(u); };

    NelderMeadResult res = nelder_mead(objective, ws.pack(init), nm_opts);
    int total_iterations = res.iterations;
    for (int restart = 0; restart < opts.restarts; ++restart) {
        if (res.converged && res.fx <= opts.tol_f) break;
        const NelderMeadResult again = nelder_mead(objective, res.x, nm_opts);
        total_iterations += again.iterations;
        const bool improved = again.fx < res.fx - opts.tol_f * std::max(1.0, std::abs(res.fx));
        if (again.fx <= res.fx) res = again;
        if (res.converged && !improved) break;
    }

    fit.params = ws.unpack(res.x);
    fit.rss = res.fx;
    fit.iterations = total_iterations;
    fit.converged = res.converged;
    fit.hbo2 = fit.params.b4 * fit.params.b5;
    fit.hb = fit.params.b4 * (1.0 - fit.params.b5);
    fit.spo2 = fit.params.b5;
    return fit;
}

}  // namespace

TissueFit fit_spectrum(const Spectrum& spec, const ExtinctionTable& ext, const FitOptions& opts) {
    spec.validate();
    opts.init.validate();
    FitWorkspace ws = FitWorkspace::build(spec.grid, ext, opts);
    ws.load(spec);
    TissueFit best = fit_with_workspace(ws, opts, opts.init);

    // a collapsed simplex can sit in a spurious basin (e.g. the b3 -> 0
    // plateau of the log reparameterization); probe the default start too
    // unless the fit already reached the numerical floor
    const double rss_floor = 1e-10 * ws.spec.square().sum();
    const TissueParams fallback;
    const bool init_is_default =
        opts.init.b1 == fallback.b1 && opts.init.b2 == fallback.b2 &&
        opts.init.b3 == fallback.b3 && opts.init.b4 == fallback.b4 &&
        opts.init.b5 == fallback.b5 && opts.init.lipid_coeff == fallback.lipid_coeff;
    if (best.rss > rss_floor && !init_is_default) {
        const TissueFit alt = fit_with_workspace(ws, opts, fallback);
        if (alt.rss < best.rss) {
            const int combined = best.iterations + alt.iterations;
            best = alt;
            best.iterations = combined;
        } else {
            best.iterations += alt.iterations;
        }
    }
    return best;
}

HemodynamicMaps fit_cube(const Hypercube& cube, const ExtinctionTable& ext, const FitOptions& opts,
                         std::vector<TissueParams>* params_out) {
    cube.validate();
    opts.init.validate();
    if (ext.grid != cube.grid)
        throw std::invalid_argument("extinction table not aligned to cube grid");

    HemodynamicMaps maps(cube.rows, cube.cols);
    if (params_out)
        params_out->assign(static_cast<size_t>(cube.rows) * static_cast<size_t>(cube.cols), {});
    const FitWorkspace ws_template = FitWorkspace::build(cube.grid, ext, opts);
    parallel_for(cube.rows, opts.threads, [&](int r0, int r1) {
        FitWorkspace ws = ws_template;
        for (int r = r0; r < r1; ++r) {
            TissueParams warm = opts.init;
            bool warm_valid = false;
            for (int c = 0; c < cube.cols; ++c) {
                ws.load(cube, r, c);
                TissueFit fit = fit_with_workspace(ws, opts, warm_valid ? warm : opts.init);
                if (!fit.converged && warm_valid) {
                    // warm start wandered off; retry cold and keep the better fit
                    const TissueFit cold = fit_with_workspace(ws, opts, opts.init);
                    if (cold.converged || cold.rss < fit.rss) fit = cold;
                }
                maps.hbo2(r, c) = fit.hbo2;
                maps.hb(r, c) = fit.hb;
                maps.spo2(r, c) = std::clamp(fit.spo2, 0.0, 1.0);
                maps.rss(r, c) = fit.rss;
                maps.set_converged(r, c, fit.converged);
                if (params_out)
                    (*params_out)[static_cast<size_t>(r) * static_cast<size_t>(cube.cols) +
                                  static_cast<size_t>(c)] = fit.params;
                if (fit.converged) {
                    warm = fit.params;
                    warm_valid = true;
                } else {
                    warm_valid = false;
                }
            }
        }
    });
    return maps;
}

double spo2(double hbo2, double hb) {
    if (!(hbo2 >= 0.0) || !(hb >= 0.0))
        throw std::invalid_argument("hemoglobin concentrations must be non-negative");
    const double total = hbo2 + hb;
    if (total <= 0.0) throw std::domain_error("oxygen saturation undefined for zero hemoglobin");
    return hbo2 / total;
}

}  // namespace spectracube
