#pragma once

#include <filesystem>
#include <optional>

#include "spectracube/cube.hpp"
#include "spectracube/grid.hpp"
#include "spectracube/maps.hpp"

namespace spectracube {

// Chromophore absorption coefficients resampled onto the working grid
// (per unit concentration times pathlength; the source table's units carry
// through to b4).
struct ExtinctionTable {
    WavelengthGrid grid;
    Eigen::VectorXd eps_hbo2;
    Eigen::VectorXd eps_hb;
    std::optional<Eigen::VectorXd> eps_lipid;
    std::string source_path;
    std::string source_sha256;

    void validate() const;
};

// CSV "wavelength_nm,eps_hbo2,eps_hb[,eps_lipid]", linearly interpolated
// onto `grid`. The table must cover the grid's range.
ExtinctionTable load_extinction(const std::filesystem::path& path, const WavelengthGrid& grid);

// Reflectance model parameters: Mie amplitude b1 and power b2, Rayleigh
// amplitude b3 (all referenced to lambda0 = 800 nm), hemoglobin
// concentration-pathlength b4, oxygen saturation b5.
struct TissueParams {
    double b1 = 0.5;
    double b2 = -1.0;
    double b3 = 0.1;
    double b4 = 1.0;
    double b5 = 0.7;
    double lipid_coeff = 0.0;  // 0 when the lipid term is disabled

    static constexpr double lambda0_nm = 800.0;

    void validate() const {
        if (!(b1 >= 0.0) || !(b3 >= 0.0) || !(b4 >= 0.0) || !(lipid_coeff >= 0.0) ||
            !(b5 >= 0.0 && b5 <= 1.0) || !std::isfinite(b2))
            throw std::invalid_argument("tissue parameters violate their constraints");
    }
};

// Scattering-times-absorption reflectance:
//   I_R = [b1 (l/l0)^b2 + b3 (l/l0)^-4] * exp(-b4 {b5 e_HbO2 + (1-b5) e_Hb}
//                                             - lipid_coeff e_lipid)
Spectrum forward_reflectance(const TissueParams& params, const ExtinctionTable& ext,
                             const WavelengthGrid& grid);

struct FitOptions {
    TissueParams init;  // defaults are a mid-physiological start
    double tol_x = 1e-8;
    double tol_f = 1e-8;
    int max_iter = 2000;  // per simplex run
    // Simplexes can collapse short of the minimum; re-seeding at the best
    // point and rerunning is the standard remedy. Restarts stop early once
    // the objective stops improving.
    int restarts = 2;
    bool fit_lipid = false;
    // Strong hemoglobin features live here; full-grid fitting is optional.
    double window_lo_nm = 450.0;
    double window_hi_nm = 650.0;
    int threads = 1;  // fit_cube only
};

struct TissueFit {
    TissueParams params;
    double rss = 0.0;
    int iterations = 0;
    bool converged = false;
    double hbo2 = 0.0;  // b4 * b5
    double hb = 0.0;    // b4 * (1 - b5)
    double spo2 = 0.0;  // b5
};

// Nelder-Mead least-squares inversion of the reflectance model. Constraints
// hold by construction: the simplex runs over log(b1), b2, log(b3), log(b4),
// logit(b5) [, log(lipid)].
TissueFit fit_spectrum(const Spectrum& spec, const ExtinctionTable& ext, const FitOptions& opts = {});

// Per-pixel inversion with warm starts chained along each row (rows are
// independent work units). Failures land in the converged mask, never abort.
// params_out, when given, receives the fitted parameters row-major.
HemodynamicMaps fit_cube(const Hypercube& cube, const ExtinctionTable& ext,
                         const FitOptions& opts = {},
                         std::vector<TissueParams>* params_out = nullptr);

// Oxygen saturation HbO2 / (HbO2 + Hb). Both inputs zero is undefined.
double spo2(double hbo2, double hb);

}  // namespace spectracube
