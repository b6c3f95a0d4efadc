#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace spectracube {

// Uniform wavelength axis in nanometers. The default covers the visible
// range 380-720 nm at 1 nm steps (341 samples).
struct WavelengthGrid {
    double start_nm = 380.0;
    double step_nm = 1.0;
    int count = 341;

    double wavelength(int i) const { return start_nm + step_nm * static_cast<double>(i); }
    double end_nm() const { return wavelength(count - 1); }

    std::vector<double> wavelengths() const {
        std::vector<double> wl(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) wl[static_cast<size_t>(i)] = wavelength(i);
        return wl;
    }

    // Nearest grid index; exact midpoints resolve toward the lower wavelength.
    // Throws std::out_of_range when wl_nm falls outside [start, end].
    int nearest_index(double wl_nm) const {
        if (wl_nm < start_nm || wl_nm > end_nm())
            throw std::out_of_range("wavelength " + std::to_string(wl_nm) +
                                    " nm outside grid range [" + std::to_string(start_nm) + ", " +
                                    std::to_string(end_nm()) + "]");
        const double f = (wl_nm - start_nm) / step_nm;
        int idx = static_cast<int>(std::ceil(f - 0.5));
        if (idx < 0) idx = 0;
        if (idx >= count) idx = count - 1;
        return idx;
    }

    void validate() const {
        if (!(step_nm > 0.0)) throw std::invalid_argument("wavelength grid step must be > 0");
        if (count < 2) throw std::invalid_argument("wavelength grid needs at least 2 samples");
        if (!std::isfinite(start_nm) || !std::isfinite(step_nm))
            throw std::invalid_argument("wavelength grid has non-finite fields");
    }

    bool operator==(const WavelengthGrid&) const = default;
};

struct Spectrum {
    WavelengthGrid grid;
    Eigen::VectorXd values;  // length grid.count

    void validate() const {
        grid.validate();
        if (values.size() != grid.count)
            throw std::invalid_argument("spectrum length does not match its wavelength grid");
        if (!values.allFinite()) throw std::invalid_argument("spectrum contains non-finite values");
    }
};

}  // namespace spectracube
