#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectracube/grid.hpp"

namespace spectracube {

// Spectral image cube. Data are stored band-sequential (plane by plane,
// row-major within a plane) in 32-bit floats, matching the on-disk
// container so round trips are bit-exact. All math lifts to doubles.
struct Hypercube {
    int rows = 0;
    int cols = 0;
    WavelengthGrid grid;
    std::vector<float> data;  // size rows*cols*grid.count

    Hypercube() = default;
    Hypercube(int r, int c, WavelengthGrid g)
        : rows(r), cols(c), grid(g),
          data(static_cast<size_t>(r) * static_cast<size_t>(c) * static_cast<size_t>(g.count), 0.0f) {}

    size_t index(int r, int c, int band) const {
        return (static_cast<size_t>(band) * static_cast<size_t>(rows) + static_cast<size_t>(r)) *
                   static_cast<size_t>(cols) +
               static_cast<size_t>(c);
    }

    float at(int r, int c, int band) const { return data[index(r, c, band)]; }
    float& at(int r, int c, int band) { return data[index(r, c, band)]; }

    Spectrum spectrum_at(int r, int c) const {
        Spectrum s;
        s.grid = grid;
        s.values.resize(grid.count);
        for (int k = 0; k < grid.count; ++k) s.values[k] = static_cast<double>(at(r, c, k));
        return s;
    }

    void set_spectrum(int r, int c, const Eigen::VectorXd& values) {
        for (int k = 0; k < grid.count; ++k) at(r, c, k) = static_cast<float>(values[k]);
    }

    // Plane at the nearest grid wavelength (ties toward the lower wavelength).
    Eigen::MatrixXd plane_at(double wavelength_nm) const {
        const int band = grid.nearest_index(wavelength_nm);
        return plane(band);
    }

    Eigen::MatrixXd plane(int band) const {
        Eigen::MatrixXd p(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) p(r, c) = static_cast<double>(at(r, c, band));
        return p;
    }

    void validate() const {
        grid.validate();
        if (rows <= 0 || cols <= 0) throw std::invalid_argument("hypercube dimensions must be positive");
        if (data.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols) *
                               static_cast<size_t>(grid.count))
            throw std::invalid_argument("hypercube payload size inconsistent with dimensions");
        for (float v : data)
            if (!std::isfinite(v)) throw std::invalid_argument("hypercube contains non-finite values");
    }
};

inline Eigen::MatrixXd slice_plane(const Hypercube& cube, double wavelength_nm) {
    return cube.plane_at(wavelength_nm);
}

}  // namespace spectracube
