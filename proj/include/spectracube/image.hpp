#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "spectracube/grid.hpp"

namespace spectracube {

// Tristimulus image, channel values normalized to [0,1]. The originating
// bit depth is kept as metadata only; pixel values are treated as linear.
struct RgbImage {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;  // interleaved r,g,b per pixel
    int bit_depth_origin = 8;

    RgbImage() = default;
    RgbImage(int r, int c)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c) * 3, 0.0f) {}

    size_t index(int r, int c, int ch) const {
        return (static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)) * 3 +
               static_cast<size_t>(ch);
    }

    float at(int r, int c, int ch) const { return data[index(r, c, ch)]; }
    float& at(int r, int c, int ch) { return data[index(r, c, ch)]; }

    Eigen::Vector3d pixel(int r, int c) const {
        return {static_cast<double>(at(r, c, 0)), static_cast<double>(at(r, c, 1)),
                static_cast<double>(at(r, c, 2))};
    }

    void set_pixel(int r, int c, const Eigen::Vector3d& v) {
        for (int ch = 0; ch < 3; ++ch) at(r, c, ch) = static_cast<float>(v[ch]);
    }

    size_t pixel_count() const { return static_cast<size_t>(rows) * static_cast<size_t>(cols); }

    // n x 3 matrix of all pixels in row-major order.
    Eigen::MatrixXd as_matrix() const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(pixel_count()), 3);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    m(static_cast<Eigen::Index>(r) * cols + c, ch) = at(r, c, ch);
        return m;
    }

    void validate() const {
        if (rows <= 0 || cols <= 0) throw std::invalid_argument("image dimensions must be positive");
        if (data.size() != pixel_count() * 3)
            throw std::invalid_argument("image payload size inconsistent with dimensions");
        for (float v : data) {
            if (!std::isfinite(v)) throw std::invalid_argument("image contains non-finite values");
            if (v < 0.0f || v > 1.0f)
                throw std::invalid_argument("image channel value outside [0,1]");
        }
    }
};

// Co-registered hyperspectral sampling of a subarea: m pixels with both
// their RGB values and full spectra.
struct SampledLine {
    std::vector<std::pair<int, int>> pixel_coords;  // (row, col)
    Eigen::MatrixXd rgb;                            // m x 3
    Eigen::MatrixXd spectra;                        // m x k
    WavelengthGrid grid;

    Eigen::Index size() const { return rgb.rows(); }

    void validate() const {
        grid.validate();
        const auto m = static_cast<Eigen::Index>(pixel_coords.size());
        if (rgb.rows() != m || spectra.rows() != m)
            throw std::invalid_argument("sampled line row counts disagree");
        if (m < 1) throw std::invalid_argument("sampled line is empty");
        if (rgb.cols() != 3) throw std::invalid_argument("sampled line rgb must have 3 columns");
        if (spectra.cols() != grid.count)
            throw std::invalid_argument("sampled line spectra width does not match grid");
        if (!rgb.allFinite() || !spectra.allFinite())
            throw std::invalid_argument("sampled line contains non-finite values");
    }
};

}  // namespace spectracube
