#pragma once

#include <optional>
#include <variant>

#include "spectracube/cube.hpp"
#include "spectracube/image.hpp"

namespace spectracube {

struct NormalizeOptions {
    double eps_den = 1e-6;   // minimum white-black denominator
    double clamp_max = 2.0;  // specular glints can push reflectance past 1
};

// Reflectance normalization (measured - black) / (white - black).
// The references must share the shape of the data they normalize; a cube
// accepts either per-pixel reference cubes or a single reference spectrum
// applied everywhere, and an image accepts reference images or flat-field
// per-channel scalars.
Spectrum normalize_reflectance(const Spectrum& measured, const Spectrum& white,
                               const Spectrum& black, const NormalizeOptions& opts = {});
Hypercube normalize_reflectance(const Hypercube& measured, const Spectrum& white,
                                const Spectrum& black, const NormalizeOptions& opts = {});
Hypercube normalize_reflectance(const Hypercube& measured, const Hypercube& white,
                                const Hypercube& black, const NormalizeOptions& opts = {});
RgbImage normalize_reflectance(const RgbImage& measured, const RgbImage& white,
                               const RgbImage& black, const NormalizeOptions& opts = {});
RgbImage normalize_reflectance(const RgbImage& measured, const Eigen::Vector3d& white,
                               const Eigen::Vector3d& black, const NormalizeOptions& opts = {});

// Raw n x 3 tristimulus samples (e.g. a sampled-line rgb block). Unlike the
// image overloads this keeps the full [0, clamp_max] reflectance range.
Eigen::MatrixXd normalize_reflectance(const Eigen::MatrixXd& measured, const Eigen::Vector3d& white,
                                      const Eigen::Vector3d& black,
                                      const NormalizeOptions& opts = {});

// 3x3 transform mapping one camera's tristimulus values onto another's.
struct ColorCorrection {
    Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
    double condition_number = 1.0;
    double residual_rms = 0.0;  // of the least-squares solve over the samples
};

// Least-squares fit of M minimizing ||x2 - M x1||^2 over n >= 3 samples.
// Throws on a rank-deficient sample set.
ColorCorrection fit_color_correction(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2);

// Per-pixel mapping by M, clamped back to [0,1].
RgbImage apply_color_correction(const RgbImage& img, const ColorCorrection& cc);

}  // namespace spectracube
