#pragma once

#include <array>
#include <vector>

#include "spectracube/cube.hpp"
#include "spectracube/image.hpp"

namespace spectracube {

// Spectral angle in radians, Eq.-style cos^-1 of the normalized dot product.
// Scale-invariant; zero-norm spectra are an error.
double sam(const Spectrum& a, const Spectrum& b);
double sam(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct SamMap {
    Eigen::MatrixXd angle;  // radians, in [0, pi]
    double mean = 0.0;
    double median = 0.0;
};
SamMap sam_map(const Hypercube& a, const Hypercube& b);

struct SsimResult {
    double value = 0.0;
    double luminance = 0.0;  // J_L
    double contrast = 0.0;   // J_C
    double structure = 0.0;  // J_S
    double v1 = 0.0, v2 = 0.0, v3 = 0.0;
    double o1 = 0.0, o2 = 0.0, h = 0.0;
};

// Global (whole-image moments) structural similarity. V1=(O1*H)^2,
// V2=(O2*H)^2, V3=V2/2. Identical inputs give exactly 1.0.
SsimResult ssim(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q, double o1, double o2, double h);
// H taken from the joint data range of the pair (1.0 for constant pairs).
SsimResult ssim_auto(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q, double o1 = 0.01,
                     double o2 = 0.03);

// Per-wavelength residual (truth - estimate) mean with normal-approximation
// 95% confidence half-widths 1.96 * sd / sqrt(m).
struct ResidualBand {
    Eigen::VectorXd mean_residual;   // length k
    Eigen::VectorXd ci_half_width;   // length k
};
ResidualBand residual_band(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

struct ChannelRange {
    double lo = 0.0;
    double hi = 1.0;
};

struct SegmentationThresholds {
    std::array<ChannelRange, 3> vessel;
    std::array<ChannelRange, 3> avascular;

    // Empirical RGB boxes for the vessel / avascular split.
    static SegmentationThresholds defaults() {
        SegmentationThresholds t;
        t.vessel = {{{0.29, 1.00}, {0.14, 1.00}, {0.14, 1.00}}};
        t.avascular = {{{0.00, 0.29}, {0.00, 0.11}, {0.00, 0.13}}};
        return t;
    }
    void validate() const;
};

// Pixel joins a class iff all three channels sit inside that class's box.
// Pixels matching neither stay unclassified rather than being guessed.
struct SegmentationMask {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> vessel;
    std::vector<uint8_t> avascular;
    SegmentationThresholds thresholds;

    bool vessel_at(int r, int c) const {
        return vessel[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)] != 0;
    }
    bool avascular_at(int r, int c) const {
        return avascular[static_cast<size_t>(r) * static_cast<size_t>(cols) +
                         static_cast<size_t>(c)] != 0;
    }
    bool unclassified_at(int r, int c) const { return !vessel_at(r, c) && !avascular_at(r, c); }
    size_t vessel_count() const;
};

SegmentationMask segment_vessels(const RgbImage& img,
                                 const SegmentationThresholds& thresholds =
                                     SegmentationThresholds::defaults());

}  // namespace spectracube
