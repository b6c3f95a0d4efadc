#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "spectracube/image.hpp"

namespace spectracube {

struct SamplingThresholds {
    double tau_qq = 0.05;  // on [0,1]-normalized channels
    double tau_rc = 0.99;
};

struct ChannelSamplingStats {
    std::vector<std::pair<double, double>> qq_points;  // (sample quantile, parent quantile)
    double max_qq_deviation = 0.0;
    double ks_statistic = 0.0;
    double range_coverage = 1.0;
};

// Checks the identifiability assumption: the sampled subarea has to follow
// the parent image's per-channel distribution and span its value range
// before any learning on the line is trusted.
struct SamplingReport {
    std::array<ChannelSamplingStats, 3> channels;
    double max_qq_deviation = 0.0;  // max over channels
    double ks_statistic = 0.0;      // max over channels
    double range_coverage = 1.0;    // min over channels
    SamplingThresholds thresholds;
    bool pass = false;
};

// Empirical quantiles at `levels` points evenly spaced in (0,1), type-7
// estimator. Requires m >= 10 sample rows, n >= m parent rows, levels >= 10.
SamplingReport qq_compare(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& parent,
                          int levels = 100, const SamplingThresholds& thresholds = {});

// Pixels whose value in any channel falls outside the sample's [min,max]
// box. These are interpolation-unsafe during inference and get flagged in
// output masks rather than rejected.
std::vector<uint8_t> out_of_range_mask(const RgbImage& img, const Eigen::Vector3d& rgb_min,
                                       const Eigen::Vector3d& rgb_max);

// Type-7 quantile (linear interpolation between order statistics) of
// pre-sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace spectracube
