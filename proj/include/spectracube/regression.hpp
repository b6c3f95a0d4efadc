#pragma once

#include <filesystem>
#include <vector>

#include "spectracube/cube.hpp"
#include "spectracube/image.hpp"

namespace spectracube {

// Degree-1..4 monomials of (R,G,B) in their canonical order: 3 linear,
// 6 quadratic, 10 cubic, 15 quartic. No constant term; an optional single
// bias can be prepended for sensitivity studies.
inline constexpr int kFeatureCount = 34;

Eigen::VectorXd expand_rgb(double r, double g, double b, bool bias = false);

// Degree of each feature (0 for the bias when present).
std::vector<int> feature_degrees(bool bias = false);

struct TrainingStats {
    Eigen::Index m = 0;        // total sampled points
    Eigen::Index m_train = 0;
    Eigen::Index m_test = 0;
    double rmse_train = 0.0;
    double rmse_test = 0.0;
    double condition_number = 0.0;  // of the expanded design matrix
    uint64_t split_seed = 0;
    double train_frac = 0.8;
};

// The learned k x p transform from expanded RGB features to spectra.
struct RegressionModel {
    WavelengthGrid grid;
    Eigen::MatrixXd T;  // k x p
    bool bias = false;
    double ridge_lambda = 0.0;
    Eigen::Vector3d rgb_min = Eigen::Vector3d::Zero();  // training range, for masks
    Eigen::Vector3d rgb_max = Eigen::Vector3d::Ones();
    TrainingStats stats;

    int feature_count() const { return bias ? kFeatureCount + 1 : kFeatureCount; }
};

struct TrainOptions {
    bool bias = false;
    double ridge_lambda = 0.0;  // 0 disables
    // Tikhonov ridge at 1e-8 * trace(Xhat^T Xhat), for ill-conditioned or
    // rank-deficient designs (line sampling of low-dimensional scenes).
    bool auto_ridge = false;
};

struct TrainResult {
    RegressionModel model;
    // Held-out split, kept for residual confidence bands.
    std::vector<Eigen::Index> test_indices;
    Eigen::MatrixXd test_truth;      // m_test x k
    Eigen::MatrixXd test_predicted;  // m_test x k
};

// Least-squares solve of Y = T * Xhat over the training split (QR with
// column pivoting; optional ridge). Deterministic for a given split_seed.
TrainResult train(const SampledLine& line, uint64_t split_seed, double train_frac = 0.8,
                  const TrainOptions& opts = {});

Spectrum predict_spectrum(const RegressionModel& model, const Eigen::Vector3d& rgb);

struct RecoverResult {
    Hypercube cube;
    // Pixels outside the sampled RGB training range (recovered anyway).
    std::vector<uint8_t> out_of_range_mask;
};

RecoverResult recover_cube(const RegressionModel& model, const RgbImage& img, int threads = 1);

// Model container: JSON header line + row-major little-endian f64 payload of T.
void save_model(const RegressionModel& model, const std::filesystem::path& path);
RegressionModel load_model(const std::filesystem::path& path);

}  // namespace spectracube
