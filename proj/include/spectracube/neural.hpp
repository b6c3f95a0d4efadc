#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "spectracube/image.hpp"
#include "spectracube/maps.hpp"

namespace spectracube {

struct MlpTrainConfig {
    double lr0 = 0.01;
    double lr_drop_factor = 0.1;
    int lr_drop_period = 5;  // epochs
    double weight_decay = 1e-5;
    int batch_size = 20;
    int epochs = 15;
    uint64_t seed = 0;
    std::vector<int> hidden = {18, 16, 8, 4};  // first hidden layer is fixed at 18 nodes
    double val_frac = 0.2;
    double bn_momentum = 0.9;  // running-stats EMA
    double bn_eps = 1e-5;

    void validate() const;
};

// Small fully connected network mapping RGB -> (HbO2, Hb). Hidden layers
// carry batch normalization on the pre-activations followed by softplus;
// the output layer is linear on z-scored labels.
struct MlpModel {
    struct Layer {
        Eigen::MatrixXd W;  // out x in
        Eigen::VectorXd b;
        bool has_bn = false;
        Eigen::VectorXd gamma, beta;         // BN affine
        Eigen::VectorXd run_mean, run_var;   // inference statistics
    };

    std::vector<int> layer_sizes;  // e.g. [3, 18, 16, 8, 4, 2]
    std::vector<Layer> layers;
    Eigen::Vector2d label_mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d label_std = Eigen::Vector2d::Ones();
    MlpTrainConfig cfg;

    // Batch forward pass with running statistics (inference mode); rows are
    // samples. Returns de-standardized (HbO2, Hb) predictions.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& rgb) const;
};

double softplus(double x);

// Pre-activation outputs of the first hidden layer, W1 * rgb + b1.
Eigen::VectorXd first_layer_outputs(const MlpModel& model, const Eigen::Vector3d& rgb);

// Interpretability probe: first-layer response difference between two RGB
// stimuli, raw (in node order) plus the ascending rank order of the nodes.
struct NodeProbe {
    Eigen::VectorXd diff;
    std::vector<int> rank_order;  // node indices sorted by ascending diff
};
NodeProbe node_difference_probe(const MlpModel& model, const Eigen::Vector3d& rgb_a,
                                const Eigen::Vector3d& rgb_b);

struct MlpTrainHistory {
    // End-of-epoch inference-mode MSE in standardized label space.
    std::vector<double> train_loss;
    std::vector<double> val_loss;
};

class TrainingDivergedError : public std::runtime_error {
  public:
    TrainingDivergedError(const std::string& what, MlpTrainHistory h)
        : std::runtime_error(what), history(std::move(h)) {}
    MlpTrainHistory history;
};

struct MlpTrainResult {
    MlpModel model;
    MlpTrainHistory history;
    std::vector<Eigen::Index> train_indices;
    std::vector<Eigen::Index> val_indices;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on MSE + weight_decay * ||W||^2,
// deterministic given cfg.seed. Labels are z-scored internally.
MlpTrainResult train_mlp(const Eigen::MatrixXd& rgb, const Eigen::MatrixXd& labels,
                         const MlpTrainConfig& cfg);

// Per-pixel inference. HbO2/Hb clamp at zero; sPO2 = HbO2/(HbO2+Hb) with
// zero-total pixels left at 0 and flagged unconverged. rss plane is zero.
HemodynamicMaps infer_maps(const MlpModel& model, const RgbImage& img, int threads = 1);

// Gradient machinery, exposed for finite-difference verification.
struct MlpGradients {
    struct Layer {
        Eigen::MatrixXd W;
        Eigen::VectorXd b, gamma, beta;
    };
    std::vector<Layer> layers;
};
// Training-mode (batch statistics) loss and gradients on a fixed batch.
double mlp_batch_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t,
                      double weight_decay);
MlpGradients mlp_batch_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& t, double weight_decay);

void save_mlp(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_mlp(const std::filesystem::path& path);

}  // namespace spectracube
