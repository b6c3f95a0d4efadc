#include "spectracube/neural.hpp"

#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spectracube/rng.hpp"
#include "spectracube/threads.hpp"

namespace spectracube {

using nlohmann::json;

void MlpTrainConfig::validate() const {
    if (!(lr0 > 0.0) || !(lr_drop_factor > 0.0) || lr_drop_period < 1 || !(weight_decay >= 0.0) ||
        batch_size < 1 || epochs < 1 || !(val_frac >= 0.0 && val_frac < 1.0) ||
        !(bn_momentum >= 0.0 && bn_momentum < 1.0) || !(bn_eps > 0.0))
        throw std::invalid_argument("invalid training configuration");
    if (hidden.empty() || hidden.front() != 18)
        throw std::invalid_argument("first hidden layer must have 18 nodes");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("hidden sizes must be positive");
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Per-layer intermediates of a training-mode forward pass.
struct LayerCache {
    Eigen::MatrixXd z;      // pre-activation, batch x out
    Eigen::MatrixXd z_hat;  // normalized pre-activation
    Eigen::MatrixXd y;      // after BN affine
    Eigen::MatrixXd a;      // after softplus (or y itself for the output layer)
    Eigen::VectorXd mu, var, inv_std;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Eigen::MatrixXd input;
};

// Training-mode forward with batch statistics. Does not touch running stats.
Eigen::MatrixXd forward_train(const MlpModel& model, const Eigen::MatrixXd& x, ForwardCache* cache) {
    const double eps = model.cfg.bn_eps;
    Eigen::MatrixXd a = x;
    if (cache) {
        cache->input = x;
        cache->layers.resize(model.layers.size());
    }
    for (size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Eigen::MatrixXd z = (a * layer.W.transpose()).rowwise() + layer.b.transpose();
        if (!layer.has_bn) {
            if (cache) {
                cache->layers[l].z = z;
                cache->layers[l].a = z;
            }
            a = std::move(z);
            continue;
        }
        const double batch = static_cast<double>(z.rows());
        const Eigen::VectorXd mu = z.colwise().mean();
        const Eigen::MatrixXd centered = z.rowwise() - mu.transpose();
        const Eigen::VectorXd var = centered.array().square().colwise().sum() / batch;
        const Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
        Eigen::MatrixXd z_hat = centered.array().rowwise() * inv_std.transpose().array();
        Eigen::MatrixXd y =
            (z_hat.array().rowwise() * layer.gamma.transpose().array()).rowwise() +
            layer.beta.transpose().array();
        Eigen::MatrixXd act = y.unaryExpr([](double v) { return softplus(v); });
        if (cache) {
            auto& c = cache->layers[l];
            c.z = std::move(z);
            c.z_hat = std::move(z_hat);
            c.y = std::move(y);
            c.a = act;
            c.mu = mu;
            c.var = var;
            c.inv_std = inv_std;
        }
        a = std::move(act);
    }
    return a;
}

double data_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double decay_term(const MlpModel& model, double weight_decay) {
    double sum = 0.0;
    for (const auto& layer : model.layers) sum += layer.W.squaredNorm();
    return weight_decay * sum;
}

MlpGradients backward(const MlpModel& model, const ForwardCache& cache,
                      const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                      double weight_decay) {
    MlpGradients grads;
    grads.layers.resize(model.layers.size());

    // d(mean squared error)/d(pred)
    Eigen::MatrixXd delta = 2.0 * (pred - target) / static_cast<double>(pred.size());

    for (size_t li = model.layers.size(); li-- > 0;) {
        const auto& layer = model.layers[li];
        const auto& c = cache.layers[li];
        auto& g = grads.layers[li];

        Eigen::MatrixXd d_z;
        if (!layer.has_bn) {
            d_z = delta;
        } else {
            // delta is d/d(a); a = softplus(y)
            Eigen::MatrixXd d_y =
                delta.array() * c.y.unaryExpr([](double v) { return sigmoid(v); }).array();
            g.gamma = (d_y.array() * c.z_hat.array()).colwise().sum();
            g.beta = d_y.colwise().sum();

            const double batch = static_cast<double>(d_y.rows());
            const Eigen::MatrixXd d_zhat = d_y.array().rowwise() * layer.gamma.transpose().array();
            const Eigen::MatrixXd centered = c.z.rowwise() - c.mu.transpose();
            const Eigen::VectorXd d_var =
                ((d_zhat.array() * centered.array()).colwise().sum().transpose().array() *
                 (-0.5) * c.inv_std.array().cube())
                    .matrix();
            const Eigen::VectorXd d_mu =
                (-(d_zhat.array().rowwise() * c.inv_std.transpose().array()).colwise().sum())
                    .transpose()
                    .matrix() +
                d_var.cwiseProduct((-2.0 / batch) * centered.colwise().sum().transpose());
            d_z = (d_zhat.array().rowwise() * c.inv_std.transpose().array()) +
                  (centered.array().rowwise() * (2.0 / batch * d_var).transpose().array());
            d_z.rowwise() += (d_mu / batch).transpose();
        }

        const Eigen::MatrixXd& prev_a = li == 0 ? cache.input : cache.layers[li - 1].a;
        g.W = d_z.transpose() * prev_a + 2.0 * weight_decay * layer.W;
        g.b = d_z.colwise().sum();
        if (li > 0) delta = d_z * layer.W;
    }
    return grads;
}

}  // namespace

double mlp_batch_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t,
                      double weight_decay) {
    const Eigen::MatrixXd pred = forward_train(model, x, nullptr);
    return data_loss(pred, t) + decay_term(model, weight_decay);
}

MlpGradients mlp_batch_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& t, double weight_decay) {
    ForwardCache cache;
    const Eigen::MatrixXd pred = forward_train(model, x, &cache);
    return backward(model, cache, pred, t, weight_decay);
}

Eigen::MatrixXd MlpModel::predict(const Eigen::MatrixXd& rgb) const {
    if (rgb.cols() != 3) throw std::invalid_argument("predict expects n x 3 input");
    Eigen::MatrixXd a = rgb;
    for (const auto& layer : layers) {
        Eigen::MatrixXd z = (a * layer.W.transpose()).rowwise() + layer.b.transpose();
        if (!layer.has_bn) {
            a = std::move(z);
            continue;
        }
        const Eigen::VectorXd inv_std = (layer.run_var.array() + cfg.bn_eps).rsqrt();
        Eigen::MatrixXd y =
            (((z.rowwise() - layer.run_mean.transpose()).array().rowwise() *
              inv_std.transpose().array())
                 .rowwise() *
             layer.gamma.transpose().array())
                .rowwise() +
            layer.beta.transpose().array();
        a = y.unaryExpr([](double v) { return softplus(v); });
    }
    // de-standardize
    a.col(0) = a.col(0) * label_std[0];
    a.col(1) = a.col(1) * label_std[1];
    a.col(0).array() += label_mean[0];
    a.col(1).array() += label_mean[1];
    return a;
}

Eigen::VectorXd first_layer_outputs(const MlpModel& model, const Eigen::Vector3d& rgb) {
    if (model.layers.empty()) throw std::invalid_argument("model has no layers");
    return model.layers[0].W * rgb + model.layers[0].b;
}

NodeProbe node_difference_probe(const MlpModel& model, const Eigen::Vector3d& rgb_a,
                                const Eigen::Vector3d& rgb_b) {
    NodeProbe probe;
    probe.diff = first_layer_outputs(model, rgb_a) - first_layer_outputs(model, rgb_b);
    probe.rank_order.resize(static_cast<size_t>(probe.diff.size()));
    std::iota(probe.rank_order.begin(), probe.rank_order.end(), 0);
    std::stable_sort(probe.rank_order.begin(), probe.rank_order.end(),
                     [&](int a, int b) { return probe.diff[a] < probe.diff[b]; });
    return probe;
}

namespace {

MlpModel init_model(const MlpTrainConfig& cfg, Rng& rng) {
    MlpModel model;
    model.cfg = cfg;
    model.layer_sizes.push_back(3);
    for (int h : cfg.hidden) model.layer_sizes.push_back(h);
    model.layer_sizes.push_back(2);

    for (size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        const int fan_in = model.layer_sizes[l];
        const int fan_out = model.layer_sizes[l + 1];
        MlpModel::Layer layer;
        layer.W.resize(fan_out, fan_in);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.W.cols(); ++c)
                layer.W(r, c) = rng.uniform(-bound, bound);
        layer.b = Eigen::VectorXd::Zero(fan_out);
        layer.has_bn = l + 2 < model.layer_sizes.size();  // hidden layers only
        if (layer.has_bn) {
            layer.gamma = Eigen::VectorXd::Ones(fan_out);
            layer.beta = Eigen::VectorXd::Zero(fan_out);
            layer.run_mean = Eigen::VectorXd::Zero(fan_out);
            layer.run_var = Eigen::VectorXd::Ones(fan_out);
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

struct AdamState {
    std::vector<MlpGradients::Layer> m, v;
    int64_t t = 0;

    explicit AdamState(const MlpModel& model) {
        m.resize(model.layers.size());
        v.resize(model.layers.size());
        for (size_t l = 0; l < model.layers.size(); ++l) {
            const auto& layer = model.layers[l];
            m[l].W = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
            v[l].W = m[l].W;
            m[l].b = Eigen::VectorXd::Zero(layer.b.size());
            v[l].b = m[l].b;
            if (layer.has_bn) {
                m[l].gamma = Eigen::VectorXd::Zero(layer.gamma.size());
                v[l].gamma = m[l].gamma;
                m[l].beta = m[l].gamma;
                v[l].beta = m[l].gamma;
            }
        }
    }
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename T>
void adam_update(T& param, T& m, T& v, const T& grad, double lr, double bc1, double bc2) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = (kAdamBeta2 * v.array() + (1.0 - kAdamBeta2) * grad.array().square()).matrix();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

void update_running_stats(MlpModel& model, const ForwardCache& cache) {
    const double momentum = model.cfg.bn_momentum;
    for (size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        if (!layer.has_bn) continue;
        layer.run_mean = momentum * layer.run_mean + (1.0 - momentum) * cache.layers[l].mu;
        layer.run_var = momentum * layer.run_var + (1.0 - momentum) * cache.layers[l].var;
    }
}

}  // namespace

MlpTrainResult train_mlp(const Eigen::MatrixXd& rgb, const Eigen::MatrixXd& labels,
                         const MlpTrainConfig& cfg) {
    cfg.validate();
    if (rgb.cols() != 3 || labels.cols() != 2)
        throw std::invalid_argument("expected m x 3 rgb and m x 2 labels");
    if (rgb.rows() != labels.rows()) throw std::invalid_argument("rgb/label row counts differ");
    if (!rgb.allFinite() || !labels.allFinite())
        throw std::invalid_argument("training data contain non-finite values");
    const Eigen::Index m = rgb.rows();
    if (m < cfg.batch_size) throw std::invalid_argument("fewer samples than one batch");

    Rng rng(cfg.seed);
    MlpTrainResult result;
    result.model = init_model(cfg, rng);
    MlpModel& model = result.model;

    std::vector<Eigen::Index> order(static_cast<size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const auto m_train =
        static_cast<Eigen::Index>(std::llround(static_cast<double>(m) * (1.0 - cfg.val_frac)));
    if (m_train < cfg.batch_size) throw std::invalid_argument("training split smaller than a batch");
    result.train_indices.assign(order.begin(), order.begin() + m_train);
    result.val_indices.assign(order.begin() + m_train, order.end());

    // z-score labels on the training split
    Eigen::MatrixXd y_all = labels;
    for (int j = 0; j < 2; ++j) {
        double mean = 0.0;
        for (Eigen::Index i = 0; i < m_train; ++i) mean += labels(result.train_indices[static_cast<size_t>(i)], j);
        mean /= static_cast<double>(m_train);
        double var = 0.0;
        for (Eigen::Index i = 0; i < m_train; ++i) {
            const double d = labels(result.train_indices[static_cast<size_t>(i)], j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(std::max<Eigen::Index>(m_train - 1, 1));
        model.label_mean[j] = mean;
        model.label_std[j] = std::sqrt(std::max(var, 1e-24));
        y_all.col(j) = (labels.col(j).array() - mean) / model.label_std[j];
    }

    Eigen::MatrixXd x_val(result.val_indices.size(), 3);
    Eigen::MatrixXd y_val(result.val_indices.size(), 2);
    for (size_t i = 0; i < result.val_indices.size(); ++i) {
        x_val.row(static_cast<Eigen::Index>(i)) = rgb.row(result.val_indices[i]);
        y_val.row(static_cast<Eigen::Index>(i)) = y_all.row(result.val_indices[i]);
    }

    Eigen::MatrixXd x_train(m_train, 3);
    Eigen::MatrixXd y_train(m_train, 2);
    for (Eigen::Index i = 0; i < m_train; ++i) {
        x_train.row(i) = rgb.row(result.train_indices[static_cast<size_t>(i)]);
        y_train.row(i) = y_all.row(result.train_indices[static_cast<size_t>(i)]);
    }

    // inference-mode loss against standardized labels; the per-epoch history
    // then tracks the fitted function rather than batch-statistic jitter
    auto eval_loss = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        Eigen::MatrixXd pred = model.predict(x);
        pred.col(0) = (pred.col(0).array() - model.label_mean[0]) / model.label_std[0];
        pred.col(1) = (pred.col(1).array() - model.label_mean[1]) / model.label_std[1];
        return data_loss(pred, y);
    };

    AdamState adam(model);
    std::vector<Eigen::Index> epoch_order(result.train_indices);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr0 * std::pow(cfg.lr_drop_factor, epoch / cfg.lr_drop_period);
        rng.shuffle(epoch_order);

        for (Eigen::Index start = 0; start < m_train; start += cfg.batch_size) {
            const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, m_train - start);
            Eigen::MatrixXd xb(bsz, 3), yb(bsz, 2);
            for (Eigen::Index i = 0; i < bsz; ++i) {
                xb.row(i) = rgb.row(epoch_order[static_cast<size_t>(start + i)]);
                yb.row(i) = y_all.row(epoch_order[static_cast<size_t>(start + i)]);
            }

            ForwardCache cache;
            const Eigen::MatrixXd pred = forward_train(model, xb, &cache);
            const double loss = data_loss(pred, yb);
            if (!std::isfinite(loss))
                throw TrainingDivergedError("training loss diverged at epoch " +
                                                std::to_string(epoch),
                                            result.history);

            const MlpGradients grads = backward(model, cache, pred, yb, cfg.weight_decay);
            update_running_stats(model, cache);

            ++adam.t;
            const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam.t));
            for (size_t l = 0; l < model.layers.size(); ++l) {
                auto& layer = model.layers[l];
                adam_update(layer.W, adam.m[l].W, adam.v[l].W, grads.layers[l].W, lr, bc1, bc2);
                adam_update(layer.b, adam.m[l].b, adam.v[l].b, grads.layers[l].b, lr, bc1, bc2);
                if (layer.has_bn) {
                    adam_update(layer.gamma, adam.m[l].gamma, adam.v[l].gamma,
                                grads.layers[l].gamma, lr, bc1, bc2);
                    adam_update(layer.beta, adam.m[l].beta, adam.v[l].beta, grads.layers[l].beta,
                                lr, bc1, bc2);
                }
            }
        }

        result.history.train_loss.push_back(eval_loss(x_train, y_train));
        result.history.val_loss.push_back(x_val.rows() > 0 ? eval_loss(x_val, y_val) : 0.0);
    }
    return result;
}

HemodynamicMaps infer_maps(const MlpModel& model, const RgbImage& img, int threads) {
    img.validate();
    HemodynamicMaps maps(img.rows, img.cols);
    parallel_for(img.rows, threads, [&](int r0, int r1) {
        Eigen::MatrixXd block(img.cols, 3);
        for (int r = r0; r < r1; ++r) {
            for (int c = 0; c < img.cols; ++c) block.row(c) = img.pixel(r, c).transpose();
            const Eigen::MatrixXd out = model.predict(block);
            for (int c = 0; c < img.cols; ++c) {
                const double hbo2 = std::max(0.0, out(c, 0));
                const double hb = std::max(0.0, out(c, 1));
                maps.hbo2(r, c) = hbo2;
                maps.hb(r, c) = hb;
                const double total = hbo2 + hb;
                maps.spo2(r, c) = total > 0.0 ? std::clamp(hbo2 / total, 0.0, 1.0) : 0.0;
                maps.set_converged(r, c, total > 0.0);
            }
        }
    });
    return maps;
}

void save_mlp(const MlpModel& model, const std::filesystem::path& path) {
    json header;
    header["kind"] = "informed-mlp";
    header["layer_sizes"] = model.layer_sizes;
    header["label_mean"] = {model.label_mean[0], model.label_mean[1]};
    header["label_std"] = {model.label_std[0], model.label_std[1]};
    header["cfg"] = {{"lr0", model.cfg.lr0},
                     {"lr_drop_factor", model.cfg.lr_drop_factor},
                     {"lr_drop_period", model.cfg.lr_drop_period},
                     {"weight_decay", model.cfg.weight_decay},
                     {"batch_size", model.cfg.batch_size},
                     {"epochs", model.cfg.epochs},
                     {"seed", model.cfg.seed},
                     {"hidden", model.cfg.hidden},
                     {"val_frac", model.cfg.val_frac},
                     {"bn_momentum", model.cfg.bn_momentum},
                     {"bn_eps", model.cfg.bn_eps}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << header.dump() << '\n';
    auto put = [&out](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(double));
            }
    };
    for (const auto& layer : model.layers) {
        put(layer.W);
        put(layer.b);
        if (layer.has_bn) {
            put(layer.gamma);
            put(layer.beta);
            put(layer.run_mean);
            put(layer.run_var);
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

MlpModel load_mlp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
    const json header = json::parse(line);
    if (header.value("kind", "") != "informed-mlp")
        throw std::runtime_error(path.string() + ": not an MLP model file");

    MlpModel model;
    model.layer_sizes = header["layer_sizes"].get<std::vector<int>>();
    model.label_mean[0] = header["label_mean"][0].get<double>();
    model.label_mean[1] = header["label_mean"][1].get<double>();
    model.label_std[0] = header["label_std"][0].get<double>();
    model.label_std[1] = header["label_std"][1].get<double>();
    const auto& cfg = header["cfg"];
    model.cfg.lr0 = cfg["lr0"].get<double>();
    model.cfg.lr_drop_factor = cfg["lr_drop_factor"].get<double>();
    model.cfg.lr_drop_period = cfg["lr_drop_period"].get<int>();
    model.cfg.weight_decay = cfg["weight_decay"].get<double>();
    model.cfg.batch_size = cfg["batch_size"].get<int>();
    model.cfg.epochs = cfg["epochs"].get<int>();
    model.cfg.seed = cfg["seed"].get<uint64_t>();
    model.cfg.hidden = cfg["hidden"].get<std::vector<int>>();
    model.cfg.val_frac = cfg["val_frac"].get<double>();
    model.cfg.bn_momentum = cfg["bn_momentum"].get<double>();
    model.cfg.bn_eps = cfg["bn_eps"].get<double>();

    auto get_vec = [&in, &path](Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double x;
            in.read(reinterpret_cast<char*>(&x), sizeof(double));
            if (!in) throw std::runtime_error(path.string() + ": truncated payload");
            v[i] = x;
        }
        return v;
    };
    auto get_mat = [&in, &path](Eigen::Index r, Eigen::Index c) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) {
                double x;
                in.read(reinterpret_cast<char*>(&x), sizeof(double));
                if (!in) throw std::runtime_error(path.string() + ": truncated payload");
                m(i, j) = x;
            }
        return m;
    };

    for (size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        MlpModel::Layer layer;
        const int fan_in = model.layer_sizes[l];
        const int fan_out = model.layer_sizes[l + 1];
        layer.W = get_mat(fan_out, fan_in);
        layer.b = get_vec(fan_out);
        layer.has_bn = l + 2 < model.layer_sizes.size();
        if (layer.has_bn) {
            layer.gamma = get_vec(fan_out);
            layer.beta = get_vec(fan_out);
            layer.run_mean = get_vec(fan_out);
            layer.run_var = get_vec(fan_out);
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

}  // namespace spectracube
