#include "spectracube/regression.hpp"

#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spectracube/rng.hpp"
#include "spectracube/sampling.hpp"
#include "spectracube/threads.hpp"

namespace spectracube {

using nlohmann::json;

Eigen::VectorXd expand_rgb(double r, double g, double b, bool bias) {
    if (!std::isfinite(r) || !std::isfinite(g) || !std::isfinite(b))
        throw std::invalid_argument("expand_rgb requires finite inputs");
    Eigen::VectorXd f(bias ? kFeatureCount + 1 : kFeatureCount);
    Eigen::Index i = 0;
    if (bias) f[i++] = 1.0;
    // linear
    f[i++] = r;
    f[i++] = g;
    f[i++] = b;
    // quadratic
    f[i++] = r * r;
    f[i++] = g * g;
    f[i++] = b * b;
    f[i++] = r * g;
    f[i++] = g * b;
    f[i++] = r * b;
    // cubic
    f[i++] = r * r * r;
    f[i++] = g * g * g;
    f[i++] = b * b * b;
    f[i++] = r * g * g;
    f[i++] = r * b * b;
    f[i++] = g * r * r;
    f[i++] = g * b * b;
    f[i++] = b * r * r;
    f[i++] = b * g * g;
    f[i++] = r * g * b;
    // quartic
    f[i++] = r * r * r * r;
    f[i++] = g * g * g * g;
    f[i++] = b * b * b * b;
    f[i++] = r * r * r * g;
    f[i++] = r * r * r * b;
    f[i++] = g * g * g * r;
    f[i++] = g * g * g * b;
    f[i++] = b * b * b * r;
    f[i++] = b * b * b * g;
    f[i++] = r * r * g * g;
    f[i++] = r * r * b * b;
    f[i++] = g * g * b * b;
    f[i++] = r * r * g * b;
    f[i++] = g * g * r * b;
    f[i++] = b * b * r * g;
    return f;
}

std::vector<int> feature_degrees(bool bias) {
    std::vector<int> deg;
    if (bias) deg.push_back(0);
    deg.insert(deg.end(), 3, 1);
    deg.insert(deg.end(), 6, 2);
    deg.insert(deg.end(), 10, 3);
    deg.insert(deg.end(), 15, 4);
    return deg;
}

TrainResult train(const SampledLine& line, uint64_t split_seed, double train_frac,
                  const TrainOptions& opts) {
    line.validate();
    const Eigen::Index m = line.size();
    const int p = opts.bias ? kFeatureCount + 1 : kFeatureCount;
    const auto m_train = static_cast<Eigen::Index>(std::llround(static_cast<double>(m) * train_frac));
    if (m_train < p)
        throw std::invalid_argument("insufficient samples: need at least " + std::to_string(p) +
                                    " training rows, got " + std::to_string(m_train));
    const Eigen::Index m_test = m - m_train;

    std::vector<Eigen::Index> order(static_cast<size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(split_seed);
    rng.shuffle(order);

    Eigen::MatrixXd x_train(m_train, p);  // design matrix, rows = samples
    Eigen::MatrixXd y_train(m_train, line.grid.count);
    for (Eigen::Index i = 0; i < m_train; ++i) {
        const Eigen::Index src = order[static_cast<size_t>(i)];
        x_train.row(i) =
            expand_rgb(line.rgb(src, 0), line.rgb(src, 1), line.rgb(src, 2), opts.bias).transpose();
        y_train.row(i) = line.spectra.row(src);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x_train);
    const auto& sv = svd.singularValues();
    const double cond = sv[sv.size() - 1] > 0.0
                            ? sv[0] / sv[sv.size() - 1]
                            : std::numeric_limits<double>::infinity();

    double ridge = opts.ridge_lambda;
    if (opts.auto_ridge && ridge <= 0.0) ridge = 1e-8 * x_train.squaredNorm();

    Eigen::MatrixXd t_t;  // p x k, transpose of the transform
    if (ridge > 0.0) {
        const Eigen::MatrixXd gram =
            x_train.transpose() * x_train + ridge * Eigen::MatrixXd::Identity(p, p);
        t_t = gram.ldlt().solve(x_train.transpose() * y_train);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x_train);
        if (qr.rank() < p)
            throw std::runtime_error(
                "rank-deficient feature matrix (rank " + std::to_string(qr.rank()) + " < " +
                std::to_string(p) + "); enable ridge regularization to proceed");
        t_t = qr.solve(y_train);
    }

    TrainResult result;
    RegressionModel& model = result.model;
    model.grid = line.grid;
    model.T = t_t.transpose();
    model.bias = opts.bias;
    model.ridge_lambda = ridge;
    for (int ch = 0; ch < 3; ++ch) {
        model.rgb_min[ch] = line.rgb.col(ch).minCoeff();
        model.rgb_max[ch] = line.rgb.col(ch).maxCoeff();
    }
    model.stats.m = m;
    model.stats.m_train = m_train;
    model.stats.m_test = m_test;
    model.stats.condition_number = cond;
    model.stats.split_seed = split_seed;
    model.stats.train_frac = train_frac;
    model.stats.rmse_train =
        std::sqrt((y_train - x_train * t_t).squaredNorm() / static_cast<double>(y_train.size()));

    result.test_truth.resize(m_test, line.grid.count);
    result.test_predicted.resize(m_test, line.grid.count);
    result.test_indices.reserve(static_cast<size_t>(m_test));
    for (Eigen::Index i = 0; i < m_test; ++i) {
        const Eigen::Index src = order[static_cast<size_t>(m_train + i)];
        result.test_indices.push_back(src);
        result.test_truth.row(i) = line.spectra.row(src);
        result.test_predicted.row(i) =
            (expand_rgb(line.rgb(src, 0), line.rgb(src, 1), line.rgb(src, 2), opts.bias)
                 .transpose() *
             t_t);
    }
    model.stats.rmse_test =
        m_test > 0 ? std::sqrt((result.test_truth - result.test_predicted).squaredNorm() /
                               static_cast<double>(result.test_truth.size()))
                   : 0.0;
    return result;
}

Spectrum predict_spectrum(const RegressionModel& model, const Eigen::Vector3d& rgb) {
    Spectrum s;
    s.grid = model.grid;
    s.values = model.T * expand_rgb(rgb[0], rgb[1], rgb[2], model.bias);
    return s;
}

RecoverResult recover_cube(const RegressionModel& model, const RgbImage& img, int threads) {
    img.validate();
    RecoverResult result;
    result.cube = Hypercube(img.rows, img.cols, model.grid);
    result.out_of_range_mask = out_of_range_mask(img, model.rgb_min, model.rgb_max);

    const int p = model.feature_count();
    Hypercube& cube = result.cube;
    parallel_for(img.rows, threads, [&](int r0, int r1) {
        Eigen::MatrixXd features(p, img.cols);
        for (int r = r0; r < r1; ++r) {
            for (int c = 0; c < img.cols; ++c)
                features.col(c) = expand_rgb(img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2),
                                             model.bias);
            const Eigen::MatrixXd row_spectra = model.T * features;  // k x cols
            for (int k = 0; k < model.grid.count; ++k)
                for (int c = 0; c < img.cols; ++c)
                    cube.at(r, c, k) = static_cast<float>(row_spectra(k, c));
        }
    });
    return result;
}

void save_model(const RegressionModel& model, const std::filesystem::path& path) {
    json header;
    header["kind"] = "hsl-regression";
    header["wl_start_nm"] = model.grid.start_nm;
    header["wl_step_nm"] = model.grid.step_nm;
    header["wl_count"] = model.grid.count;
    header["p"] = model.feature_count();
    header["bias"] = model.bias;
    header["ridge_lambda"] = model.ridge_lambda;
    header["rgb_min"] = {model.rgb_min[0], model.rgb_min[1], model.rgb_min[2]};
    header["rgb_max"] = {model.rgb_max[0], model.rgb_max[1], model.rgb_max[2]};
    header["stats"] = {{"m", model.stats.m},
                       {"m_train", model.stats.m_train},
                       {"m_test", model.stats.m_test},
                       {"rmse_train", model.stats.rmse_train},
                       {"rmse_test", model.stats.rmse_test},
                       {"condition_number", model.stats.condition_number},
                       {"split_seed", model.stats.split_seed},
                       {"train_frac", model.stats.train_frac}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << header.dump() << '\n';
    for (Eigen::Index r = 0; r < model.T.rows(); ++r)
        for (Eigen::Index c = 0; c < model.T.cols(); ++c) {
            const double v = model.T(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

RegressionModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
    json header = json::parse(line);
    if (header.value("kind", "") != "hsl-regression")
        throw std::runtime_error(path.string() + ": not a regression model file");

    RegressionModel model;
    model.grid.start_nm = header["wl_start_nm"].get<double>();
    model.grid.step_nm = header["wl_step_nm"].get<double>();
    model.grid.count = header["wl_count"].get<int>();
    model.grid.validate();
    model.bias = header["bias"].get<bool>();
    model.ridge_lambda = header["ridge_lambda"].get<double>();
    for (int ch = 0; ch < 3; ++ch) {
        model.rgb_min[ch] = header["rgb_min"][static_cast<size_t>(ch)].get<double>();
        model.rgb_max[ch] = header["rgb_max"][static_cast<size_t>(ch)].get<double>();
    }
    const auto& st = header["stats"];
    model.stats.m = st["m"].get<Eigen::Index>();
    model.stats.m_train = st["m_train"].get<Eigen::Index>();
    model.stats.m_test = st["m_test"].get<Eigen::Index>();
    model.stats.rmse_train = st["rmse_train"].get<double>();
    model.stats.rmse_test = st["rmse_test"].get<double>();
    model.stats.condition_number = st["condition_number"].get<double>();
    model.stats.split_seed = st["split_seed"].get<uint64_t>();
    model.stats.train_frac = st["train_frac"].get<double>();

    const int p = header["p"].get<int>();
    if (p != model.feature_count())
        throw std::runtime_error(path.string() + ": feature count disagrees with bias flag");
    model.T.resize(model.grid.count, p);
    for (Eigen::Index r = 0; r < model.T.rows(); ++r)
        for (Eigen::Index c = 0; c < model.T.cols(); ++c) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(double));
            if (!in) throw std::runtime_error(path.string() + ": truncated payload");
            model.T(r, c) = v;
        }
    return model;
}

}  // namespace spectracube
