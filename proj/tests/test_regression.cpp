#include <doctest.h>

#include <filesystem>
#include <map>

#include "spectracube/metrics.hpp"
#include "spectracube/regression.hpp"
#include "spectracube/rng.hpp"

using namespace spectracube;

namespace {

// Independent oracle: every monomial R^a G^b B^c with 1 <= a+b+c <= 4.
std::vector<std::array<int, 3>> enumerate_monomials() {
    std::vector<std::array<int, 3>> out;
    for (int total = 1; total <= 4; ++total)
        for (int a = total; a >= 0; --a)
            for (int b = total - a; b >= 0; --b) out.push_back({a, b, total - a - b});
    return out;
}

SampledLine synthetic_linear_line(Rng& rng, Eigen::Index m, int k, Eigen::MatrixXd* t0_out) {
    WavelengthGrid grid;
    grid.count = k;
    Eigen::MatrixXd t0(k, kFeatureCount);
    for (Eigen::Index r = 0; r < t0.rows(); ++r)
        for (Eigen::Index c = 0; c < t0.cols(); ++c) t0(r, c) = rng.uniform(-1.0, 1.0);

    SampledLine line;
    line.grid = grid;
    line.rgb.resize(m, 3);
    line.spectra.resize(m, k);
    for (Eigen::Index i = 0; i < m; ++i) {
        line.pixel_coords.emplace_back(static_cast<int>(i), 0);
        for (int ch = 0; ch < 3; ++ch) line.rgb(i, ch) = rng.uniform01();
        line.spectra.row(i) =
            (t0 * expand_rgb(line.rgb(i, 0), line.rgb(i, 1), line.rgb(i, 2))).transpose();
    }
    if (t0_out) *t0_out = t0;
    return line;
}

}  // namespace

TEST_CASE("expansion yields exactly the 34 degree-1..4 monomials") {
    // identify each position's exponents by evaluating at (2,3,5)
    const Eigen::VectorXd probe = expand_rgb(2.0, 3.0, 5.0);
    REQUIRE(probe.size() == kFeatureCount);

    std::map<double, std::array<int, 3>> value_to_monomial;
    for (const auto& m : enumerate_monomials())
        value_to_monomial[std::pow(2.0, m[0]) * std::pow(3.0, m[1]) * std::pow(5.0, m[2])] = m;
    REQUIRE(value_to_monomial.size() == 34);  // distinct values identify uniquely

    std::vector<std::array<int, 3>> found;
    for (Eigen::Index i = 0; i < probe.size(); ++i) {
        const auto it = value_to_monomial.find(probe[i]);
        REQUIRE(it != value_to_monomial.end());
        found.push_back(it->second);
    }
    std::sort(found.begin(), found.end());
    auto expected = enumerate_monomials();
    std::sort(expected.begin(), expected.end());
    CHECK(found == expected);  // each monomial appears exactly once
}

TEST_CASE("expansion trivial values") {
    CHECK(expand_rgb(0.0, 0.0, 0.0).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd ones = expand_rgb(1.0, 1.0, 1.0);
    CHECK(ones.minCoeff() == 1.0);
    CHECK(ones.maxCoeff() == 1.0);

    const Eigen::VectorXd red = expand_rgb(1.0, 0.0, 0.0);
    int nonzero = 0;
    for (Eigen::Index i = 0; i < red.size(); ++i)
        if (red[i] != 0.0) {
            CHECK(red[i] == 1.0);
            ++nonzero;
        }
    CHECK(nonzero == 4);  // R, R^2, R^3, R^4

    const Eigen::VectorXd biased = expand_rgb(0.0, 0.0, 0.0, true);
    CHECK(biased.size() == kFeatureCount + 1);
    CHECK(biased[0] == 1.0);
    CHECK(biased.tail(kFeatureCount).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("degree scaling law on a 5x5x5 grid") {
    const auto degrees = feature_degrees();
    const double levels[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (double a : {0.5, 2.0, 3.0})
        for (double r : levels)
            for (double g : levels)
                for (double b : levels) {
                    const Eigen::VectorXd base = expand_rgb(r, g, b);
                    const Eigen::VectorXd scaled = expand_rgb(a * r, a * g, a * b);
                    for (Eigen::Index i = 0; i < base.size(); ++i)
                        CHECK(scaled[i] ==
                              doctest::Approx(std::pow(a, degrees[static_cast<size_t>(i)]) *
                                              base[i])
                                  .epsilon(1e-12));
                }
}

TEST_CASE("training recovers an exact polynomial map") {
    Rng rng(101);
    Eigen::MatrixXd t0;
    const SampledLine line = synthetic_linear_line(rng, 200, 21, &t0);
    const TrainResult result = train(line, 7, 0.8);
    CHECK(result.model.stats.rmse_train < 1e-10);
    CHECK(result.model.stats.rmse_test < 1e-9);

    for (int i = 0; i < 10; ++i) {
        const Eigen::Index row = static_cast<Eigen::Index>(rng.uniform_index(200));
        const Eigen::Vector3d rgb = line.rgb.row(row).transpose();
        const Spectrum pred = predict_spectrum(result.model, rgb);
        CHECK((pred.values.transpose() - line.spectra.row(row)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("750-point line splits into exactly 600 train and 150 test rows") {
    Rng rng(102);
    const SampledLine line = synthetic_linear_line(rng, 750, 11, nullptr);
    const TrainResult result = train(line, 1, 0.8);
    CHECK(result.model.stats.m_train == 600);
    CHECK(result.model.stats.m_test == 150);
    CHECK(result.test_indices.size() == 150);
}

TEST_CASE("identical rgb rows are rank-deficient without ridge") {
    WavelengthGrid grid;
    grid.count = 5;
    SampledLine line;
    line.grid = grid;
    line.rgb = Eigen::MatrixXd::Constant(100, 3, 0.5);
    line.spectra = Eigen::MatrixXd::Constant(100, 5, 1.0);
    for (int i = 0; i < 100; ++i) line.pixel_coords.emplace_back(i, 0);

    CHECK_THROWS_WITH_AS(static_cast<void>(train(line, 3, 0.8)),
                         doctest::Contains("rank-deficient"), std::runtime_error);

    TrainOptions opts;
    opts.ridge_lambda = 1e-8;
    const TrainResult ridge = train(line, 3, 0.8, opts);
    CHECK(ridge.model.T.allFinite());
}

TEST_CASE("training is deterministic in the split seed") {
    Rng rng(103);
    const SampledLine line = synthetic_linear_line(rng, 120, 7, nullptr);
    // exact linearity makes T independent of the split; perturb one sample
    SampledLine noisy = line;
    noisy.spectra(5, 3) += 0.25;

    const TrainResult a = train(noisy, 42, 0.8);
    const TrainResult b = train(noisy, 42, 0.8);
    CHECK(a.model.T == b.model.T);
    CHECK(a.test_indices == b.test_indices);

    const TrainResult c = train(noisy, 43, 0.8);
    CHECK(a.test_indices != c.test_indices);
}

TEST_CASE("predict edge cases") {
    Rng rng(104);
    const SampledLine line = synthetic_linear_line(rng, 100, 9, nullptr);
    RegressionModel model = train(line, 5, 0.8).model;

    const Spectrum zero_in = predict_spectrum(model, Eigen::Vector3d::Zero());
    CHECK(zero_in.values.cwiseAbs().maxCoeff() == 0.0);  // no bias term

    model.T.setZero();
    const Spectrum zero_t = predict_spectrum(model, Eigen::Vector3d(0.3, 0.8, 0.1));
    CHECK(zero_t.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("recovering a uniform image repeats the single-pixel prediction") {
    Rng rng(105);
    const SampledLine line = synthetic_linear_line(rng, 90, 6, nullptr);
    const RegressionModel model = train(line, 9, 0.8).model;

    RgbImage img(4, 5);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 5; ++c) img.set_pixel(r, c, {0.4, 0.3, 0.6});
    const RecoverResult rec = recover_cube(model, img);
    const Spectrum expected = predict_spectrum(model, {0.4, 0.3, 0.6});
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 5; ++c)
            for (int k = 0; k < 6; ++k)
                CHECK(rec.cube.at(r, c, k) ==
                      doctest::Approx(expected.values[k]).epsilon(1e-6));
}

TEST_CASE("recover flags pixels outside the training rgb range") {
    Rng rng(106);
    SampledLine line = synthetic_linear_line(rng, 80, 4, nullptr);
    // squeeze training rgb into [0.3, 0.7]
    line.rgb = (line.rgb.array() * 0.4 + 0.3).matrix();
    for (Eigen::Index i = 0; i < line.size(); ++i)
        line.spectra.row(i) =
            (Eigen::VectorXd::Ones(4) * line.rgb(i, 0)).transpose();  // any smooth map
    const RegressionModel model = train(line, 2, 0.8).model;

    RgbImage img(1, 2);
    img.set_pixel(0, 0, {0.5, 0.5, 0.5});
    img.set_pixel(0, 1, {0.95, 0.5, 0.5});
    const RecoverResult rec = recover_cube(model, img);
    CHECK(rec.out_of_range_mask == std::vector<uint8_t>{0, 1});
}

TEST_CASE("held-out residual band matches direct recomputation") {
    Rng rng(107);
    Eigen::MatrixXd t0;
    SampledLine line = synthetic_linear_line(rng, 300, 15, &t0);
    for (Eigen::Index i = 0; i < line.size(); ++i)
        for (int k = 0; k < 15; ++k) line.spectra(i, k) += rng.normal(0.0, 0.01);

    const TrainResult result = train(line, 21, 0.8);
    const ResidualBand band = residual_band(result.test_truth, result.test_predicted);

    const Eigen::Index m = result.test_truth.rows();
    for (int k = 0; k < 15; ++k) {
        const Eigen::VectorXd res = result.test_truth.col(k) - result.test_predicted.col(k);
        const double mean = res.mean();
        const double sd = std::sqrt((res.array() - mean).square().sum() /
                                    static_cast<double>(m - 1));
        CHECK(band.mean_residual[k] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(band.ci_half_width[k] ==
              doctest::Approx(1.96 * sd / std::sqrt(static_cast<double>(m))).epsilon(1e-12));
    }
}

TEST_CASE("model file round trip preserves the transform bit-exactly") {
    Rng rng(108);
    const SampledLine line = synthetic_linear_line(rng, 100, 8, nullptr);
    TrainOptions opts;
    opts.bias = true;
    const RegressionModel model = train(line, 13, 0.8, opts).model;

    const auto path = std::filesystem::temp_directory_path() / "spectracube_tests" / "model.hsl";
    std::filesystem::create_directories(path.parent_path());
    save_model(model, path);
    const RegressionModel back = load_model(path);
    CHECK(back.T == model.T);
    CHECK(back.bias == model.bias);
    CHECK(back.grid == model.grid);
    CHECK(back.stats.split_seed == model.stats.split_seed);
    CHECK(back.rgb_min == model.rgb_min);
    CHECK(back.rgb_max == model.rgb_max);
}

TEST_CASE("insufficient samples are rejected") {
    Rng rng(109);
    const SampledLine line = synthetic_linear_line(rng, 30, 4, nullptr);
    CHECK_THROWS_WITH_AS(static_cast<void>(train(line, 1, 0.8)),
                         doctest::Contains("insufficient"), std::invalid_argument);
}
