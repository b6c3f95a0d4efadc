#include "spectracube/preprocess.hpp"

#include <sstream>

namespace spectracube {

namespace {

[[noreturn]] void throw_denominator_error(const std::vector<std::string>& where) {
    std::ostringstream msg;
    msg << "white-black denominator below threshold at " << where.size() << " location(s):";
    const size_t shown = std::min<size_t>(where.size(), 8);
    for (size_t i = 0; i < shown; ++i) msg << ' ' << where[i];
    if (where.size() > shown) msg << " ...";
    throw std::runtime_error(msg.str());
}

double normalize_value(double measured, double white, double black, const NormalizeOptions& opts) {
    const double v = (measured - black) / (white - black);
    return std::clamp(v, 0.0, opts.clamp_max);
}

}  // namespace

Spectrum normalize_reflectance(const Spectrum& measured, const Spectrum& white,
                               const Spectrum& black, const NormalizeOptions& opts) {
    measured.validate();
    white.validate();
    black.validate();
    if (white.grid != measured.grid || black.grid != measured.grid)
        throw std::invalid_argument("reference spectra must share the measured grid");

    std::vector<std::string> bad;
    for (int k = 0; k < measured.grid.count; ++k)
        if (white.values[k] - black.values[k] < opts.eps_den)
            bad.push_back("lambda=" + std::to_string(measured.grid.wavelength(k)));
    if (!bad.empty()) throw_denominator_error(bad);

    Spectrum out;
    out.grid = measured.grid;
    out.values.resize(measured.grid.count);
    for (int k = 0; k < measured.grid.count; ++k)
        out.values[k] = normalize_value(measured.values[k], white.values[k], black.values[k], opts);
    return out;
}

Hypercube normalize_reflectance(const Hypercube& measured, const Spectrum& white,
                                const Spectrum& black, const NormalizeOptions& opts) {
    measured.validate();
    white.validate();
    black.validate();
    if (white.grid != measured.grid || black.grid != measured.grid)
        throw std::invalid_argument("reference spectra must share the cube grid");

    std::vector<std::string> bad;
    for (int k = 0; k < measured.grid.count; ++k)
        if (white.values[k] - black.values[k] < opts.eps_den)
            bad.push_back("lambda=" + std::to_string(measured.grid.wavelength(k)));
    if (!bad.empty()) throw_denominator_error(bad);

    Hypercube out(measured.rows, measured.cols, measured.grid);
    for (int k = 0; k < measured.grid.count; ++k) {
        const double w = white.values[k], b = black.values[k];
        for (int r = 0; r < measured.rows; ++r)
            for (int c = 0; c < measured.cols; ++c)
                out.at(r, c, k) = static_cast<float>(
                    normalize_value(static_cast<double>(measured.at(r, c, k)), w, b, opts));
    }
    return out;
}

Hypercube normalize_reflectance(const Hypercube& measured, const Hypercube& white,
                                const Hypercube& black, const NormalizeOptions& opts) {
    measured.validate();
    white.validate();
    black.validate();
    if (white.rows != measured.rows || white.cols != measured.cols || white.grid != measured.grid ||
        black.rows != measured.rows || black.cols != measured.cols || black.grid != measured.grid)
        throw std::invalid_argument("reference cubes must share the measured shape and grid");

    std::vector<std::string> bad;
    Hypercube out(measured.rows, measured.cols, measured.grid);
    for (int k = 0; k < measured.grid.count; ++k)
        for (int r = 0; r < measured.rows; ++r)
            for (int c = 0; c < measured.cols; ++c) {
                const double w = white.at(r, c, k), b = black.at(r, c, k);
                if (w - b < opts.eps_den) {
                    if (bad.size() < 64)
                        bad.push_back("(" + std::to_string(r) + "," + std::to_string(c) +
                                      ",lambda=" + std::to_string(measured.grid.wavelength(k)) + ")");
                    continue;
                }
                out.at(r, c, k) = static_cast<float>(
                    normalize_value(static_cast<double>(measured.at(r, c, k)), w, b, opts));
            }
    if (!bad.empty()) throw_denominator_error(bad);
    return out;
}

RgbImage normalize_reflectance(const RgbImage& measured, const RgbImage& white,
                               const RgbImage& black, const NormalizeOptions& opts) {
    measured.validate();
    white.validate();
    black.validate();
    if (white.rows != measured.rows || white.cols != measured.cols ||
        black.rows != measured.rows || black.cols != measured.cols)
        throw std::invalid_argument("reference images must share the measured shape");

    std::vector<std::string> bad;
    RgbImage out(measured.rows, measured.cols);
    out.bit_depth_origin = measured.bit_depth_origin;
    for (int r = 0; r < measured.rows; ++r)
        for (int c = 0; c < measured.cols; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                const double w = white.at(r, c, ch), b = black.at(r, c, ch);
                if (w - b < opts.eps_den) {
                    if (bad.size() < 64)
                        bad.push_back("(" + std::to_string(r) + "," + std::to_string(c) + ",ch" +
                                      std::to_string(ch) + ")");
                    continue;
                }
                // reflectance images clamp to [0,1] on the image type, wider
                // clamp_max applies to spectra/cubes only
                out.at(r, c, ch) = static_cast<float>(std::min(
                    1.0, normalize_value(static_cast<double>(measured.at(r, c, ch)), w, b, opts)));
            }
    if (!bad.empty()) throw_denominator_error(bad);
    return out;
}

RgbImage normalize_reflectance(const RgbImage& measured, const Eigen::Vector3d& white,
                               const Eigen::Vector3d& black, const NormalizeOptions& opts) {
    measured.validate();
    std::vector<std::string> bad;
    for (int ch = 0; ch < 3; ++ch)
        if (white[ch] - black[ch] < opts.eps_den) bad.push_back("ch" + std::to_string(ch));
    if (!bad.empty()) throw_denominator_error(bad);

    RgbImage out(measured.rows, measured.cols);
    out.bit_depth_origin = measured.bit_depth_origin;
    for (int r = 0; r < measured.rows; ++r)
        for (int c = 0; c < measured.cols; ++c)
            for (int ch = 0; ch < 3; ++ch)
                out.at(r, c, ch) = static_cast<float>(
                    std::min(1.0, normalize_value(static_cast<double>(measured.at(r, c, ch)),
                                                  white[ch], black[ch], opts)));
    return out;
}

Eigen::MatrixXd normalize_reflectance(const Eigen::MatrixXd& measured, const Eigen::Vector3d& white,
                                      const Eigen::Vector3d& black, const NormalizeOptions& opts) {
    if (measured.cols() != 3) throw std::invalid_argument("expected an n x 3 sample matrix");
    if (!measured.allFinite()) throw std::invalid_argument("samples contain non-finite values");
    std::vector<std::string> bad;
    for (int ch = 0; ch < 3; ++ch)
        if (white[ch] - black[ch] < opts.eps_den) bad.push_back("ch" + std::to_string(ch));
    if (!bad.empty()) throw_denominator_error(bad);

    Eigen::MatrixXd out(measured.rows(), 3);
    for (Eigen::Index i = 0; i < measured.rows(); ++i)
        for (int ch = 0; ch < 3; ++ch)
            out(i, ch) = normalize_value(measured(i, ch), white[ch], black[ch], opts);
    return out;
}

ColorCorrection fit_color_correction(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2) {
    if (x1.cols() != 3 || x2.cols() != 3)
        throw std::invalid_argument("color samples must be n x 3 matrices");
    if (x1.rows() != x2.rows()) throw std::invalid_argument("sample counts differ");
    if (x1.rows() < 3) throw std::invalid_argument("need at least 3 color samples");
    if (!x1.allFinite() || !x2.allFinite())
        throw std::invalid_argument("color samples contain non-finite values");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x1, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv[2] <= sv[0] * 1e-12) throw std::runtime_error("degenerate color sample set");

    // x2 ~ x1 * M^T solved column-wise, then transposed.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x1);
    ColorCorrection cc;
    cc.M = qr.solve(x2).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> msvd(cc.M);
    cc.condition_number = msvd.singularValues()[0] / msvd.singularValues()[2];
    cc.residual_rms = std::sqrt((x2 - x1 * cc.M.transpose()).squaredNorm() /
                                static_cast<double>(x2.size()));
    return cc;
}

RgbImage apply_color_correction(const RgbImage& img, const ColorCorrection& cc) {
    img.validate();
    if (!cc.M.allFinite()) throw std::invalid_argument("color correction matrix is not finite");
    RgbImage out(img.rows, img.cols);
    out.bit_depth_origin = img.bit_depth_origin;
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            const Eigen::Vector3d v = cc.M * img.pixel(r, c);
            out.set_pixel(r, c,
                          v.cwiseMax(Eigen::Vector3d::Zero()).cwiseMin(Eigen::Vector3d::Ones()));
        }
    return out;
}

}  // namespace spectracube
