#include "spectracube/metrics.hpp"

#include <algorithm>

namespace spectracube {

double sam(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sam: spectra lengths differ");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("sam: zero-norm spectrum");
    const double ratio = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return std::acos(ratio);
}

double sam(const Spectrum& a, const Spectrum& b) {
    if (a.grid != b.grid) throw std::invalid_argument("sam: spectra grids differ");
    return sam(a.values, b.values);
}

SamMap sam_map(const Hypercube& a, const Hypercube& b) {
    if (a.rows != b.rows || a.cols != b.cols || a.grid != b.grid)
        throw std::invalid_argument("sam_map: cube dimensions or grids differ");

    // plane-sequential accumulation keeps the access pattern cache friendly
    Eigen::MatrixXd dot = Eigen::MatrixXd::Zero(a.rows, a.cols);
    Eigen::MatrixXd norm_a = Eigen::MatrixXd::Zero(a.rows, a.cols);
    Eigen::MatrixXd norm_b = Eigen::MatrixXd::Zero(a.rows, a.cols);
    for (int k = 0; k < a.grid.count; ++k)
        for (int r = 0; r < a.rows; ++r)
            for (int c = 0; c < a.cols; ++c) {
                const double va = static_cast<double>(a.at(r, c, k));
                const double vb = static_cast<double>(b.at(r, c, k));
                dot(r, c) += va * vb;
                norm_a(r, c) += va * va;
                norm_b(r, c) += vb * vb;
            }

    SamMap map;
    map.angle.resize(a.rows, a.cols);
    std::vector<double> all;
    all.reserve(static_cast<size_t>(a.rows) * static_cast<size_t>(a.cols));
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) {
            const double den = std::sqrt(norm_a(r, c)) * std::sqrt(norm_b(r, c));
            if (den == 0.0)
                throw std::invalid_argument("sam_map: zero-norm spectrum at pixel (" +
                                            std::to_string(r) + "," + std::to_string(c) + ")");
            map.angle(r, c) = std::acos(std::clamp(dot(r, c) / den, -1.0, 1.0));
            all.push_back(map.angle(r, c));
        }
    map.mean = map.angle.mean();
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2),
                     all.end());
    map.median = all[all.size() / 2];
    return map;
}

SsimResult ssim(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q, double o1, double o2,
                double h) {
    if (p.rows() != q.rows() || p.cols() != q.cols())
        throw std::invalid_argument("ssim: image shapes differ");
    if (p.size() < 2) throw std::invalid_argument("ssim: images too small");
    if (!(h > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");

    const double n = static_cast<double>(p.size());
    const double mu_p = p.mean();
    const double mu_q = q.mean();
    double var_p = 0.0, var_q = 0.0, cov = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c)
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            const double dp = p(r, c) - mu_p;
            const double dq = q(r, c) - mu_q;
            var_p += dp * dp;
            var_q += dq * dq;
            cov += dp * dq;
        }
    var_p /= n - 1.0;
    var_q /= n - 1.0;
    cov /= n - 1.0;
    const double sd_p = std::sqrt(var_p);
    const double sd_q = std::sqrt(var_q);

    SsimResult res;
    res.o1 = o1;
    res.o2 = o2;
    res.h = h;
    res.v1 = (o1 * h) * (o1 * h);
    res.v2 = (o2 * h) * (o2 * h);
    res.v3 = res.v2 / 2.0;
    res.luminance = (2.0 * mu_p * mu_q + res.v1) / (mu_p * mu_p + mu_q * mu_q + res.v1);
    res.contrast = (2.0 * sd_p * sd_q + res.v2) / (sd_p * sd_p + sd_q * sd_q + res.v2);
    res.structure = (cov + res.v3) / (sd_p * sd_q + res.v3);
    // contrast*structure collapses to this ratio (V3 = V2/2), which keeps
    // identical inputs at exactly 1.0 without a sqrt round trip
    res.value = res.luminance * (2.0 * cov + res.v2) / (var_p + var_q + res.v2);
    return res;
}

SsimResult ssim_auto(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q, double o1, double o2) {
    const double hi = std::max(p.maxCoeff(), q.maxCoeff());
    const double lo = std::min(p.minCoeff(), q.minCoeff());
    const double h = hi - lo > 0.0 ? hi - lo : 1.0;
    return ssim(p, q, o1, o2, h);
}

ResidualBand residual_band(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw std::invalid_argument("residual_band: shapes differ");
    const Eigen::Index m = truth.rows();
    if (m < 2) throw std::invalid_argument("residual_band: need at least 2 rows");

    ResidualBand band;
    band.mean_residual.resize(truth.cols());
    band.ci_half_width.resize(truth.cols());
    for (Eigen::Index k = 0; k < truth.cols(); ++k) {
        const Eigen::VectorXd res = truth.col(k) - estimate.col(k);
        const double mean = res.mean();
        const double sd =
            std::sqrt((res.array() - mean).square().sum() / static_cast<double>(m - 1));
        band.mean_residual[k] = mean;
        band.ci_half_width[k] = 1.96 * sd / std::sqrt(static_cast<double>(m));
    }
    return band;
}

void SegmentationThresholds::validate() const {
    for (const auto& box : {vessel, avascular})
        for (const auto& range : box) {
            if (range.lo > range.hi)
                throw std::invalid_argument("segmentation threshold has min > max");
            if (range.lo < 0.0 || range.hi > 1.0)
                throw std::invalid_argument("segmentation thresholds must lie in [0,1]");
        }
}

size_t SegmentationMask::vessel_count() const {
    size_t n = 0;
    for (uint8_t v : vessel) n += v;
    return n;
}

SegmentationMask segment_vessels(const RgbImage& img, const SegmentationThresholds& thresholds) {
    img.validate();
    thresholds.validate();
    SegmentationMask mask;
    mask.rows = img.rows;
    mask.cols = img.cols;
    mask.thresholds = thresholds;
    mask.vessel.assign(img.pixel_count(), 0);
    mask.avascular.assign(img.pixel_count(), 0);

    auto in_box = [](const std::array<ChannelRange, 3>& box, const RgbImage& image, int r, int c) {
        for (int ch = 0; ch < 3; ++ch) {
            const double v = static_cast<double>(image.at(r, c, ch));
            if (v < box[static_cast<size_t>(ch)].lo || v > box[static_cast<size_t>(ch)].hi)
                return false;
        }
        return true;
    };

    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            const size_t i =
                static_cast<size_t>(r) * static_cast<size_t>(img.cols) + static_cast<size_t>(c);
            if (in_box(thresholds.vessel, img, r, c)) mask.vessel[i] = 1;
            if (in_box(thresholds.avascular, img, r, c)) mask.avascular[i] = 1;
        }
    return mask;
}

}  // namespace spectracube
