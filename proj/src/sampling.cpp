#include "spectracube/sampling.hpp"

#include <algorithm>
#include <stdexcept>

namespace spectracube {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

// Two-sample Kolmogorov-Smirnov statistic on pre-sorted values.
double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

}  // namespace

SamplingReport qq_compare(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& parent,
                          int levels, const SamplingThresholds& thresholds) {
    if (sample.cols() != 3 || parent.cols() != 3)
        throw std::invalid_argument("qq_compare expects n x 3 matrices");
    if (sample.rows() < 10) throw std::invalid_argument("need at least 10 sampled rows");
    if (parent.rows() < sample.rows())
        throw std::invalid_argument("parent must be at least as large as the sample");
    if (levels < 10) throw std::invalid_argument("need at least 10 quantile levels");
    if (!sample.allFinite() || !parent.allFinite())
        throw std::invalid_argument("qq_compare input contains non-finite values");

    SamplingReport report;
    report.thresholds = thresholds;

    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> s(static_cast<size_t>(sample.rows()));
        std::vector<double> p(static_cast<size_t>(parent.rows()));
        for (Eigen::Index i = 0; i < sample.rows(); ++i) s[static_cast<size_t>(i)] = sample(i, ch);
        for (Eigen::Index i = 0; i < parent.rows(); ++i) p[static_cast<size_t>(i)] = parent(i, ch);
        std::sort(s.begin(), s.end());
        std::sort(p.begin(), p.end());

        ChannelSamplingStats& stats = report.channels[static_cast<size_t>(ch)];
        stats.qq_points.reserve(static_cast<size_t>(levels));
        for (int j = 1; j <= levels; ++j) {
            const double q = static_cast<double>(j) / (static_cast<double>(levels) + 1.0);
            const double sq = quantile_sorted(s, q);
            const double pq = quantile_sorted(p, q);
            stats.qq_points.emplace_back(sq, pq);
            stats.max_qq_deviation = std::max(stats.max_qq_deviation, std::abs(sq - pq));
        }
        stats.ks_statistic = ks_two_sample(s, p);

        const double lo = s.front(), hi = s.back();
        Eigen::Index covered = 0;
        for (Eigen::Index i = 0; i < parent.rows(); ++i)
            if (parent(i, ch) >= lo && parent(i, ch) <= hi) ++covered;
        stats.range_coverage = static_cast<double>(covered) / static_cast<double>(parent.rows());

        report.max_qq_deviation = std::max(report.max_qq_deviation, stats.max_qq_deviation);
        report.ks_statistic = std::max(report.ks_statistic, stats.ks_statistic);
        report.range_coverage = std::min(report.range_coverage, stats.range_coverage);
    }

    report.pass = report.max_qq_deviation <= thresholds.tau_qq &&
                  report.range_coverage >= thresholds.tau_rc;
    return report;
}

std::vector<uint8_t> out_of_range_mask(const RgbImage& img, const Eigen::Vector3d& rgb_min,
                                       const Eigen::Vector3d& rgb_max) {
    std::vector<uint8_t> mask(img.pixel_count(), 0);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                const double v = static_cast<double>(img.at(r, c, ch));
                if (v < rgb_min[ch] || v > rgb_max[ch]) {
                    mask[static_cast<size_t>(r) * static_cast<size_t>(img.cols) +
                         static_cast<size_t>(c)] = 1;
                    break;
                }
            }
    return mask;
}

}  // namespace spectracube
