#include "spectracube/signal.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>

#include <fftw3.h>

namespace spectracube {

namespace {

std::mutex fftw_planning_mutex;  // FFTW planning is not thread-safe

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& in, int sign) {
    const int n = static_cast<int>(in.size());
    std::vector<std::complex<double>> out(in.size());
    std::vector<std::complex<double>> work(in);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planning_mutex);
        plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(work.data()),
                                reinterpret_cast<fftw_complex*>(out.data()), sign,
                                FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planning_mutex);
        fftw_destroy_plan(plan);
    }
    return out;
}

struct Biquad {
    // y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
    double b0, b1, b2, a1, a2;

    std::complex<double> response(double omega) const {
        const std::complex<double> z1 = std::polar(1.0, -omega);
        const std::complex<double> z2 = z1 * z1;
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
    }

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

// 3rd-order analog Butterworth lowpass prototype -> bandpass transform ->
// bilinear discretization, grouped into second-order sections.
std::vector<Biquad> design_butterworth_bandpass(double fs, double f_lo, double f_hi, int order) {
    const double wl = 2.0 * fs * std::tan(M_PI * f_lo / fs);  // prewarped edges
    const double wh = 2.0 * fs * std::tan(M_PI * f_hi / fs);
    const double w0sq = wl * wh;
    const double bw = wh - wl;

    // unit-circle lowpass poles
    std::vector<std::complex<double>> analog_poles;
    for (int k = 1; k <= order; ++k) {
        const double theta = M_PI * (2.0 * k + order - 1.0) / (2.0 * order);
        const std::complex<double> proto(std::cos(theta), std::sin(theta));
        const std::complex<double> pb = proto * bw;
        const std::complex<double> disc = std::sqrt(pb * pb - 4.0 * w0sq);
        analog_poles.push_back((pb + disc) / 2.0);
        analog_poles.push_back((pb - disc) / 2.0);
    }

    std::vector<std::complex<double>> digital_poles;
    digital_poles.reserve(analog_poles.size());
    for (const auto& s : analog_poles) digital_poles.push_back((2.0 * fs + s) / (2.0 * fs - s));

    // pair conjugates (and leftover real poles with each other)
    std::vector<std::pair<std::complex<double>, std::complex<double>>> pairs;
    std::vector<std::complex<double>> complex_poles, real_poles;
    for (const auto& p : digital_poles) {
        if (std::abs(p.imag()) > 1e-12)
            complex_poles.push_back(p);
        else
            real_poles.emplace_back(p.real(), 0.0);
    }
    std::vector<bool> used(complex_poles.size(), false);
    for (size_t i = 0; i < complex_poles.size(); ++i) {
        if (used[i]) continue;
        size_t best = i;
        double best_dist = std::numeric_limits<double>::max();
        for (size_t j = i + 1; j < complex_poles.size(); ++j) {
            if (used[j]) continue;
            const double dist = std::abs(complex_poles[j] - std::conj(complex_poles[i]));
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        if (best == i) throw std::logic_error("unpaired complex pole in filter design");
        used[i] = used[best] = true;
        pairs.emplace_back(complex_poles[i], complex_poles[best]);
    }
    std::sort(real_poles.begin(), real_poles.end(),
              [](const auto& a, const auto& b) { return a.real() < b.real(); });
    for (size_t i = 0; i + 1 < real_poles.size(); i += 2)
        pairs.emplace_back(real_poles[i], real_poles[i + 1]);

    // bandpass zeros land at z = +1 and z = -1; one of each per section
    std::vector<Biquad> sections;
    for (const auto& [p, q] : pairs) {
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        s.a1 = -(p + q).real();
        s.a2 = (p * q).real();
        sections.push_back(s);
    }

    // unit gain at the geometric band center
    const double f0 = std::sqrt(f_lo * f_hi);
    const double omega0 = 2.0 * M_PI * f0 / fs;
    std::complex<double> total(1.0, 0.0);
    for (const auto& s : sections) total *= s.response(omega0);
    const double gain = 1.0 / std::abs(total);
    sections.front().b0 *= gain;
    sections.front().b1 *= gain;
    sections.front().b2 *= gain;
    return sections;
}

// One pass through the cascade, transposed direct form II, with the state
// initialized to the step steady state scaled by the first sample. A filter
// whose sections all reject DC then starts transient-free on a constant.
std::vector<double> sos_filter(const std::vector<Biquad>& sections, std::vector<double> x) {
    double amplitude = x.empty() ? 0.0 : x.front();
    for (const auto& s : sections) {
        const double ydc = s.dc_gain();
        double s1 = amplitude * (ydc - s.b0);
        double s2 = amplitude * (s.b2 - s.a2 * ydc);
        for (double& v : x) {
            const double y = s.b0 * v + s1;
            s1 = s.b1 * v - s.a1 * y + s2;
            s2 = s.b2 * v - s.a2 * y;
            v = y;
        }
        amplitude *= ydc;
    }
    return x;
}

}  // namespace

double butterworth_bandpass_response(double f, double f_lo, double f_hi, int order) {
    if (f <= 0.0) return 0.0;
    const double w = 2.0 * M_PI * f;
    const double w0sq = (2.0 * M_PI * f_lo) * (2.0 * M_PI * f_hi);
    const double bw = 2.0 * M_PI * (f_hi - f_lo);
    const double x = (w * w - w0sq) / (bw * w);
    return 1.0 / std::sqrt(1.0 + std::pow(x * x, order));
}

std::vector<double> bandpass(const std::vector<double>& series, double fs, double f_lo,
                             double f_hi, int order) {
    if (!(fs > 2.0 * f_hi))
        throw std::invalid_argument("sampling rate must exceed twice the upper band edge");
    if (!(f_lo > 0.0 && f_hi > f_lo)) throw std::invalid_argument("invalid band edges");
    if (order < 1) throw std::invalid_argument("filter order must be positive");
    if (static_cast<int>(series.size()) <= 6 * order)
        throw std::invalid_argument("series too short for the requested filter order");

    const auto sections = design_butterworth_bandpass(fs, f_lo, f_hi, order);

    // the slowest transient rings at the low cut; pad a couple of its periods
    const size_t n = series.size();
    const size_t pad =
        std::min<size_t>(static_cast<size_t>(std::ceil(2.0 * fs / f_lo)), n - 1);
    std::vector<double> padded;
    padded.reserve(n + 2 * pad);
    for (size_t i = 0; i < pad; ++i) padded.push_back(2.0 * series.front() - series[pad - i]);
    padded.insert(padded.end(), series.begin(), series.end());
    for (size_t i = 0; i < pad; ++i) padded.push_back(2.0 * series.back() - series[n - 2 - i]);

    std::vector<double> y = sos_filter(sections, std::move(padded));
    std::reverse(y.begin(), y.end());
    y = sos_filter(sections, std::move(y));
    std::reverse(y.begin(), y.end());

    return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(pad),
                               y.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

std::vector<std::complex<double>> analytic_signal(const std::vector<double>& x) {
    const size_t n = x.size();
    if (n < 2) throw std::invalid_argument("analytic signal needs at least 2 samples");
    std::vector<std::complex<double>> spectrum(n);
    for (size_t i = 0; i < n; ++i) spectrum[i] = std::complex<double>(x[i], 0.0);
    spectrum = fft(spectrum, FFTW_FORWARD);

    // keep DC (and Nyquist for even n), double positives, drop negatives
    const size_t half = n / 2;
    for (size_t i = 1; i < (n % 2 == 0 ? half : half + 1); ++i) spectrum[i] *= 2.0;
    for (size_t i = half + 1; i < n; ++i) spectrum[i] = 0.0;

    spectrum = fft(spectrum, FFTW_BACKWARD);
    for (auto& v : spectrum) v /= static_cast<double>(n);
    return spectrum;
}

PhaseReport phase_difference(const std::vector<double>& a, const std::vector<double>& b, double fs,
                             const PhaseOptions& opts) {
    if (a.size() != b.size()) throw std::invalid_argument("phase_difference: length mismatch");
    if (a.size() < 4) throw std::invalid_argument("phase_difference: series too short");
    const size_t n = a.size();
    const size_t recommended = static_cast<size_t>(10.0 * fs / opts.f_lo);
    if (n < recommended)
        std::cerr << "spectracube: warning: " << n << " samples is below the recommended "
                  << recommended << " for phase estimation at f_lo=" << opts.f_lo << " Hz\n";

    PhaseReport report;
    report.series_a = a;
    report.series_b = b;

    const size_t trim = std::min(static_cast<size_t>(std::llround(fs / opts.f_lo)), n / 4);
    const size_t lo = trim;
    const size_t hi = n - trim;

    if (opts.method == PhaseMethod::Hilbert) {
        const auto za = analytic_signal(a);
        const auto zb = analytic_signal(b);

        double max_amp = 0.0;
        for (size_t i = lo; i < hi; ++i)
            max_amp = std::max(max_amp, std::min(std::abs(za[i]), std::abs(zb[i])));
        size_t weak = 0;
        std::complex<double> mean(0.0, 0.0);
        for (size_t i = lo; i < hi; ++i) {
            const std::complex<double> rot = za[i] * std::conj(zb[i]);
            const double amp = std::min(std::abs(za[i]), std::abs(zb[i]));
            if (amp < 1e-3 * max_amp) ++weak;
            if (std::abs(rot) > 0.0) mean += rot / std::abs(rot);
        }
        mean /= static_cast<double>(hi - lo);
        double deg = std::atan2(mean.imag(), mean.real()) * 180.0 / M_PI;
        if (deg < 0.0) deg += 360.0;
        report.phase_deg = deg;
        report.resultant_length = std::abs(mean);
        report.low_confidence = weak * 2 > (hi - lo);
    } else {
        std::vector<std::complex<double>> ca(n), cb(n);
        for (size_t i = 0; i < n; ++i) {
            ca[i] = std::complex<double>(a[i], 0.0);
            cb[i] = std::complex<double>(b[i], 0.0);
        }
        ca = fft(ca, FFTW_FORWARD);
        cb = fft(cb, FFTW_FORWARD);
        std::vector<std::pair<size_t, double>> band;  // (bin, |cross|)
        double peak = 0.0;
        for (size_t k = 1; k < n / 2; ++k) {
            const double f = static_cast<double>(k) * fs / static_cast<double>(n);
            if (f < opts.f_lo || f > opts.f_hi) continue;
            const double mag = std::abs(ca[k] * std::conj(cb[k]));
            band.emplace_back(k, mag);
            peak = std::max(peak, mag);
        }
        // signal-dominant bins only; noise bins rotate the estimate
        std::complex<double> cross(0.0, 0.0);
        double weight = 0.0;
        for (const auto& [k, mag] : band) {
            if (mag < 0.25 * peak) continue;
            cross += ca[k] * std::conj(cb[k]);
            weight += mag;
        }
        if (weight == 0.0) {
            report.low_confidence = true;
            return report;
        }
        double deg = std::atan2(cross.imag(), cross.real()) * 180.0 / M_PI;
        if (deg < 0.0) deg += 360.0;
        report.phase_deg = deg;
        report.resultant_length = std::abs(cross) / weight;
        report.low_confidence = false;
    }
    return report;
}

RoiSeries roi_timeseries(const std::vector<HemodynamicMaps>& maps_sequence,
                         const SegmentationMask& mask) {
    if (maps_sequence.empty()) throw std::invalid_argument("roi_timeseries: no frames");
    if (mask.vessel_count() == 0) throw std::invalid_argument("roi_timeseries: empty mask");

    RoiSeries series;
    series.dhbo2.reserve(maps_sequence.size());
    series.dhb.reserve(maps_sequence.size());
    for (const auto& maps : maps_sequence) {
        if (maps.rows != mask.rows || maps.cols != mask.cols)
            throw std::invalid_argument("roi_timeseries: mask and maps shapes differ");
        double sum_o = 0.0, sum_d = 0.0;
        size_t count = 0;
        for (int r = 0; r < maps.rows; ++r)
            for (int c = 0; c < maps.cols; ++c)
                if (mask.vessel_at(r, c)) {
                    sum_o += maps.hbo2(r, c);
                    sum_d += maps.hb(r, c);
                    ++count;
                }
        series.dhbo2.push_back(sum_o / static_cast<double>(count));
        series.dhb.push_back(sum_d / static_cast<double>(count));
    }

    for (auto* s : {&series.dhbo2, &series.dhb}) {
        const double mean = std::accumulate(s->begin(), s->end(), 0.0) /
                            static_cast<double>(s->size());
        for (double& v : *s) v -= mean;
    }
    return series;
}

}  // namespace spectracube
