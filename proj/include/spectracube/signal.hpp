#pragma once

#include <complex>
#include <vector>

#include "spectracube/maps.hpp"
#include "spectracube/metrics.hpp"

namespace spectracube {

// Zero-phase (forward-backward) Butterworth bandpass via bilinear-transform
// biquad cascade; output length equals input length. Requires fs > 2*f_hi
// and more than 6*order samples.
std::vector<double> bandpass(const std::vector<double>& series, double fs, double f_lo = 0.01,
                             double f_hi = 0.1, int order = 3);

// Single-pass magnitude response of the analog Butterworth bandpass
// prototype at frequency f; zero-phase filtering applies it twice.
double butterworth_bandpass_response(double f, double f_lo, double f_hi, int order);

// Analytic signal via the FFT Hilbert transform.
std::vector<std::complex<double>> analytic_signal(const std::vector<double>& x);

enum class PhaseMethod { Hilbert, CrossSpectrum };

struct PhaseOptions {
    PhaseMethod method = PhaseMethod::Hilbert;
    double f_lo = 0.01;  // band of interest; also sets the edge trim
    double f_hi = 0.1;
};

// Time-averaged phase of `a` relative to `b` for narrowband (pre-filtered)
// inputs. The first and last 1/f_lo seconds are excluded from the circular
// mean, capped at a quarter of the series per side so short records keep
// usable data.
struct PhaseReport {
    std::vector<double> series_a;   // post-filter inputs as given
    std::vector<double> series_b;
    double phase_deg = 0.0;         // circular mean in [0, 360)
    double resultant_length = 0.0;  // mean resultant vector magnitude
    bool low_confidence = false;    // analytic amplitude near zero too often
};
PhaseReport phase_difference(const std::vector<double>& a, const std::vector<double>& b, double fs,
                             const PhaseOptions& opts = {});

// Spatial means of HbO2 and Hb over the vessel mask per frame, each series
// centered by its temporal mean.
struct RoiSeries {
    std::vector<double> dhbo2;
    std::vector<double> dhb;
};
RoiSeries roi_timeseries(const std::vector<HemodynamicMaps>& maps_sequence,
                         const SegmentationMask& mask);

}  // namespace spectracube
