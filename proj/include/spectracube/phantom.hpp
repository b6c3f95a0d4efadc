#pragma once

#include <filesystem>
#include <optional>

#include "spectracube/cube.hpp"
#include "spectracube/image.hpp"
#include "spectracube/tissue.hpp"

namespace spectracube {

// Camera spectral response, one row per color channel.
struct SensitivityFunction {
    WavelengthGrid grid;
    Eigen::Matrix<double, 3, Eigen::Dynamic> S;  // 3 x k

    // Three Gaussian bands peaking at 610 (R), 540 (G) and 460 nm (B),
    // sigma 30 nm. Stand-in for a device-specific response.
    static SensitivityFunction gaussian_default(const WavelengthGrid& grid);

    void validate() const;
};

// CSV "wavelength_nm,r,g,b" resampled onto the working grid.
SensitivityFunction load_sensitivity(const std::filesystem::path& path, const WavelengthGrid& grid);

// Spatial generator for one tissue parameter.
struct FieldSpec {
    enum class Kind { Constant, LinearX, LinearY, Blobs, BandsY };
    struct Blob {
        double row = 0.0, col = 0.0, radius = 1.0, delta = 0.0;
    };

    Kind kind = Kind::Constant;
    double base = 0.0;
    double to = 0.0;  // LinearX/LinearY/BandsY ramp endpoint
    // Blobs: isotropic Gaussian bumps. BandsY: horizontal Gaussian bands
    // (col ignored, radius is the row sigma) on top of a row ramp; every
    // column then carries the exact distribution a vertical sampling line
    // sees.
    std::vector<Blob> blobs;

    double at(int r, int c, int rows, int cols) const;

    static FieldSpec constant(double v) { return {Kind::Constant, v, 0.0, {}}; }
    static FieldSpec linear_x(double from, double to_) { return {Kind::LinearX, from, to_, {}}; }
    static FieldSpec linear_y(double from, double to_) { return {Kind::LinearY, from, to_, {}}; }
    static FieldSpec bands_y(double from, double to_, std::vector<Blob> bands) {
        return {Kind::BandsY, from, to_, std::move(bands)};
    }
};

// Optional temporal behavior of the oxygen saturation field.
struct B5Dynamics {
    enum class Kind { None, DepletionFront, Oscillation };
    Kind kind = Kind::None;
    // DepletionFront: saturation collapses to `depleted_value` behind a
    // front sweeping across columns.
    double speed_cols_per_frame = 1.0;
    double width_cols = 10.0;
    double depleted_value = 0.05;
    // Oscillation: base + amplitude * sin(2 pi f t).
    double freq_hz = 0.05;
    double amplitude = 0.1;
};

// Scripted ground-truth scene: per-pixel tissue parameters, optionally
// evolving over frames.
struct SceneScript {
    int rows = 0;
    int cols = 0;
    int frame_count = 1;
    double frame_interval_s = 1.0 / 960.0;
    FieldSpec b1 = FieldSpec::constant(0.6);
    FieldSpec b2 = FieldSpec::constant(-1.0);
    FieldSpec b3 = FieldSpec::constant(0.05);
    FieldSpec b4 = FieldSpec::constant(1.0);
    FieldSpec b5 = FieldSpec::constant(0.7);
    double lipid = 0.0;
    B5Dynamics b5_dynamics;

    // Generated parameters satisfy the tissue constraints at every pixel
    // and frame (clamped where a generator overshoots).
    TissueParams params_at(int r, int c, int frame) const;
    void validate() const;
};

SceneScript scene_from_json_file(const std::filesystem::path& path);
SceneScript scene_from_json_string(const std::string& text);
std::string scene_to_json_string(const SceneScript& scene);

Hypercube render_cube(const SceneScript& scene, const ExtinctionTable& ext, int frame);

struct RescaleBounds {
    double lo = 0.0;
    double hi = 1.0;
};

struct RenderedRgb {
    RgbImage image;
    RescaleBounds bounds;  // affine rescale used to land in [0,1]
};

// Tristimulus render x = S y dlambda plus Gaussian read noise, affinely
// rescaled into [0,1]. Passing `bounds` reuses a previous scale, which keeps
// video frames mutually comparable. Deterministic per seed.
RenderedRgb render_rgb(const Hypercube& cube, const SensitivityFunction& s, double noise_sigma,
                       uint64_t seed, std::optional<RescaleBounds> bounds = std::nullopt);

// Round channel values to 2^bits - 1 levels (sensor emulation).
RgbImage quantize(const RgbImage& img, int bits);

// Pair one column's spectra with its RGB values.
SampledLine extract_line(const Hypercube& cube, const RgbImage& rgb, int col);

// Concatenate sampled lines (e.g. several adjacent columns).
SampledLine merge_lines(const std::vector<SampledLine>& lines);

}  // namespace spectracube
