#include "spectracube/phantom.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "spectracube/io.hpp"
#include "spectracube/rng.hpp"

namespace spectracube {

using nlohmann::json;

SensitivityFunction SensitivityFunction::gaussian_default(const WavelengthGrid& grid) {
    SensitivityFunction s;
    s.grid = grid;
    s.S.resize(3, grid.count);
    const double peaks[3] = {610.0, 540.0, 460.0};  // r, g, b
    const double sigma = 30.0;
    for (int ch = 0; ch < 3; ++ch)
        for (int k = 0; k < grid.count; ++k) {
            const double d = (grid.wavelength(k) - peaks[ch]) / sigma;
            s.S(ch, k) = std::exp(-0.5 * d * d);
        }
    return s;
}

void SensitivityFunction::validate() const {
    grid.validate();
    if (S.cols() != grid.count) throw std::invalid_argument("sensitivity width mismatch");
    if ((S.array() < 0.0).any()) throw std::invalid_argument("sensitivity must be non-negative");
    for (int ch = 0; ch < 3; ++ch)
        if (S.row(ch).sum() <= 0.0)
            throw std::invalid_argument("sensitivity row " + std::to_string(ch) + " has zero sum");
}

SensitivityFunction load_sensitivity(const std::filesystem::path& path,
                                     const WavelengthGrid& grid) {
    const CsvTable csv = read_csv(path);
    const int wl_col = csv.find_column("wavelength_nm");
    const int cols[3] = {csv.find_column("r"), csv.find_column("g"), csv.find_column("b")};
    if (wl_col < 0 || cols[0] < 0 || cols[1] < 0 || cols[2] < 0)
        throw std::runtime_error(path.string() + ": expected columns wavelength_nm,r,g,b");
    const auto& wl = csv.data[static_cast<size_t>(wl_col)];
    if (wl.size() < 2 || grid.start_nm < wl.front() || grid.end_nm() > wl.back())
        throw std::runtime_error(path.string() + ": table does not cover the working grid");

    SensitivityFunction s;
    s.grid = grid;
    s.S.resize(3, grid.count);
    for (int ch = 0; ch < 3; ++ch) {
        const auto& col = csv.data[static_cast<size_t>(cols[ch])];
        size_t j = 0;
        for (int k = 0; k < grid.count; ++k) {
            const double x = grid.wavelength(k);
            while (j + 2 < wl.size() && wl[j + 1] < x) ++j;
            const double t = (x - wl[j]) / (wl[j + 1] - wl[j]);
            s.S(ch, k) = col[j] + t * (col[j + 1] - col[j]);
        }
    }
    s.validate();
    return s;
}

double FieldSpec::at(int r, int c, int rows, int cols) const {
    switch (kind) {
        case Kind::Constant:
            return base;
        case Kind::LinearX:
            return cols > 1
                       ? base + (to - base) * static_cast<double>(c) / static_cast<double>(cols - 1)
                       : base;
        case Kind::LinearY:
            return rows > 1
                       ? base + (to - base) * static_cast<double>(r) / static_cast<double>(rows - 1)
                       : base;
        case Kind::Blobs: {
            double v = base;
            for (const auto& blob : blobs) {
                const double dr = static_cast<double>(r) - blob.row;
                const double dc = static_cast<double>(c) - blob.col;
                v += blob.delta * std::exp(-0.5 * (dr * dr + dc * dc) / (blob.radius * blob.radius));
            }
            return v;
        }
        case Kind::BandsY: {
            double v = rows > 1 ? base + (to - base) * static_cast<double>(r) /
                                             static_cast<double>(rows - 1)
                                : base;
            for (const auto& band : blobs) {
                const double dr = static_cast<double>(r) - band.row;
                v += band.delta * std::exp(-0.5 * dr * dr / (band.radius * band.radius));
            }
            return v;
        }
    }
    return base;
}

TissueParams SceneScript::params_at(int r, int c, int frame) const {
    TissueParams p;
    p.b1 = std::max(0.0, b1.at(r, c, rows, cols));
    p.b2 = b2.at(r, c, rows, cols);
    p.b3 = std::max(0.0, b3.at(r, c, rows, cols));
    p.b4 = std::max(0.0, b4.at(r, c, rows, cols));
    p.lipid_coeff = std::max(0.0, lipid);

    double sat = b5.at(r, c, rows, cols);
    switch (b5_dynamics.kind) {
        case B5Dynamics::Kind::None:
            break;
        case B5Dynamics::Kind::DepletionFront: {
            const double pos = b5_dynamics.speed_cols_per_frame * static_cast<double>(frame);
            const double w = std::max(b5_dynamics.width_cols, 1e-9);
            const double t = std::clamp((static_cast<double>(c) - (pos - w / 2.0)) / w, 0.0, 1.0);
            sat = b5_dynamics.depleted_value + (sat - b5_dynamics.depleted_value) * t;
            break;
        }
        case B5Dynamics::Kind::Oscillation: {
            const double t = static_cast<double>(frame) * frame_interval_s;
            sat += b5_dynamics.amplitude * std::sin(2.0 * M_PI * b5_dynamics.freq_hz * t);
            break;
        }
    }
    p.b5 = std::clamp(sat, 0.0, 1.0);
    return p;
}

void SceneScript::validate() const {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("scene dimensions must be positive");
    if (frame_count < 1) throw std::invalid_argument("scene needs at least one frame");
    if (!(frame_interval_s > 0.0)) throw std::invalid_argument("frame interval must be positive");
}

namespace {

FieldSpec field_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    FieldSpec f;
    if (type == "constant") {
        f = FieldSpec::constant(j.at("value").get<double>());
    } else if (type == "linear_x") {
        f = FieldSpec::linear_x(j.at("from").get<double>(), j.at("to").get<double>());
    } else if (type == "linear_y") {
        f = FieldSpec::linear_y(j.at("from").get<double>(), j.at("to").get<double>());
    } else if (type == "blobs") {
        f.kind = FieldSpec::Kind::Blobs;
        f.base = j.at("base").get<double>();
        for (const auto& b : j.at("blobs")) {
            FieldSpec::Blob blob;
            blob.row = b.at("row").get<double>();
            blob.col = b.at("col").get<double>();
            blob.radius = b.at("radius").get<double>();
            blob.delta = b.at("delta").get<double>();
            f.blobs.push_back(blob);
        }
    } else if (type == "bands_y") {
        f.kind = FieldSpec::Kind::BandsY;
        f.base = j.at("from").get<double>();
        f.to = j.at("to").get<double>();
        for (const auto& b : j.at("bands")) {
            FieldSpec::Blob band;
            band.row = b.at("row").get<double>();
            band.radius = b.at("sigma").get<double>();
            band.delta = b.at("delta").get<double>();
            f.blobs.push_back(band);
        }
    } else {
        throw std::runtime_error("unknown field type '" + type + "'");
    }
    return f;
}

json field_to_json(const FieldSpec& f) {
    switch (f.kind) {
        case FieldSpec::Kind::Constant:
            return {{"type", "constant"}, {"value", f.base}};
        case FieldSpec::Kind::LinearX:
            return {{"type", "linear_x"}, {"from", f.base}, {"to", f.to}};
        case FieldSpec::Kind::LinearY:
            return {{"type", "linear_y"}, {"from", f.base}, {"to", f.to}};
        case FieldSpec::Kind::Blobs: {
            json blobs = json::array();
            for (const auto& b : f.blobs)
                blobs.push_back(
                    {{"row", b.row}, {"col", b.col}, {"radius", b.radius}, {"delta", b.delta}});
            return {{"type", "blobs"}, {"base", f.base}, {"blobs", blobs}};
        }
        case FieldSpec::Kind::BandsY: {
            json bands = json::array();
            for (const auto& b : f.blobs)
                bands.push_back({{"row", b.row}, {"sigma", b.radius}, {"delta", b.delta}});
            return {{"type", "bands_y"}, {"from", f.base}, {"to", f.to}, {"bands", bands}};
        }
    }
    throw std::logic_error("unreachable field kind");
}

}  // namespace

SceneScript scene_from_json_string(const std::string& text) {
    const json j = json::parse(text);
    SceneScript scene;
    scene.rows = j.at("rows").get<int>();
    scene.cols = j.at("cols").get<int>();
    scene.frame_count = j.value("frame_count", 1);
    scene.frame_interval_s = j.value("frame_interval_s", 1.0 / 960.0);
    scene.b1 = field_from_json(j.at("b1"));
    scene.b2 = field_from_json(j.at("b2"));
    scene.b3 = field_from_json(j.at("b3"));
    scene.b4 = field_from_json(j.at("b4"));
    scene.b5 = field_from_json(j.at("b5"));
    scene.lipid = j.value("lipid", 0.0);
    if (j.contains("b5_dynamics")) {
        const auto& d = j["b5_dynamics"];
        const std::string type = d.at("type").get<std::string>();
        if (type == "none") {
            scene.b5_dynamics.kind = B5Dynamics::Kind::None;
        } else if (type == "depletion_front") {
            scene.b5_dynamics.kind = B5Dynamics::Kind::DepletionFront;
            scene.b5_dynamics.speed_cols_per_frame = d.value("speed_cols_per_frame", 1.0);
            scene.b5_dynamics.width_cols = d.value("width_cols", 10.0);
            scene.b5_dynamics.depleted_value = d.value("depleted_value", 0.05);
        } else if (type == "oscillation") {
            scene.b5_dynamics.kind = B5Dynamics::Kind::Oscillation;
            scene.b5_dynamics.freq_hz = d.value("freq_hz", 0.05);
            scene.b5_dynamics.amplitude = d.value("amplitude", 0.1);
        } else {
            throw std::runtime_error("unknown b5_dynamics type '" + type + "'");
        }
    }
    scene.validate();
    return scene;
}

SceneScript scene_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scene_from_json_string(text);
}

std::string scene_to_json_string(const SceneScript& scene) {
    json j;
    j["rows"] = scene.rows;
    j["cols"] = scene.cols;
    j["frame_count"] = scene.frame_count;
    j["frame_interval_s"] = scene.frame_interval_s;
    j["b1"] = field_to_json(scene.b1);
    j["b2"] = field_to_json(scene.b2);
    j["b3"] = field_to_json(scene.b3);
    j["b4"] = field_to_json(scene.b4);
    j["b5"] = field_to_json(scene.b5);
    j["lipid"] = scene.lipid;
    switch (scene.b5_dynamics.kind) {
        case B5Dynamics::Kind::None:
            j["b5_dynamics"] = {{"type", "none"}};
            break;
        case B5Dynamics::Kind::DepletionFront:
            j["b5_dynamics"] = {{"type", "depletion_front"},
                                {"speed_cols_per_frame", scene.b5_dynamics.speed_cols_per_frame},
                                {"width_cols", scene.b5_dynamics.width_cols},
                                {"depleted_value", scene.b5_dynamics.depleted_value}};
            break;
        case B5Dynamics::Kind::Oscillation:
            j["b5_dynamics"] = {{"type", "oscillation"},
                                {"freq_hz", scene.b5_dynamics.freq_hz},
                                {"amplitude", scene.b5_dynamics.amplitude}};
            break;
    }
    return j.dump(2);
}

Hypercube render_cube(const SceneScript& scene, const ExtinctionTable& ext, int frame) {
    scene.validate();
    if (frame < 0 || frame >= scene.frame_count)
        throw std::out_of_range("frame index outside the scripted range");

    Hypercube cube(scene.rows, scene.cols, ext.grid);
    for (int r = 0; r < scene.rows; ++r)
        for (int c = 0; c < scene.cols; ++c) {
            const TissueParams p = scene.params_at(r, c, frame);
            const Spectrum spec = forward_reflectance(p, ext, ext.grid);
            cube.set_spectrum(r, c, spec.values);
        }
    return cube;
}

RenderedRgb render_rgb(const Hypercube& cube, const SensitivityFunction& s, double noise_sigma,
                       uint64_t seed, std::optional<RescaleBounds> bounds) {
    cube.validate();
    s.validate();
    if (s.grid != cube.grid) throw std::invalid_argument("sensitivity grid does not match cube");
    if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");

    const double dlambda = cube.grid.step_nm;
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(cube.rows) * cube.cols, 3);
    Eigen::VectorXd y(cube.grid.count);
    for (int r = 0; r < cube.rows; ++r)
        for (int c = 0; c < cube.cols; ++c) {
            for (int k = 0; k < cube.grid.count; ++k)
                y[k] = static_cast<double>(cube.at(r, c, k));
            raw.row(static_cast<Eigen::Index>(r) * cube.cols + c) = (s.S * y * dlambda).transpose();
        }

    if (noise_sigma > 0.0) {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < raw.rows(); ++i)
            for (int ch = 0; ch < 3; ++ch) raw(i, ch) += rng.normal(0.0, noise_sigma);
    }

    RenderedRgb out;
    if (bounds) {
        out.bounds = *bounds;
    } else {
        out.bounds.lo = raw.minCoeff();
        out.bounds.hi = raw.maxCoeff();
        if (!(out.bounds.hi > out.bounds.lo)) out.bounds.hi = out.bounds.lo + 1.0;
    }

    out.image = RgbImage(cube.rows, cube.cols);
    const double scale = 1.0 / (out.bounds.hi - out.bounds.lo);
    for (int r = 0; r < cube.rows; ++r)
        for (int c = 0; c < cube.cols; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                const double v =
                    (raw(static_cast<Eigen::Index>(r) * cube.cols + c, ch) - out.bounds.lo) * scale;
                out.image.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    return out;
}

RgbImage quantize(const RgbImage& img, int bits) {
    if (bits < 1 || bits > 16) throw std::invalid_argument("bit depth must be in [1,16]");
    const double levels = std::pow(2.0, bits) - 1.0;
    RgbImage out(img.rows, img.cols);
    out.bit_depth_origin = bits;
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] =
            static_cast<float>(std::round(static_cast<double>(img.data[i]) * levels) / levels);
    return out;
}

SampledLine extract_line(const Hypercube& cube, const RgbImage& rgb, int col) {
    if (rgb.rows != cube.rows || rgb.cols != cube.cols)
        throw std::invalid_argument("rgb image and cube shapes differ");
    if (col < 0 || col >= cube.cols) throw std::out_of_range("line column out of range");

    SampledLine line;
    line.grid = cube.grid;
    line.rgb.resize(cube.rows, 3);
    line.spectra.resize(cube.rows, cube.grid.count);
    line.pixel_coords.reserve(static_cast<size_t>(cube.rows));
    for (int r = 0; r < cube.rows; ++r) {
        line.pixel_coords.emplace_back(r, col);
        for (int ch = 0; ch < 3; ++ch) line.rgb(r, ch) = static_cast<double>(rgb.at(r, col, ch));
        for (int k = 0; k < cube.grid.count; ++k)
            line.spectra(r, k) = static_cast<double>(cube.at(r, col, k));
    }
    return line;
}

SampledLine merge_lines(const std::vector<SampledLine>& lines) {
    if (lines.empty()) throw std::invalid_argument("no lines to merge");
    SampledLine merged;
    merged.grid = lines.front().grid;
    Eigen::Index total = 0;
    for (const auto& line : lines) {
        if (line.grid != merged.grid) throw std::invalid_argument("line grids differ");
        total += line.size();
    }
    merged.rgb.resize(total, 3);
    merged.spectra.resize(total, merged.grid.count);
    Eigen::Index at = 0;
    for (const auto& line : lines) {
        merged.rgb.middleRows(at, line.size()) = line.rgb;
        merged.spectra.middleRows(at, line.size()) = line.spectra;
        merged.pixel_coords.insert(merged.pixel_coords.end(), line.pixel_coords.begin(),
                                   line.pixel_coords.end());
        at += line.size();
    }
    return merged;
}

}  // namespace spectracube
