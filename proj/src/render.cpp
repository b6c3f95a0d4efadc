#include "spectracube/render.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "spectracube/image.hpp"
#include "spectracube/io.hpp"

namespace spectracube {

Eigen::Vector3d colormap_lookup(const std::string& name, double t) {
    t = std::clamp(t, 0.0, 1.0);
    if (name == "gray") return {t, t, t};
    if (name == "heat") {
        // black -> red -> yellow -> white
        if (t < 1.0 / 3.0) return {3.0 * t, 0.0, 0.0};
        if (t < 2.0 / 3.0) return {1.0, 3.0 * t - 1.0, 0.0};
        return {1.0, 1.0, 3.0 * t - 2.0};
    }
    throw std::invalid_argument("unknown colormap '" + name + "' (gray, heat)");
}

void render_map_png(const Eigen::MatrixXd& plane, const std::string& colormap, double lo,
                    double hi, const std::filesystem::path& path) {
    if (!(lo < hi)) throw std::invalid_argument("render_map_png: lo must be below hi");
    colormap_lookup(colormap, 0.0);  // validates the name before any I/O

    RgbImage img(static_cast<int>(plane.rows()), static_cast<int>(plane.cols()));
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            const double t = (plane(r, c) - lo) / (hi - lo);
            img.set_pixel(r, c, colormap_lookup(colormap, t));
        }
    write_image_png(img, path, 8);

    nlohmann::json meta;
    meta["colormap"] = colormap;
    meta["range"] = {lo, hi};
    std::ofstream out(path.string() + ".colorbar.json");
    if (!out) throw std::runtime_error("cannot write colorbar sidecar for " + path.string());
    out << meta.dump(2) << '\n';
}

}  // namespace spectracube
