#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>

namespace spectracube {

// Linear false-color rendering of a scalar plane into an 8-bit PNG, plus a
// sidecar JSON with the colormap name and value range (colorbar metadata).
// Colormaps: "gray", "heat" (both monotone in luminance). Out-of-range
// values clamp to the ends.
void render_map_png(const Eigen::MatrixXd& plane, const std::string& colormap, double lo,
                    double hi, const std::filesystem::path& path);

// Colormap lookup for t in [0,1] -> (r,g,b) in [0,1].
Eigen::Vector3d colormap_lookup(const std::string& name, double t);

}  // namespace spectracube
