#include "spectracube/maps.hpp"

#include "spectracube/io.hpp"

namespace spectracube {

namespace {
const std::vector<std::string> kPlaneNames = {"hbo2", "hb", "spo2", "rss", "converged"};
}

void write_maps(const HemodynamicMaps& maps, const std::filesystem::path& path) {
    WavelengthGrid plane_axis;
    plane_axis.start_nm = 0.0;
    plane_axis.step_nm = 1.0;
    plane_axis.count = static_cast<int>(kPlaneNames.size());
    Hypercube cube(maps.rows, maps.cols, plane_axis);
    for (int r = 0; r < maps.rows; ++r)
        for (int c = 0; c < maps.cols; ++c) {
            cube.at(r, c, 0) = static_cast<float>(maps.hbo2(r, c));
            cube.at(r, c, 1) = static_cast<float>(maps.hb(r, c));
            cube.at(r, c, 2) = static_cast<float>(maps.spo2(r, c));
            cube.at(r, c, 3) = static_cast<float>(maps.rss(r, c));
            cube.at(r, c, 4) = maps.converged_at(r, c) ? 1.0f : 0.0f;
        }
    write_cube(cube, path, kPlaneNames);
}

HemodynamicMaps read_maps(const std::filesystem::path& path) {
    const auto names = read_cube_plane_names(path);
    if (names != kPlaneNames)
        throw std::runtime_error(path.string() + ": not a hemodynamic maps container");
    const Hypercube cube = read_cube(path);
    HemodynamicMaps maps(cube.rows, cube.cols);
    for (int r = 0; r < cube.rows; ++r)
        for (int c = 0; c < cube.cols; ++c) {
            maps.hbo2(r, c) = static_cast<double>(cube.at(r, c, 0));
            maps.hb(r, c) = static_cast<double>(cube.at(r, c, 1));
            maps.spo2(r, c) = static_cast<double>(cube.at(r, c, 2));
            maps.rss(r, c) = static_cast<double>(cube.at(r, c, 3));
            maps.set_converged(r, c, cube.at(r, c, 4) != 0.0f);
        }
    return maps;
}

}  // namespace spectracube
