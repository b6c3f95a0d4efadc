#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace spectracube {

// Per-pixel hemodynamic planes. spo2 stays in [0,1]; the converged mask
// marks pixels whose fit (or inference) is trustworthy.
struct HemodynamicMaps {
    int rows = 0;
    int cols = 0;
    Eigen::MatrixXd hbo2;
    Eigen::MatrixXd hb;
    Eigen::MatrixXd spo2;
    Eigen::MatrixXd rss;
    std::vector<uint8_t> converged;

    HemodynamicMaps() = default;
    HemodynamicMaps(int r, int c)
        : rows(r), cols(c), hbo2(Eigen::MatrixXd::Zero(r, c)), hb(Eigen::MatrixXd::Zero(r, c)),
          spo2(Eigen::MatrixXd::Zero(r, c)), rss(Eigen::MatrixXd::Zero(r, c)),
          converged(static_cast<size_t>(r) * static_cast<size_t>(c), 0) {}

    bool converged_at(int r, int c) const {
        return converged[static_cast<size_t>(r) * static_cast<size_t>(cols) +
                         static_cast<size_t>(c)] != 0;
    }
    void set_converged(int r, int c, bool v) {
        converged[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)] =
            v ? 1 : 0;
    }
};

// Stored as a 5-plane cube container with plane names
// hbo2, hb, spo2, rss, converged.
void write_maps(const HemodynamicMaps& maps, const std::filesystem::path& path);
HemodynamicMaps read_maps(const std::filesystem::path& path);

}  // namespace spectracube
