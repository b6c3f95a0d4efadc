#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spectracube/cube.hpp"
#include "spectracube/image.hpp"

namespace spectracube {

// Hypercube container: one UTF-8 JSON header line terminated by '\n'
// ({rows, cols, wl_start_nm, wl_step_nm, wl_count, dtype:"f32le",
// order:"band-sequential"}, optionally "plane_names"), followed by the raw
// little-endian float payload. Round trips are bit-exact.
void write_cube(const Hypercube& cube, const std::filesystem::path& path,
                const std::vector<std::string>& plane_names = {});
Hypercube read_cube(const std::filesystem::path& path);
// Plane names from the header, empty if the file carries none.
std::vector<std::string> read_cube_plane_names(const std::filesystem::path& path);

// PNG (8/16-bit RGB or RGBA; an sBIT chunk may declare e.g. 10 significant
// bits) and binary PPM. Channel values are normalized by (2^depth - 1).
RgbImage read_image(const std::filesystem::path& path);
void write_image_png(const RgbImage& img, const std::filesystem::path& path, int bits = 8);
void write_image_ppm(const RgbImage& img, const std::filesystem::path& path, int bits = 16);

// Generic numeric CSV with a header row.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // data[col][row]

    int find_column(const std::string& name) const;  // -1 if absent
    size_t row_count() const { return data.empty() ? 0 : data[0].size(); }
};
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

// Spectra table: header "wavelength_nm,<col>...", wavelengths down the rows,
// one column per sampled pixel. Returned matrix is m x k (pixel-major).
Eigen::MatrixXd read_spectra_table(const std::filesystem::path& path, const WavelengthGrid& grid);

// Uniform grid inferred from a spectra/reference table's wavelength column.
WavelengthGrid grid_from_csv(const std::filesystem::path& path);

// Single-spectrum CSV "wavelength_nm,value", linearly resampled onto `grid`.
Spectrum read_spectrum_csv(const std::filesystem::path& path, const WavelengthGrid& grid);
void write_spectra_table(const Eigen::MatrixXd& spectra, const WavelengthGrid& grid,
                         const std::filesystem::path& path);

// Sampled-line pair: an rgb file ("row,col,r,g,b") plus a spectra table.
void write_line(const SampledLine& line, const std::filesystem::path& rgb_path,
                const std::filesystem::path& spectra_path);
SampledLine read_line(const std::filesystem::path& rgb_path,
                      const std::filesystem::path& spectra_path, const WavelengthGrid& grid);

}  // namespace spectracube
