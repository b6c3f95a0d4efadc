#include "spectracube/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

#include <nlohmann/json.hpp>

namespace spectracube {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

void write_cube(const Hypercube& cube, const std::filesystem::path& path,
                const std::vector<std::string>& plane_names) {
    cube.validate();
    if (!plane_names.empty() && static_cast<int>(plane_names.size()) != cube.grid.count)
        throw std::invalid_argument("plane name count does not match band count");

    json header;
    header["rows"] = cube.rows;
    header["cols"] = cube.cols;
    header["wl_start_nm"] = cube.grid.start_nm;
    header["wl_step_nm"] = cube.grid.step_nm;
    header["wl_count"] = cube.grid.count;
    header["dtype"] = "f32le";
    header["order"] = "band-sequential";
    if (!plane_names.empty()) header["plane_names"] = plane_names;

    auto out = open_output(path, std::ios::binary);
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(cube.data.data()),
              static_cast<std::streamsize>(cube.data.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

json parse_cube_header(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header line");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": malformed header: " + e.what());
    }
    static const std::vector<std::string> required = {"rows",     "cols",  "wl_start_nm", "wl_step_nm",
                                                      "wl_count", "dtype", "order"};
    for (const auto& key : required)
        if (!header.contains(key))
            throw std::runtime_error(path.string() + ": header missing field '" + key + "'");
    for (const auto& [key, value] : header.items()) {
        (void)value;
        if (std::find(required.begin(), required.end(), key) == required.end() &&
            key != "plane_names")
            throw std::runtime_error(path.string() + ": unknown header field '" + key + "'");
    }
    if (header["dtype"] != "f32le")
        throw std::runtime_error(path.string() + ": unsupported dtype " + header["dtype"].dump());
    if (header["order"] != "band-sequential")
        throw std::runtime_error(path.string() + ": unsupported order " + header["order"].dump());
    return header;
}

}  // namespace

Hypercube read_cube(const std::filesystem::path& path) {
    auto in = open_input(path, std::ios::binary);
    const json header = parse_cube_header(in, path);

    Hypercube cube;
    cube.rows = header["rows"].get<int>();
    cube.cols = header["cols"].get<int>();
    cube.grid.start_nm = header["wl_start_nm"].get<double>();
    cube.grid.step_nm = header["wl_step_nm"].get<double>();
    cube.grid.count = header["wl_count"].get<int>();
    cube.grid.validate();
    if (cube.rows <= 0 || cube.cols <= 0)
        throw std::runtime_error(path.string() + ": non-positive dimensions in header");

    const size_t expected = static_cast<size_t>(cube.rows) * static_cast<size_t>(cube.cols) *
                            static_cast<size_t>(cube.grid.count);
    cube.data.resize(expected);
    in.read(reinterpret_cast<char*>(cube.data.data()),
            static_cast<std::streamsize>(expected * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != expected * sizeof(float))
        throw std::runtime_error(path.string() + ": payload length mismatch");
    char extra;
    if (in.read(&extra, 1)) throw std::runtime_error(path.string() + ": payload length mismatch");

    for (float v : cube.data)
        if (!std::isfinite(v))
            throw std::runtime_error(path.string() + ": payload contains non-finite values");
    return cube;
}

std::vector<std::string> read_cube_plane_names(const std::filesystem::path& path) {
    auto in = open_input(path, std::ios::binary);
    const json header = parse_cube_header(in, path);
    if (!header.contains("plane_names")) return {};
    return header["plane_names"].get<std::vector<std::string>>();
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) fclose(fp);
    }
};

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) fclose(fp);
    }
};

RgbImage read_png(const std::filesystem::path& path) {
    PngReadCloser h;
    h.fp = fopen(path.string().c_str(), "rb");
    if (!h.fp) throw std::runtime_error("cannot open " + path.string());
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    h.info = png_create_info_struct(h.png);
    if (!h.png || !h.info) throw std::runtime_error("libpng init failed");
    if (setjmp(png_jmpbuf(h.png))) throw std::runtime_error(path.string() + ": PNG decode error");

    png_init_io(h.png, h.fp);
    png_read_info(h.png, h.info);

    const png_uint_32 width = png_get_image_width(h.png, h.info);
    const png_uint_32 height = png_get_image_height(h.png, h.info);
    const int bit_depth = png_get_bit_depth(h.png, h.info);
    const int color_type = png_get_color_type(h.png, h.info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        throw std::runtime_error(path.string() + ": expected an RGB image");
    if (bit_depth == 16) png_set_swap(h.png);  // stored big-endian
    png_set_strip_alpha(h.png);
    png_read_update_info(h.png, h.info);

    // A 10-bit capture arrives in a 16-bit container with sBIT = 10.
    int significant_bits = bit_depth;
    png_color_8p sig_bit = nullptr;
    if (png_get_sBIT(h.png, h.info, &sig_bit) && sig_bit) significant_bits = sig_bit->red;

    RgbImage img(static_cast<int>(height), static_cast<int>(width));
    img.bit_depth_origin = significant_bits;
    const double maxval = std::pow(2.0, significant_bits) - 1.0;

    if (bit_depth == 16) {
        std::vector<uint16_t> row(width * 3);
        for (png_uint_32 r = 0; r < height; ++r) {
            png_read_row(h.png, reinterpret_cast<png_bytep>(row.data()), nullptr);
            for (png_uint_32 c = 0; c < width; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    img.at(static_cast<int>(r), static_cast<int>(c), ch) =
                        static_cast<float>(std::min(1.0, row[c * 3 + ch] / maxval));
        }
    } else {
        std::vector<uint8_t> row(width * 3);
        for (png_uint_32 r = 0; r < height; ++r) {
            png_read_row(h.png, row.data(), nullptr);
            for (png_uint_32 c = 0; c < width; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    img.at(static_cast<int>(r), static_cast<int>(c), ch) =
                        static_cast<float>(row[c * 3 + ch] / maxval);
        }
    }
    png_read_end(h.png, nullptr);
    return img;
}

}  // namespace

void write_image_png(const RgbImage& img, const std::filesystem::path& path, int bits) {
    img.validate();
    if (bits != 8 && bits != 10 && bits != 16)
        throw std::invalid_argument("PNG bit depth must be 8, 10 or 16");
    const int container_bits = bits == 8 ? 8 : 16;
    const double maxval = std::pow(2.0, bits) - 1.0;

    PngWriteCloser h;
    h.fp = fopen(path.string().c_str(), "wb");
    if (!h.fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
    h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    h.info = png_create_info_struct(h.png);
    if (!h.png || !h.info) throw std::runtime_error("libpng init failed");
    if (setjmp(png_jmpbuf(h.png))) throw std::runtime_error(path.string() + ": PNG encode error");

    png_init_io(h.png, h.fp);
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(img.cols),
                 static_cast<png_uint_32>(img.rows), container_bits, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (bits != container_bits) {
        png_color_8 sig_bit;
        sig_bit.red = sig_bit.green = sig_bit.blue = static_cast<png_byte>(bits);
        sig_bit.gray = sig_bit.alpha = 0;
        png_set_sBIT(h.png, h.info, &sig_bit);
    }
    png_write_info(h.png, h.info);
    if (container_bits == 16) png_set_swap(h.png);

    auto quantize = [&](float v) {
        return static_cast<uint32_t>(std::lround(static_cast<double>(v) * maxval));
    };
    if (container_bits == 16) {
        std::vector<uint16_t> row(static_cast<size_t>(img.cols) * 3);
        for (int r = 0; r < img.rows; ++r) {
            for (int c = 0; c < img.cols; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    row[static_cast<size_t>(c) * 3 + ch] =
                        static_cast<uint16_t>(quantize(img.at(r, c, ch)));
            png_write_row(h.png, reinterpret_cast<png_bytep>(row.data()));
        }
    } else {
        std::vector<uint8_t> row(static_cast<size_t>(img.cols) * 3);
        for (int r = 0; r < img.rows; ++r) {
            for (int c = 0; c < img.cols; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    row[static_cast<size_t>(c) * 3 + ch] =
                        static_cast<uint8_t>(quantize(img.at(r, c, ch)));
            png_write_row(h.png, row.data());
        }
    }
    png_write_end(h.png, nullptr);
}

// ---------------------------------------------------------------------------
// PPM (binary P6)

namespace {

RgbImage read_ppm(const std::filesystem::path& path) {
    auto in = open_input(path, std::ios::binary);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error(path.string() + ": not a binary PPM");
    auto next_token = [&in, &path]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error(path.string() + ": truncated PPM header");
    };
    const int cols = std::stoi(next_token());
    const int rows = std::stoi(next_token());
    const long maxval = std::stol(next_token());
    if (cols <= 0 || rows <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error(path.string() + ": invalid PPM header");
    in.get();  // single whitespace after maxval

    RgbImage img(rows, cols);
    img.bit_depth_origin = static_cast<int>(std::ceil(std::log2(static_cast<double>(maxval) + 1.0)));
    const size_t n = static_cast<size_t>(rows) * static_cast<size_t>(cols) * 3;
    if (maxval < 256) {
        std::vector<uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n)
            throw std::runtime_error(path.string() + ": truncated PPM payload");
        for (size_t i = 0; i < n; ++i)
            img.data[i] = static_cast<float>(buf[i] / static_cast<double>(maxval));
    } else {
        std::vector<uint8_t> buf(n * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
        if (static_cast<size_t>(in.gcount()) != n * 2)
            throw std::runtime_error(path.string() + ": truncated PPM payload");
        for (size_t i = 0; i < n; ++i) {
            const uint32_t v = (static_cast<uint32_t>(buf[2 * i]) << 8) | buf[2 * i + 1];
            img.data[i] = static_cast<float>(std::min(1.0, v / static_cast<double>(maxval)));
        }
    }
    return img;
}

}  // namespace

void write_image_ppm(const RgbImage& img, const std::filesystem::path& path, int bits) {
    img.validate();
    if (bits < 1 || bits > 16) throw std::invalid_argument("PPM bit depth must be in [1,16]");
    const long maxval = (1L << bits) - 1;
    auto out = open_output(path, std::ios::binary);
    out << "P6\n" << img.cols << ' ' << img.rows << '\n' << maxval << '\n';
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                const long v = std::lround(static_cast<double>(img.at(r, c, ch)) * maxval);
                if (maxval < 256) {
                    out.put(static_cast<char>(v));
                } else {
                    out.put(static_cast<char>((v >> 8) & 0xff));
                    out.put(static_cast<char>(v & 0xff));
                }
            }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

RgbImage read_image(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".png" || ext == ".PNG") return read_png(path);
    if (ext == ".ppm" || ext == ".PPM") return read_ppm(path);
    throw std::runtime_error(path.string() + ": unsupported image format (png/ppm)");
}

// ---------------------------------------------------------------------------
// CSV

int CsvTable::find_column(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
    auto in = open_input(path, std::ios::in);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.columns.push_back(cell);
    table.data.resize(table.columns.size());

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ls(line);
        size_t col = 0;
        while (std::getline(ls, cell, ',')) {
            if (col >= table.columns.size())
                throw std::runtime_error(path.string() + ": too many fields on line " +
                                         std::to_string(line_no));
            try {
                table.data[col].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error(path.string() + ": non-numeric cell '" + cell +
                                         "' on line " + std::to_string(line_no));
            }
            ++col;
        }
        if (col != table.columns.size())
            throw std::runtime_error(path.string() + ": short row on line " +
                                     std::to_string(line_no));
    }
    return table;
}

namespace {

// Shortest round-trip decimal form, so rewritten files are byte-stable.
std::string format_double(double v) {
    for (int prec = 1; prec <= 17; ++prec) {
        char probe[40];
        snprintf(probe, sizeof(probe), "%.*g", prec, v);
        if (std::strtod(probe, nullptr) == v) return probe;
    }
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
    auto out = open_output(path, std::ios::out);
    for (size_t i = 0; i < table.columns.size(); ++i)
        out << table.columns[i] << (i + 1 < table.columns.size() ? ',' : '\n');
    const size_t rows = table.row_count();
    for (const auto& col : table.data)
        if (col.size() != rows) throw std::invalid_argument("CSV columns have unequal lengths");
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < table.columns.size(); ++c)
            out << format_double(table.data[c][r]) << (c + 1 < table.columns.size() ? ',' : '\n');
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Eigen::MatrixXd read_spectra_table(const std::filesystem::path& path, const WavelengthGrid& grid) {
    const CsvTable table = read_csv(path);
    if (table.columns.empty() || table.columns[0] != "wavelength_nm")
        throw std::runtime_error(path.string() + ": first column must be wavelength_nm");
    if (table.row_count() != static_cast<size_t>(grid.count))
        throw std::runtime_error(path.string() + ": row count does not match wavelength grid");
    for (int k = 0; k < grid.count; ++k)
        if (std::abs(table.data[0][static_cast<size_t>(k)] - grid.wavelength(k)) > 1e-9)
            throw std::runtime_error(path.string() + ": wavelength axis does not match grid");
    const Eigen::Index m = static_cast<Eigen::Index>(table.columns.size()) - 1;
    Eigen::MatrixXd spectra(m, grid.count);
    for (Eigen::Index i = 0; i < m; ++i)
        for (int k = 0; k < grid.count; ++k)
            spectra(i, k) = table.data[static_cast<size_t>(i) + 1][static_cast<size_t>(k)];
    return spectra;
}

void write_spectra_table(const Eigen::MatrixXd& spectra, const WavelengthGrid& grid,
                         const std::filesystem::path& path) {
    if (spectra.cols() != grid.count)
        throw std::invalid_argument("spectra width does not match wavelength grid");
    CsvTable table;
    table.columns.push_back("wavelength_nm");
    for (Eigen::Index i = 0; i < spectra.rows(); ++i)
        table.columns.push_back("px_" + std::to_string(i));
    table.data.assign(table.columns.size(), {});
    for (int k = 0; k < grid.count; ++k) {
        table.data[0].push_back(grid.wavelength(k));
        for (Eigen::Index i = 0; i < spectra.rows(); ++i)
            table.data[static_cast<size_t>(i) + 1].push_back(spectra(i, k));
    }
    write_csv(table, path);
}

WavelengthGrid grid_from_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const int wl_col = table.find_column("wavelength_nm");
    if (wl_col < 0) throw std::runtime_error(path.string() + ": missing wavelength_nm column");
    const auto& wl = table.data[static_cast<size_t>(wl_col)];
    if (wl.size() < 2) throw std::runtime_error(path.string() + ": too few wavelength rows");
    WavelengthGrid grid;
    grid.start_nm = wl.front();
    grid.step_nm = wl[1] - wl[0];
    grid.count = static_cast<int>(wl.size());
    grid.validate();
    for (size_t i = 1; i < wl.size(); ++i)
        if (std::abs(wl[i] - grid.wavelength(static_cast<int>(i))) > 1e-9)
            throw std::runtime_error(path.string() + ": wavelength axis is not uniform");
    return grid;
}

Spectrum read_spectrum_csv(const std::filesystem::path& path, const WavelengthGrid& grid) {
    const CsvTable table = read_csv(path);
    const int wl_col = table.find_column("wavelength_nm");
    const int val_col = table.find_column("value");
    if (wl_col < 0 || val_col < 0)
        throw std::runtime_error(path.string() + ": expected columns wavelength_nm,value");
    const auto& wl = table.data[static_cast<size_t>(wl_col)];
    const auto& val = table.data[static_cast<size_t>(val_col)];
    if (wl.size() < 2 || grid.start_nm < wl.front() || grid.end_nm() > wl.back())
        throw std::runtime_error(path.string() + ": table does not cover the working grid");

    Spectrum s;
    s.grid = grid;
    s.values.resize(grid.count);
    size_t j = 0;
    for (int k = 0; k < grid.count; ++k) {
        const double x = grid.wavelength(k);
        while (j + 2 < wl.size() && wl[j + 1] < x) ++j;
        const double t = (x - wl[j]) / (wl[j + 1] - wl[j]);
        s.values[k] = val[j] + t * (val[j + 1] - val[j]);
    }
    s.validate();
    return s;
}

void write_line(const SampledLine& line, const std::filesystem::path& rgb_path,
                const std::filesystem::path& spectra_path) {
    line.validate();
    CsvTable table;
    table.columns = {"row", "col", "r", "g", "b"};
    table.data.assign(5, {});
    for (Eigen::Index i = 0; i < line.size(); ++i) {
        table.data[0].push_back(line.pixel_coords[static_cast<size_t>(i)].first);
        table.data[1].push_back(line.pixel_coords[static_cast<size_t>(i)].second);
        for (int ch = 0; ch < 3; ++ch) table.data[static_cast<size_t>(ch) + 2].push_back(line.rgb(i, ch));
    }
    write_csv(table, rgb_path);
    write_spectra_table(line.spectra, line.grid, spectra_path);
}

SampledLine read_line(const std::filesystem::path& rgb_path,
                      const std::filesystem::path& spectra_path, const WavelengthGrid& grid) {
    const CsvTable table = read_csv(rgb_path);
    for (const auto& name : {"row", "col", "r", "g", "b"})
        if (table.find_column(name) < 0)
            throw std::runtime_error(rgb_path.string() + ": missing column " + std::string(name));
    SampledLine line;
    line.grid = grid;
    const size_t m = table.row_count();
    line.rgb.resize(static_cast<Eigen::Index>(m), 3);
    const int ri = table.find_column("row"), ci = table.find_column("col");
    const int rr = table.find_column("r"), gg = table.find_column("g"), bb = table.find_column("b");
    for (size_t i = 0; i < m; ++i) {
        line.pixel_coords.emplace_back(static_cast<int>(table.data[static_cast<size_t>(ri)][i]),
                                       static_cast<int>(table.data[static_cast<size_t>(ci)][i]));
        line.rgb(static_cast<Eigen::Index>(i), 0) = table.data[static_cast<size_t>(rr)][i];
        line.rgb(static_cast<Eigen::Index>(i), 1) = table.data[static_cast<size_t>(gg)][i];
        line.rgb(static_cast<Eigen::Index>(i), 2) = table.data[static_cast<size_t>(bb)][i];
    }
    line.spectra = read_spectra_table(spectra_path, grid);
    if (line.spectra.rows() != static_cast<Eigen::Index>(m))
        throw std::runtime_error("line rgb and spectra files disagree on sample count");
    line.validate();
    return line;
}

}  // namespace spectracube
