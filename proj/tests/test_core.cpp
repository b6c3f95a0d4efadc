#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spectracube/io.hpp"
#include "spectracube/rng.hpp"

using namespace spectracube;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "spectracube_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

Hypercube random_cube(Rng& rng, int rows, int cols, int bands) {
    WavelengthGrid grid;
    grid.start_nm = 380.0;
    grid.step_nm = 1.0;
    grid.count = bands;
    Hypercube cube(rows, cols, grid);
    for (auto& v : cube.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    return cube;
}

}  // namespace

TEST_CASE("wavelength grid defaults cover 380-720 nm") {
    WavelengthGrid grid;
    grid.validate();
    CHECK(grid.count == 341);
    CHECK(grid.wavelength(0) == doctest::Approx(380.0));
    CHECK(grid.end_nm() == doctest::Approx(720.0));
}

TEST_CASE("nearest index rounds and breaks ties toward the lower wavelength") {
    WavelengthGrid grid;
    CHECK(grid.nearest_index(550.0) == 170);
    CHECK(grid.nearest_index(550.4) == 170);
    CHECK(grid.nearest_index(550.5) == 170);  // tie -> lower
    CHECK(grid.nearest_index(550.6) == 171);
    CHECK_THROWS_AS(grid.nearest_index(379.0), std::out_of_range);
    CHECK_THROWS_AS(grid.nearest_index(720.5), std::out_of_range);
}

TEST_CASE("grid invariants reject bad fields") {
    WavelengthGrid grid;
    grid.step_nm = 0.0;
    CHECK_THROWS_AS(grid.validate(), std::invalid_argument);
    grid.step_nm = 1.0;
    grid.count = 1;
    CHECK_THROWS_AS(grid.validate(), std::invalid_argument);
}

TEST_CASE("cube round trip is bit exact") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const int rows = 1 + static_cast<int>(rng.uniform_index(6));
        const int cols = 1 + static_cast<int>(rng.uniform_index(6));
        const int bands = 2 + static_cast<int>(rng.uniform_index(8));
        const Hypercube cube = random_cube(rng, rows, cols, bands);
        const auto path = temp_path("roundtrip.hsc");
        write_cube(cube, path);
        const Hypercube back = read_cube(path);
        CHECK(back.rows == cube.rows);
        CHECK(back.cols == cube.cols);
        CHECK(back.grid == cube.grid);
        CHECK(back.data == cube.data);  // bit exact
    }
}

TEST_CASE("tiny cube values survive the container") {
    WavelengthGrid grid;
    grid.count = 2;
    Hypercube cube(1, 1, grid);
    cube.at(0, 0, 0) = 0.25f;
    cube.at(0, 0, 1) = 0.5f;
    const auto path = temp_path("tiny.hsc");
    write_cube(cube, path);
    const Hypercube back = read_cube(path);
    CHECK(back.at(0, 0, 0) == 0.25f);
    CHECK(back.at(0, 0, 1) == 0.5f);
}

TEST_CASE("payload size is rows*cols*bands*4 after the header line") {
    Rng rng(7);
    const Hypercube cube = random_cube(rng, 3, 4, 5);
    const auto path = temp_path("payload.hsc");
    write_cube(cube, path);

    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    in.seekg(0, std::ios::end);
    const auto total = static_cast<size_t>(in.tellg());
    CHECK(total - header.size() - 1 == 3u * 4u * 5u * 4u);
}

TEST_CASE("zero filled cube writes zero bytes after the header") {
    WavelengthGrid grid;
    grid.count = 2;
    const Hypercube cube(2, 2, grid);
    const auto path = temp_path("zeros.hsc");
    write_cube(cube, path);
    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    REQUIRE(payload.size() == 32);
    for (char b : payload) CHECK(b == 0);
}

TEST_CASE("header/payload mismatch is rejected") {
    Rng rng(3);
    const Hypercube cube = random_cube(rng, 2, 2, 3);
    const auto path = temp_path("mismatch.hsc");
    write_cube(cube, path);

    // truncate one plane off the payload
    std::ifstream in(path, std::ios::binary);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    contents.resize(contents.size() - 2 * 2 * 4);
    std::ofstream out(path, std::ios::binary);
    out << contents;
    out.close();

    CHECK_THROWS_WITH_AS(static_cast<void>(read_cube(path)),
                         doctest::Contains("payload length mismatch"), std::runtime_error);
}

TEST_CASE("non-finite payload and malformed headers are hard errors") {
    Rng rng(4);
    Hypercube cube = random_cube(rng, 2, 2, 2);
    const auto path = temp_path("nan.hsc");
    write_cube(cube, path);

    // poke a NaN into the payload
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    std::string header;
    std::getline(f, header);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    f.write(reinterpret_cast<const char*>(&nan), sizeof(float));
    f.close();
    CHECK_THROWS_AS(static_cast<void>(read_cube(path)), std::runtime_error);

    std::ofstream bad(path, std::ios::binary);
    bad << "{not json\n";
    bad.close();
    CHECK_THROWS_AS(static_cast<void>(read_cube(path)), std::runtime_error);
}

TEST_CASE("slice_plane returns the exact stored plane for every band") {
    Rng rng(11);
    const Hypercube cube = random_cube(rng, 4, 3, 6);
    for (int k = 0; k < cube.grid.count; ++k) {
        const Eigen::MatrixXd plane = slice_plane(cube, cube.grid.wavelength(k));
        for (int r = 0; r < cube.rows; ++r)
            for (int c = 0; c < cube.cols; ++c)
                CHECK(plane(r, c) == static_cast<double>(cube.at(r, c, k)));
    }
}

TEST_CASE("png round trip at 8 and 16 bits") {
    Rng rng(5);
    RgbImage img(6, 5);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform01());

    for (int bits : {8, 16}) {
        const auto path = temp_path("img" + std::to_string(bits) + ".png");
        write_image_png(img, path, bits);
        const RgbImage back = read_image(path);
        CHECK(back.rows == img.rows);
        CHECK(back.cols == img.cols);
        CHECK(back.bit_depth_origin == bits);
        const double tol = 0.5 / (std::pow(2.0, bits) - 1.0);
        for (size_t i = 0; i < img.data.size(); ++i)
            CHECK(std::abs(back.data[i] - img.data[i]) <= tol + 1e-7);
    }
}

TEST_CASE("10-bit png uses an sBIT chunk and normalizes by 1023") {
    RgbImage img(2, 2);
    img.at(0, 0, 0) = 1.0f;
    img.at(1, 1, 2) = 0.5f;
    const auto path = temp_path("img10.png");
    write_image_png(img, path, 10);
    const RgbImage back = read_image(path);
    CHECK(back.bit_depth_origin == 10);
    CHECK(back.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(back.at(1, 1, 2) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("ppm round trip") {
    Rng rng(6);
    RgbImage img(3, 7);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform01());
    const auto path = temp_path("img.ppm");
    write_image_ppm(img, path, 16);
    const RgbImage back = read_image(path);
    CHECK(back.rows == 3);
    CHECK(back.cols == 7);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-4));
}

TEST_CASE("csv and spectra table round trip") {
    WavelengthGrid grid;
    grid.count = 5;
    Eigen::MatrixXd spectra(3, 5);
    spectra << 1, 2, 3, 4, 5, 0.5, 0.25, 0.125, 0.1, -0.3, 10, 20, 30, 40, 50;
    const auto path = temp_path("spectra.csv");
    write_spectra_table(spectra, grid, path);
    const Eigen::MatrixXd back = read_spectra_table(path, grid);
    CHECK((back - spectra).cwiseAbs().maxCoeff() == 0.0);

    WavelengthGrid wrong = grid;
    wrong.start_nm = 400.0;
    CHECK_THROWS_AS(static_cast<void>(read_spectra_table(path, wrong)), std::runtime_error);
}

TEST_CASE("sampled line round trip through csv pair") {
    Rng rng(9);
    WavelengthGrid grid;
    grid.count = 4;
    SampledLine line;
    line.grid = grid;
    line.rgb.resize(6, 3);
    line.spectra.resize(6, 4);
    for (int i = 0; i < 6; ++i) {
        line.pixel_coords.emplace_back(i, 2);
        for (int ch = 0; ch < 3; ++ch) line.rgb(i, ch) = rng.uniform01();
        for (int k = 0; k < 4; ++k) line.spectra(i, k) = rng.uniform(-1.0, 1.0);
    }
    const auto rgb_path = temp_path("line_rgb.csv");
    const auto spec_path = temp_path("line_spectra.csv");
    write_line(line, rgb_path, spec_path);
    const SampledLine back = read_line(rgb_path, spec_path, grid);
    CHECK(back.pixel_coords == line.pixel_coords);
    CHECK((back.rgb - line.rgb).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.spectra - line.spectra).cwiseAbs().maxCoeff() == 0.0);
}
