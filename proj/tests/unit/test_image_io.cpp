#include <cmath>
#include <string>

#include "cpgeo/errors.hpp"
#include "cpgeo/image_io.hpp"
#include "doctest.h"

using namespace cpgeo;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("gray PNG round trip") {
    Field2D f(7, 5);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = static_cast<double>(k * 7 % 256) / 255.0;
    const Field2D g = decode_image(encode_png(f));
    REQUIRE(g.nx() == 7);
    REQUIRE(g.ny() == 5);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(g[k] == doctest::Approx(f[k]).epsilon(1e-12));
}

TEST_CASE("RGB PNG decodes to luminance") {
    RgbImage img(3, 2);
    for (int x = 0; x < 3; ++x) {
        img.at(x, 0)[0] = img.at(x, 0)[1] = img.at(x, 0)[2] = 200;
        img.at(x, 1)[1] = 255;
    }
    const Field2D g = decode_image(encode_png(img));
    CHECK(g(1, 0) == doctest::Approx(200.0 / 255.0).epsilon(0.01));
    CHECK(g(1, 1) > 0.5);
    CHECK(g(1, 1) < 1.0);
}

TEST_CASE("binary PGM") {
    std::string s = "P5\n# comment\n3 2\n255\n";
    for (int v : {0, 10, 128, 127, 255, 64}) s.push_back(static_cast<char>(v));
    const Field2D f = decode_image(bytes_of(s));
    CHECK(f.nx() == 3);
    CHECK(f(1, 0) == doctest::Approx(10 / 255.0));
    CHECK(f(1, 1) == 1.0);
    const Field2D b = binarize(f);
    CHECK(b(2, 0) == 1.0);
    CHECK(b(0, 1) == 0.0);

    std::string w = "P5 2 1 1000\n";
    for (int v : {0x01, 0xF4, 0x03, 0xE8}) w.push_back(static_cast<char>(v));
    const Field2D g = decode_image(bytes_of(w));
    CHECK(g(0, 0) == doctest::Approx(0.5));
    CHECK(g(1, 0) == 1.0);
}

TEST_CASE("malformed images") {
    CHECK_THROWS_AS(decode_image(bytes_of("GIF89a")), IoError);
    CHECK_THROWS_AS(decode_image(bytes_of("P5\n3 2\n255\nab")), IoError);
    CHECK_THROWS_AS(decode_image(bytes_of("P5\nx 2\n255\n")), IoError);
    auto png = encode_png(Field2D(4, 4, 0.5));
    png.resize(png.size() / 2);
    CHECK_THROWS_AS(decode_image(png), IoError);
    CHECK_THROWS_AS(read_image("/nonexistent/file.png"), IoError);
}
