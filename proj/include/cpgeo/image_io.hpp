#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpgeo/lifted_grid.hpp"

namespace cpgeo {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
    std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* at(int x, int y) const { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

/// Grayscale intensities in [0, 1] from PNG (8/16 bit, gray or color; color is
/// reduced to luminance by libpng, alpha composited on black) or binary PGM
/// (P5, 8/16 bit).
/// The format is sniffed from the leading bytes.
Field2D decode_image(const std::vector<std::uint8_t>& bytes);
Field2D read_image(const std::string& path);

/// Thresholds intensities at 128/255: segmentation masks of 0 and 1.
Field2D binarize(const Field2D& gray);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
/// Gray values clamped to [0, 1] and stored as 8-bit.
std::vector<std::uint8_t> encode_png(const Field2D& gray);
void write_png(const std::string& path, const RgbImage& image);
void write_png(const std::string& path, const Field2D& gray);

std::vector<std::uint8_t> read_bytes(const std::string& path);
void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace cpgeo
