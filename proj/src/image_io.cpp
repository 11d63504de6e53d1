#include "cpgeo/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cpgeo/errors.hpp"

namespace cpgeo {

namespace {

Field2D decode_png(const std::vector<std::uint8_t>& bytes) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw IoError(std::string("PNG: ") + img.message);
    }
    // 16-bit sources are read linear at full depth, everything else as 8-bit gray
    const bool wide = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    img.format = wide ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
    const int w = static_cast<int>(img.width), h = static_cast<int>(img.height);
    Field2D out(w, h);
    if (wide) {
        std::vector<std::uint16_t> buf(PNG_IMAGE_SIZE(img) / 2);
        if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
            png_image_free(&img);
            throw IoError(std::string("PNG: ") + img.message);
        }
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = buf[k] / 65535.0;
    } else {
        std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
        if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
            png_image_free(&img);
            throw IoError(std::string("PNG: ") + img.message);
        }
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = buf[k] / 255.0;
    }
    return out;
}

Field2D decode_pgm(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 2;
    auto token = [&]() {
        // whitespace and comments between header fields
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        long v = 0;
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
        if (pos == start || v > (1L << 30)) throw IoError("PGM: malformed header");
        return v;
    };
    const long w = token(), h = token(), maxval = token();
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError("PGM: malformed header");
    ++pos;
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError("PGM: bad dimensions or maxval");
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bpp;
    if (bytes.size() - pos < need) throw IoError("PGM: truncated pixel data");
    Field2D out(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::size_t p = pos + k * bpp;
        const double v = bpp == 2 ? (bytes[p] << 8 | bytes[p + 1]) : bytes[p];
        out[k] = std::min(1.0, v / static_cast<double>(maxval));
    }
    return out;
}

}  // namespace

Field2D decode_image(const std::vector<std::uint8_t>& bytes) {
    static const std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
    throw IoError("unsupported image format (expected PNG or binary PGM)");
}

Field2D read_image(const std::string& path) { return decode_image(read_bytes(path)); }

Field2D binarize(const Field2D& gray) {
    Field2D out(gray.nx(), gray.ny());
    for (std::size_t k = 0; k < gray.size(); ++k) out[k] = gray[k] * 255.0 >= 128.0 ? 1.0 : 0.0;
    return out;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    if (image.width <= 0 || image.height <= 0) throw ValidationError("image to encode is empty");
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
        throw ValidationError("RGB buffer does not match its dimensions");
    }
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG: ") + img.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_png(const Field2D& gray) {
    RgbImage img(gray.nx(), gray.ny());
    for (int y = 0; y < gray.ny(); ++y) {
        for (int x = 0; x < gray.nx(); ++x) {
            const auto v = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(gray(x, y), 0.0, 1.0)));
            std::uint8_t* p = img.at(x, y);
            p[0] = p[1] = p[2] = v;
        }
    }
    return encode_png(img);
}

void write_png(const std::string& path, const RgbImage& image) { write_bytes(path, encode_png(image)); }
void write_png(const std::string& path, const Field2D& gray) { write_bytes(path, encode_png(gray)); }

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace cpgeo
