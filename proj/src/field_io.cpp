#include "cpgeo/field_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cpgeo/errors.hpp"

namespace cpgeo {

static_assert(std::endian::native == std::endian::little,
              "field container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'C', 'P', 'G', 'F', '1'};

struct Header {
    std::int32_t nx = 0;
    std::int32_t ny = 0;
    std::int32_t n_theta = 0;
    double h_x = 0.0;
    double h_theta = 0.0;
};

template <typename T>
void put(std::ostream& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) throw IoError("truncated field container");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

void write_header(std::ostream& out, const Header& h) {
    out.write(kMagic, sizeof(kMagic));
    put(out, h.nx);
    put(out, h.ny);
    put(out, h.n_theta);
    put(out, h.h_x);
    put(out, h.h_theta);
}

Header read_header(std::istream& in) {
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a CPGF1 field container");
    }
    Header h;
    h.nx = get<std::int32_t>(in);
    h.ny = get<std::int32_t>(in);
    h.n_theta = get<std::int32_t>(in);
    h.h_x = get<double>(in);
    h.h_theta = get<double>(in);
    if (h.nx <= 0 || h.ny <= 0 || h.n_theta <= 0) throw IoError("corrupt field header");
    return h;
}

void write_values(std::ostream& out, const std::vector<double>& values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw IoError("failed writing field values");
}

std::vector<double> read_values(std::istream& in, std::size_t n) {
    std::vector<double> values(n);
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(n * sizeof(double)))) {
        throw IoError("truncated field values");
    }
    return values;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

ScalarField field_from(const Header& h, std::istream& in) {
    LiftedGrid grid(h.nx, h.ny, h.n_theta, h.h_x);
    if (std::abs(grid.h_theta() - h.h_theta) > 1e-12) throw IoError("inconsistent h_theta");
    return ScalarField(grid, read_values(in, grid.size()));
}

}  // namespace

void write_field(std::ostream& out, const ScalarField& field) {
    const LiftedGrid& g = field.grid();
    write_header(out, {g.nx(), g.ny(), g.n_theta(), g.h_x(), g.h_theta()});
    write_values(out, field.values());
}

void write_field(const std::string& path, const ScalarField& field) {
    auto out = open_out(path);
    write_field(out, field);
}

ScalarField read_field(std::istream& in) {
    const Header h = read_header(in);
    if (h.n_theta < 2) throw IoError("container holds a 2-D map, not a lifted field");
    return field_from(h, in);
}

ScalarField read_field(const std::string& path) {
    auto in = open_in(path);
    return read_field(in);
}

void write_map(std::ostream& out, const Field2D& map, double h_x) {
    write_header(out, {map.nx(), map.ny(), 1, h_x, 0.0});
    write_values(out, map.values());
}

void write_map(const std::string& path, const Field2D& map, double h_x) {
    auto out = open_out(path);
    write_map(out, map, h_x);
}

Field2D read_map(std::istream& in) {
    const Header h = read_header(in);
    if (h.n_theta != 1) throw IoError("container holds a lifted field, not a 2-D map");
    return Field2D(h.nx, h.ny, read_values(in, static_cast<std::size_t>(h.nx) * h.ny));
}

Field2D read_map(const std::string& path) {
    auto in = open_in(path);
    return read_map(in);
}

std::variant<ScalarField, Field2D> read_any(const std::string& path) {
    auto in = open_in(path);
    const Header h = read_header(in);
    if (h.n_theta == 1) {
        return Field2D(h.nx, h.ny, read_values(in, static_cast<std::size_t>(h.nx) * h.ny));
    }
    return field_from(h, in);
}

}  // namespace cpgeo
