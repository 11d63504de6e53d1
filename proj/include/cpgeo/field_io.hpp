#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "cpgeo/lifted_grid.hpp"

namespace cpgeo {

// Binary field container:
//
//   bytes 0..4    magic "CPGF1"
//   3 x int32 LE  nx, ny, n_theta
//   2 x f64 LE    h_x, h_theta
//   f64 LE        nx*ny*n_theta values, linear order (iy, ix, itheta), itheta fastest
//
// 2-D maps use the same header with n_theta = 1 and h_theta = 0.

void write_field(std::ostream& out, const ScalarField& field);
void write_field(const std::string& path, const ScalarField& field);
ScalarField read_field(std::istream& in);
ScalarField read_field(const std::string& path);

void write_map(std::ostream& out, const Field2D& map, double h_x = 1.0);
void write_map(const std::string& path, const Field2D& map, double h_x = 1.0);
Field2D read_map(std::istream& in);
Field2D read_map(const std::string& path);

// Reads either flavour; n_theta == 1 yields a Field2D.
std::variant<ScalarField, Field2D> read_any(const std::string& path);

}  // namespace cpgeo
