#pragma once

#include <stdexcept>
#include <string>

namespace cpgeo {

// Bad input: dimensions, out-of-range points, malformed files or requests.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// The numerical machinery could not produce a result (non-convergence,
// unreachable target, stagnating backtrack).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpgeo
