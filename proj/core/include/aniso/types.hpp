#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace aniso {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Dimension of the Euclidean embedding space: 3 original + 5 extra channels.
inline constexpr int kEmbedDim = 8;
inline constexpr int kExtraChannels = kEmbedDim - 3;

using PointE = Eigen::Matrix<double, kEmbedDim, 1>;
using MatE = Eigen::Matrix<double, kEmbedDim, kEmbedDim>;

using Face = std::array<int, 3>;

enum class ErrorKind {
    Input,     // malformed files, bad arguments, contract violations on user data
    Numerical, // solver failures, non-finite values
};

/// Base error for everything the library throws deliberately.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

/// Parse failure carrying the 1-based line number of the offending line.
class ParseError : public InputError {
public:
    ParseError(const std::string& file, int line, const std::string& msg)
        : InputError(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

inline PointE lift(const Vec3& p) {
    PointE x = PointE::Zero();
    x.head<3>() = p;
    return x;
}

} // namespace aniso
