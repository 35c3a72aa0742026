#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace vvord {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed input: unreadable files, shape mismatches, arguments outside
/// their domain. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver a result it was required to
/// deliver (no convergence, ill-conditioned factorization). Exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Absolute tolerance for treating a matrix as symmetric.
inline constexpr double kSymmetryTol = 1e-9;

const char* version();

}  // namespace vvord
