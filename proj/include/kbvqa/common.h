#ifndef KBVQA_COMMON_H_
#define KBVQA_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace kbvqa {

// All numerics run in 64-bit floating point. Row-major storage keeps row
// slices (token states, attention rows) contiguous.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Error raised for contract violations and malformed inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by link resolvers when the backend cannot be reached.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Lowercases ASCII letters; other bytes are passed through.
std::string AsciiLower(std::string_view s);

// Formats a double so that parsing it back yields the same value.
std::string FormatDouble(double v);

// 64-bit FNV-1a, used for checksums and seed derivation.
uint64_t Fnv1a(std::string_view data, uint64_t seed = 14695981039346656037ULL);

// Checksum over the raw bytes of a matrix.
uint64_t MatrixChecksum(const Matrix& m);

}  // namespace kbvqa

#endif  // KBVQA_COMMON_H_
