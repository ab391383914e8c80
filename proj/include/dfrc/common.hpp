// SPDX-License-Identifier: Apache-2.0
//
// Shared numeric types, unit conversions, seeding and error types.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dfrc {

using cdouble = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cdouble kJ{0.0, 1.0};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// splitmix64 finalizer; used to derive independent per-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a named sub-stream of a base seed. Streams with different ids are
/// statistically independent and do not depend on how many other streams exist.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ stream) ^ index);
}

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The design produces no target return (T0 w = 0) or has no target at all.
class DegenerateDesign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The communication requirement cannot be met on some (subcarrier, user).
class InfeasibleDesign : public std::runtime_error {
 public:
  InfeasibleDesign(const std::string& what, int subcarrier, int user, double best_min_sinr_db)
      : std::runtime_error(what), subcarrier_(subcarrier), user_(user), best_db_(best_min_sinr_db) {}
  int subcarrier() const { return subcarrier_; }
  int user() const { return user_; }
  double best_min_sinr_db() const { return best_db_; }

 private:
  int subcarrier_;
  int user_;
  double best_db_;
};

}  // namespace dfrc
