// SPDX-License-Identifier: Apache-2.0
//
// Small helpers shared by the unit tests.

#pragma once

#include "dfrc/common.hpp"

#include <algorithm>
#include <random>

namespace dfrc::test {

inline VectorXcd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng);
    v(i) = cdouble(re, g(rng));
  }
  return v;
}

inline MatrixXcd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  MatrixXcd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) m.col(j) = random_vector(rng, rows);
  return m;
}

template <typename A, typename B>
double rel_err(const A& got, const B& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

}  // namespace dfrc::test
