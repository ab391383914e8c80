// SPDX-License-Identifier: Apache-2.0
//
// Canonical second-order cone programs and a primal-dual interior-point
// solver for them.
//
//   minimize    c^T x
//   subject to  || A_i x + b_i || <= c_i^T x + d_i   for every cone i
//               E x = f
//
// Complex-valued problems are embedded here once: a complex variable
// w in C^d maps to x = [Re w; Im w] and a complex affine map F w + g maps to
// the real block map [Re F, -Im F; Im F, Re F] x + [Re g; Im g], which
// preserves norms exactly.

#pragma once

#include "dfrc/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dfrc::socp {

struct SocConstraint {
  MatrixXd a;       // rows x n
  VectorXd b;       // rows
  VectorXd c;       // n
  double d = 0.0;

  /// ||a x + b|| - (c^T x + d); positive when violated.
  double violation(const VectorXd& x) const;
};

struct SocProgram {
  int num_vars = 0;
  VectorXd objective;
  std::vector<SocConstraint> cones;
  MatrixXd eq_matrix;  // p x n, possibly 0 rows
  VectorXd eq_rhs;

  explicit SocProgram(int n = 0);

  void add_cone(SocConstraint cone);
  void add_equality(const VectorXd& row, double rhs);

  /// Throws InvalidArgument on inconsistent dimensions or a program with
  /// neither constraints nor a zero objective.
  void validate() const;

  /// Largest cone violation and equality residual at x (absolute).
  double max_violation(const VectorXd& x) const;
};

struct RealAffine {
  MatrixXd a;
  VectorXd b;
};

/// [Re F, -Im F; Im F, Re F] and [Re g; Im g]; `extra_cols` zero columns are
/// appended for real auxiliary variables that follow the complex block.
RealAffine complex_to_real_embedding(const MatrixXcd& map, const VectorXcd& offset, int extra_cols = 0);

/// Coefficients r with r^T x = Re(a^H w) for x = [Re w; Im w; aux...].
VectorXd real_functional(const VectorXcd& a, int extra_cols = 0);

/// x = [Re w; Im w] and back.
VectorXd to_real(const VectorXcd& w);
VectorXcd to_complex(const VectorXd& x, Eigen::Index complex_dim);

// Inaccurate: the run stalled, but its best iterate is primal feasible to tol
// with dual residual and gap within inaccurate_tol.
enum class SolveStatus { Optimal, Inaccurate, PrimalInfeasible, DualInfeasible, MaxIterations, NumericalTrouble };

std::string status_name(SolveStatus s);

struct SolverOptions {
  double tol = 1e-8;
  int max_iters = 100;
  double step_fraction = 0.99;
  double inaccurate_tol = 1e-6;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalTrouble;
  VectorXd x;
  VectorXd eq_duals;    // y
  VectorXd cone_duals;  // z, stacked per cone as (z0, z1)
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double max_violation = 0.0;  // independent recheck on the original constraints
  int iterations = 0;
  std::string diagnostics;

  bool optimal() const { return status == SolveStatus::Optimal; }
  bool usable() const { return status == SolveStatus::Optimal || status == SolveStatus::Inaccurate; }
};

/// Homogeneous self-dual embedding with Nesterov-Todd scaling and Mehrotra
/// predictor-corrector steps. Reentrant; no global state.
SolveResult solve(const SocProgram& program, const SolverOptions& options = {});

/// Conic Benchmark Format (CBF, version 3) text dump.
void write_cbf(const SocProgram& program, std::ostream& out);

}  // namespace dfrc::socp
