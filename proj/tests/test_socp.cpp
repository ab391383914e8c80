// SPDX-License-Identifier: Apache-2.0

#include "dfrc/socp.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace dfrc;
using namespace dfrc::socp;

namespace {

SocConstraint cone(MatrixXd a, VectorXd b, VectorXd c, double d) { return {std::move(a), std::move(b), std::move(c), d}; }

// Independent optimality audit from the returned primal/dual pair:
// stationarity c = sum_i (z0_i c_i + A_i^T z1_i) - E^T y, dual cone membership,
// primal feasibility and complementary slackness.
struct Kkt {
  double stationarity = 0.0;
  double dual_cone = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
};

Kkt audit(const SocProgram& p, const SolveResult& r) {
  Kkt k;
  VectorXd grad = p.objective;
  Eigen::Index pos = 0;
  for (const auto& c : p.cones) {
    const double z0 = r.cone_duals(pos);
    const VectorXd z1 = r.cone_duals.segment(pos + 1, c.a.rows());
    pos += 1 + c.a.rows();
    grad -= z0 * c.c + c.a.transpose() * z1;
    k.dual_cone = std::max(k.dual_cone, z1.norm() - z0);
    const double s0 = c.c.dot(r.x) + c.d;
    const VectorXd s1 = c.a * r.x + c.b;
    k.complementarity += s0 * z0 + s1.dot(z1);
  }
  if (p.eq_matrix.rows() > 0) grad += p.eq_matrix.transpose() * r.eq_duals;
  k.stationarity = grad.norm();
  k.primal = p.max_violation(r.x);
  return k;
}

// Random program with a strictly feasible point and a bounding ball.
SocProgram random_program(std::mt19937_64& rng, int n, int ncones, int neq) {
  std::normal_distribution<double> g;
  auto vec = [&](int m) {
    VectorXd v(m);
    for (int i = 0; i < m; ++i) v(i) = g(rng);
    return v;
  };
  SocProgram p(n);
  const VectorXd x0 = vec(n);
  p.objective = vec(n);
  for (int i = 0; i < ncones; ++i) {
    const int rows = 1 + i % 3;
    MatrixXd a(rows, n);
    for (int r = 0; r < rows; ++r) a.row(r) = vec(n).transpose();
    const VectorXd b = vec(rows);
    const VectorXd c = 0.3 * vec(n);
    const double d = (a * x0 + b).norm() - c.dot(x0) + 0.5;
    p.add_cone(cone(a, b, c, d));
  }
  p.add_cone(cone(MatrixXd::Identity(n, n), -x0, VectorXd::Zero(n), 3.0));
  for (int i = 0; i < neq; ++i) {
    const VectorXd row = vec(n);
    p.add_equality(row, row.dot(x0));
  }
  return p;
}

}  // namespace

TEST_SUITE("socp") {
  TEST_CASE("linear objective over the unit disc") {
    SocProgram p(2);
    p.objective << -1.0, -1.0;
    p.add_cone(cone(MatrixXd::Identity(2, 2), VectorXd::Zero(2), VectorXd::Zero(2), 1.0));
    const auto r = solve(p);
    REQUIRE(r.optimal());
    CHECK(r.objective == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-7));
    CHECK(r.x(0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    CHECK(r.max_violation < 1e-7);
  }

  TEST_CASE("distance to a hyperplane") {
    // variables (x1, x2, x3, t): min t s.t. |x - q| <= t, sum x = 1
    SocProgram p(4);
    p.objective(3) = 1.0;
    MatrixXd a = MatrixXd::Zero(3, 4);
    a.leftCols(3) = MatrixXd::Identity(3, 3);
    VectorXd q(3);
    q << 2.0, -1.0, 3.0;
    VectorXd c = VectorXd::Zero(4);
    c(3) = 1.0;
    p.add_cone(cone(a, -q, c, 0.0));
    VectorXd row(4);
    row << 1.0, 1.0, 1.0, 0.0;
    p.add_equality(row, 1.0);
    const auto r = solve(p);
    REQUIRE(r.optimal());
    CHECK(r.objective == doctest::Approx(std::abs(q.sum() - 1.0) / std::sqrt(3.0)).epsilon(1e-7));
    const auto k = audit(p, r);
    CHECK(k.stationarity < 1e-6);
  }

  TEST_CASE("least-norm point of a linear system") {
    // min t s.t. |x| <= t, E x = f has optimum |E^+ f|.
    std::mt19937_64 rng(3);
    const int n = 5;
    SocProgram p(n + 1);
    p.objective(n) = 1.0;
    MatrixXd a = MatrixXd::Zero(n, n + 1);
    a.leftCols(n) = MatrixXd::Identity(n, n);
    VectorXd c = VectorXd::Zero(n + 1);
    c(n) = 1.0;
    p.add_cone(cone(a, VectorXd::Zero(n), c, 0.0));
    MatrixXd e(2, n);
    e << 1, 2, 0, -1, 1, 0, 1, 1, 1, -2;
    VectorXd f(2);
    f << 1.0, -3.0;
    for (int i = 0; i < 2; ++i) {
      VectorXd row = VectorXd::Zero(n + 1);
      row.head(n) = e.row(i).transpose();
      p.add_equality(row, f(i));
    }
    const double want = e.completeOrthogonalDecomposition().solve(f).norm();
    const auto r = solve(p);
    REQUIRE(r.optimal());
    CHECK(r.objective == doctest::Approx(want).epsilon(1e-7));
  }

  TEST_CASE("random feasible programs satisfy KKT") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 25; ++trial) {
      const int n = 3 + trial % 6;
      const auto p = random_program(rng, n, 2 + trial % 5, trial % 3);
      const auto r = solve(p);
      REQUIRE(r.optimal());
      const auto k = audit(p, r);
      const double scale = std::max(1.0, p.objective.norm());
      CHECK(k.stationarity < 1e-6 * scale);
      CHECK(k.dual_cone < 1e-7);
      CHECK(k.primal < 1e-6);
      CHECK(std::abs(k.complementarity) < 1e-6 * scale);
      // dual objective equals primal objective at a KKT point
      double dual = 0.0;
      Eigen::Index pos = 0;
      for (const auto& c : p.cones) {
        dual -= r.cone_duals(pos) * c.d + c.b.dot(r.cone_duals.segment(pos + 1, c.a.rows()));
        pos += 1 + c.a.rows();
      }
      if (p.eq_rhs.size() > 0) dual -= p.eq_rhs.dot(r.eq_duals);
      CHECK(std::abs(dual - r.objective) < 1e-6 * std::max(1.0, std::abs(r.objective)));
    }
  }

  TEST_CASE("repeat solves are identical") {
    std::mt19937_64 rng(5);
    const auto p = random_program(rng, 6, 4, 1);
    const auto a = solve(p);
    const auto b = solve(p);
    CHECK(a.x == b.x);
    CHECK(a.iterations == b.iterations);
  }

  TEST_CASE("primal infeasibility is certified") {
    // |x| <= 1 and x1 >= 2
    SocProgram p(2);
    p.objective << 1.0, 0.0;
    p.add_cone(cone(MatrixXd::Identity(2, 2), VectorXd::Zero(2), VectorXd::Zero(2), 1.0));
    VectorXd c(2);
    c << 1.0, 0.0;
    p.add_cone(cone(MatrixXd::Zero(0, 2), VectorXd::Zero(0), c, -2.0));
    const auto r = solve(p);
    CHECK(r.status == SolveStatus::PrimalInfeasible);
    CHECK_FALSE(r.usable());
  }

  TEST_CASE("unbounded objective is certified") {
    // min -x1 s.t. |x2| <= x1
    SocProgram p(2);
    p.objective << -1.0, 0.0;
    MatrixXd a(1, 2);
    a << 0.0, 1.0;
    VectorXd c(2);
    c << 1.0, 0.0;
    p.add_cone(cone(a, VectorXd::Zero(1), c, 0.0));
    const auto r = solve(p);
    CHECK(r.status == SolveStatus::DualInfeasible);
  }

  TEST_CASE("inconsistent programs are rejected") {
    SocProgram p(2);
    p.add_cone(cone(MatrixXd::Identity(3, 3), VectorXd::Zero(3), VectorXd::Zero(2), 1.0));
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    SocProgram q(2);
    q.objective << 1.0, 0.0;
    CHECK_THROWS_AS(q.validate(), InvalidArgument);
    CHECK_THROWS_AS(q.add_equality(VectorXd::Ones(3), 1.0), InvalidArgument);
  }

  TEST_CASE("complex embedding preserves norms and inner products") {
    std::mt19937_64 rng(6);
    const MatrixXcd f = test::random_matrix(rng, 4, 3);
    const VectorXcd g = test::random_vector(rng, 4);
    const auto emb = complex_to_real_embedding(f, g, 2);
    CHECK(emb.a.cols() == 8);
    for (int i = 0; i < 5; ++i) {
      const VectorXcd w = test::random_vector(rng, 3);
      VectorXd x(8);
      x << to_real(w), 7.0, -3.0;
      CHECK((emb.a * x + emb.b).norm() == doctest::Approx((f * w + g).norm()).epsilon(1e-13));
      const VectorXcd a = test::random_vector(rng, 3);
      CHECK(real_functional(a, 2).dot(x) == doctest::Approx(a.dot(w).real()).epsilon(1e-13));
      CHECK((to_complex(x, 3) - w).norm() == 0.0);
    }
  }

  TEST_CASE("CBF dump encodes the same affine rows") {
    std::mt19937_64 rng(7);
    const auto p = random_program(rng, 4, 3, 2);
    std::ostringstream os;
    write_cbf(p, os);
    std::istringstream in(os.str());
    std::string tok;
    std::map<std::string, std::vector<std::string>> sections;
    int nrows = 0;
    std::vector<double> objc(4, 0.0);
    std::map<int, std::map<int, double>> acoord;
    std::map<int, double> bcoord;
    std::vector<std::pair<std::string, int>> cones;
    while (in >> tok) {
      if (tok == "VER") {
        int v;
        in >> v;
        CHECK(v == 3);
      } else if (tok == "CON") {
        int k;
        in >> nrows >> k;
        for (int i = 0; i < k; ++i) {
          std::string kind;
          int dim;
          in >> kind >> dim;
          cones.emplace_back(kind, dim);
        }
      } else if (tok == "OBJACOORD") {
        int nnz;
        in >> nnz;
        for (int i = 0; i < nnz; ++i) {
          int j;
          double v;
          in >> j >> v;
          objc[j] = v;
        }
      } else if (tok == "ACOORD") {
        int nnz;
        in >> nnz;
        for (int i = 0; i < nnz; ++i) {
          int r, j;
          double v;
          in >> r >> j >> v;
          acoord[r][j] = v;
        }
      } else if (tok == "BCOORD") {
        int nnz;
        in >> nnz;
        for (int i = 0; i < nnz; ++i) {
          int r;
          double v;
          in >> r >> v;
          bcoord[r] = v;
        }
      }
    }
    REQUIRE(cones.size() == p.cones.size() + 1);
    CHECK(cones.back().first == "L=");
    for (int j = 0; j < 4; ++j) CHECK(objc[j] == p.objective(j));

    VectorXd x(4);
    x << 0.3, -1.2, 2.0, 0.7;
    VectorXd rows = VectorXd::Zero(nrows);
    for (int r = 0; r < nrows; ++r) {
      for (const auto& [j, v] : acoord[r]) rows(r) += v * x(j);
      if (bcoord.count(r)) rows(r) += bcoord[r];
    }
    int r = 0;
    for (const auto& c : p.cones) {
      CHECK(rows(r) == doctest::Approx(c.c.dot(x) + c.d).epsilon(1e-14));
      CHECK((rows.segment(r + 1, c.a.rows()) - (c.a * x + c.b)).norm() < 1e-12);
      r += 1 + static_cast<int>(c.a.rows());
    }
    CHECK((rows.tail(2) - (p.eq_matrix * x - p.eq_rhs)).norm() < 1e-12);
  }
}
