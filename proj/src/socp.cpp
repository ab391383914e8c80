// SPDX-License-Identifier: Apache-2.0

#include "dfrc/socp.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <sstream>

namespace dfrc::socp {

// ---------------------------------------------------------------------------
// Program representation

double SocConstraint::violation(const VectorXd& x) const {
  return (a * x + b).norm() - (c.dot(x) + d);
}

SocProgram::SocProgram(int n)
    : num_vars(n), objective(VectorXd::Zero(n)), eq_matrix(0, n), eq_rhs(0) {}

void SocProgram::add_cone(SocConstraint cone) { cones.push_back(std::move(cone)); }

void SocProgram::add_equality(const VectorXd& row, double rhs) {
  if (row.size() != num_vars) throw InvalidArgument("equality row length mismatch");
  eq_matrix.conservativeResize(eq_matrix.rows() + 1, num_vars);
  eq_matrix.row(eq_matrix.rows() - 1) = row.transpose();
  eq_rhs.conservativeResize(eq_rhs.size() + 1);
  eq_rhs(eq_rhs.size() - 1) = rhs;
}

void SocProgram::validate() const {
  if (num_vars < 1) throw InvalidArgument("program needs at least one variable");
  if (objective.size() != num_vars) throw InvalidArgument("objective length mismatch");
  if (eq_matrix.cols() != num_vars || eq_matrix.rows() != eq_rhs.size())
    throw InvalidArgument("equality dimensions mismatch");
  for (const auto& k : cones) {
    if (k.a.cols() != num_vars || k.c.size() != num_vars || k.a.rows() != k.b.size())
      throw InvalidArgument("cone dimensions mismatch");
    if (!k.a.allFinite() || !k.b.allFinite() || !k.c.allFinite() || !std::isfinite(k.d))
      throw InvalidArgument("cone data must be finite");
  }
  if (cones.empty() && objective.squaredNorm() > 0.0)
    throw InvalidArgument("program has no cone constraints and a nonzero objective");
}

double SocProgram::max_violation(const VectorXd& x) const {
  double worst = 0.0;
  for (const auto& k : cones) worst = std::max(worst, k.violation(x));
  if (eq_matrix.rows() > 0) worst = std::max(worst, (eq_matrix * x - eq_rhs).cwiseAbs().maxCoeff());
  return worst;
}

RealAffine complex_to_real_embedding(const MatrixXcd& map, const VectorXcd& offset, int extra_cols) {
  if (map.rows() != offset.size()) throw InvalidArgument("affine map/offset size mismatch");
  const Eigen::Index r = map.rows();
  const Eigen::Index d = map.cols();
  RealAffine out;
  out.a = MatrixXd::Zero(2 * r, 2 * d + extra_cols);
  out.a.block(0, 0, r, d) = map.real();
  out.a.block(0, d, r, d) = -map.imag();
  out.a.block(r, 0, r, d) = map.imag();
  out.a.block(r, d, r, d) = map.real();
  out.b.resize(2 * r);
  out.b << offset.real(), offset.imag();
  return out;
}

VectorXd real_functional(const VectorXcd& a, int extra_cols) {
  VectorXd r = VectorXd::Zero(2 * a.size() + extra_cols);
  r.head(a.size()) = a.real();
  r.segment(a.size(), a.size()) = a.imag();
  return r;
}

VectorXd to_real(const VectorXcd& w) {
  VectorXd x(2 * w.size());
  x << w.real(), w.imag();
  return x;
}

VectorXcd to_complex(const VectorXd& x, Eigen::Index complex_dim) {
  if (x.size() < 2 * complex_dim) throw InvalidArgument("real vector too short");
  VectorXcd w(complex_dim);
  for (Eigen::Index i = 0; i < complex_dim; ++i) w(i) = cdouble(x(i), x(complex_dim + i));
  return w;
}

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "OPTIMAL";
    case SolveStatus::Inaccurate: return "OPTIMAL_INACCURATE";
    case SolveStatus::PrimalInfeasible: return "PRIMAL_INFEASIBLE";
    case SolveStatus::DualInfeasible: return "DUAL_INFEASIBLE";
    case SolveStatus::MaxIterations: return "MAX_ITERATIONS";
    case SolveStatus::NumericalTrouble: return "NUMERICAL_TROUBLE";
  }
  return "UNKNOWN";
}

// ---------------------------------------------------------------------------
// Interior-point machinery

namespace {

struct Block {
  Eigen::Index offset;
  Eigen::Index dim;
  MatrixXd gram;  // G_i^T G_i
};

// Nesterov-Todd scaling of one cone: W = eta * (-J + u u^T / (1 + w0)),
// W^{-1} = (1 / eta) * (-J + v v^T / (1 + w0)), u = (w0 + 1, w1), v = (w0 + 1, -w1).
struct Scaling {
  double eta = 1.0;
  double w0 = 1.0;
  VectorXd u;
  VectorXd v;
};

double soc_det(const Eigen::Ref<const VectorXd>& x) {
  const double t = x.tail(x.size() - 1).norm();
  return (x(0) - t) * (x(0) + t);
}

Scaling identity_scaling(Eigen::Index dim) {
  Scaling s;
  s.u = VectorXd::Zero(dim);
  s.u(0) = 2.0;
  s.v = s.u;
  return s;
}

Scaling nt_scaling(const Eigen::Ref<const VectorXd>& s, const Eigen::Ref<const VectorXd>& z) {
  const double sdet = std::sqrt(soc_det(s));
  const double zdet = std::sqrt(soc_det(z));
  const VectorXd sb = s / sdet;
  VectorXd jzb = z / zdet;
  jzb.tail(jzb.size() - 1) *= -1.0;
  const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(z / zdet)));
  const VectorXd wb = (sb + jzb) / (2.0 * gamma);
  Scaling sc;
  sc.eta = std::sqrt(sdet / zdet);
  sc.w0 = std::sqrt(1.0 + wb.tail(wb.size() - 1).squaredNorm());
  sc.u = wb;
  sc.u(0) = sc.w0 + 1.0;
  sc.v = -sc.u;
  sc.v(0) = sc.w0 + 1.0;
  return sc;
}

VectorXd neg_j(const Eigen::Ref<const VectorXd>& x) {
  VectorXd y = x;
  y(0) = -x(0);
  return y;
}

VectorXd apply_w(const Scaling& sc, const Eigen::Ref<const VectorXd>& x) {
  return sc.eta * (neg_j(x) + sc.u * (sc.u.dot(x) / (1.0 + sc.w0)));
}

VectorXd apply_winv(const Scaling& sc, const Eigen::Ref<const VectorXd>& x) {
  return (neg_j(x) + sc.v * (sc.v.dot(x) / (1.0 + sc.w0))) / sc.eta;
}

VectorXd jordan(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b) {
  VectorXd out(a.size());
  out(0) = a.dot(b);
  const auto n = a.size() - 1;
  out.tail(n) = a(0) * b.tail(n) + b(0) * a.tail(n);
  return out;
}

VectorXd jordan_div(const Eigen::Ref<const VectorXd>& lambda, const Eigen::Ref<const VectorXd>& w) {
  const auto n = lambda.size() - 1;
  VectorXd out(lambda.size());
  out(0) = (lambda(0) * w(0) - lambda.tail(n).dot(w.tail(n))) / soc_det(lambda);
  out.tail(n) = (w.tail(n) - out(0) * lambda.tail(n)) / lambda(0);
  return out;
}

// Largest alpha with x + alpha d in the cone (x interior); +inf if unbounded.
double max_cone_step(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& d) {
  const auto n = x.size() - 1;
  if (n == 0) return d(0) >= 0.0 ? std::numeric_limits<double>::infinity() : -x(0) / d(0);
  if (d(0) >= d.tail(n).norm()) return std::numeric_limits<double>::infinity();
  const double a = d(0) * d(0) - d.tail(n).squaredNorm();
  const double b = x(0) * d(0) - x.tail(n).dot(d.tail(n));
  const double c = std::max(soc_det(x), 0.0);
  const double disc = std::max(b * b - a * c, 0.0);
  const double denom = -b + std::sqrt(disc);
  if (denom <= 0.0) return 0.0;
  return c / denom;
}

class Engine {
 public:
  Engine(const SocProgram& p, const SolverOptions& opt) : prog_(p), opt_(opt) {
    n_ = p.num_vars;
    p_ = p.eq_matrix.rows();
    m_ = 0;
    for (const auto& k : p.cones) m_ += k.a.rows() + 1;
    g_ = MatrixXd::Zero(m_, n_);
    h_ = VectorXd::Zero(m_);
    Eigen::Index off = 0;
    for (const auto& k : p.cones) {
      const Eigen::Index q = k.a.rows() + 1;
      g_.row(off) = -k.c.transpose();
      h_(off) = k.d;
      g_.block(off + 1, 0, q - 1, n_) = -k.a;
      h_.segment(off + 1, q - 1) = k.b;
      blocks_.push_back({off, q, MatrixXd()});
      off += q;
    }
    for (auto& b : blocks_) {
      const auto gi = g_.middleRows(b.offset, b.dim);
      b.gram = gi.transpose() * gi;
    }
    a_ = p.eq_matrix;
    beq_ = p.eq_rhs;
    c_ = p.objective;
  }

  SolveResult run();

 private:
  void factor(const std::vector<Scaling>& sc);
  // Solves K [dx; dy; dz] = [r1; r2; r3] with K = [0 A^T G^T; A 0 0; G 0 -W^2].
  void solve_kkt(const std::vector<Scaling>& sc, const VectorXd& r1, const VectorXd& r2, const VectorXd& r3,
                 VectorXd& dx, VectorXd& dy, VectorXd& dz) const;
  void solve_reduced(const std::vector<Scaling>& sc, const VectorXd& r1, const VectorXd& r2, const VectorXd& r3,
                     VectorXd& dx, VectorXd& dy, VectorXd& dz) const;
  VectorXd apply_w2(const std::vector<Scaling>& sc, const VectorXd& x) const;
  VectorXd apply_winv2(const std::vector<Scaling>& sc, const VectorXd& x) const;
  bool interior(const VectorXd& x) const;
  double max_step(const VectorXd& x, const VectorXd& dx) const;
  void shift_into_cone(VectorXd& x) const;

  const SocProgram& prog_;
  SolverOptions opt_;
  Eigen::Index n_ = 0, p_ = 0, m_ = 0;
  MatrixXd g_;
  VectorXd h_;
  MatrixXd a_;
  VectorXd beq_;
  VectorXd c_;
  std::vector<Block> blocks_;

  Eigen::LDLT<MatrixXd> ldlt_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

VectorXd Engine::apply_w2(const std::vector<Scaling>& sc, const VectorXd& x) const {
  VectorXd out(x.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    out.segment(b.offset, b.dim) = apply_w(sc[i], apply_w(sc[i], x.segment(b.offset, b.dim)));
  }
  return out;
}

VectorXd Engine::apply_winv2(const std::vector<Scaling>& sc, const VectorXd& x) const {
  VectorXd out(x.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    out.segment(b.offset, b.dim) = apply_winv(sc[i], apply_winv(sc[i], x.segment(b.offset, b.dim)));
  }
  return out;
}

void Engine::factor(const std::vector<Scaling>& sc) {
  // G^T W^-2 G = sum_i (1/eta^2) [G_i^T G_i - c a^T - a c^T + |v|^2 a a^T],
  // a = G_i^T v / (1 + w0), c = G_i^T J v. The low-rank parts are gathered
  // into one product [a c ...] [(|v|^2 a - c) (-a) ...]^T.
  const Eigen::Index nb = static_cast<Eigen::Index>(blocks_.size());
  MatrixXd hess = MatrixXd::Zero(n_, n_);
  MatrixXd left(n_, 2 * nb);
  MatrixXd right(n_, 2 * nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    const auto& b = blocks_[i];
    const auto& s = sc[i];
    const auto gi = g_.middleRows(b.offset, b.dim);
    MatrixXd vj(b.dim, 2);
    vj.col(0) = s.v / (1.0 + s.w0);
    vj.col(1) = -s.v;
    vj(0, 1) = s.v(0);
    const MatrixXd ac = gi.transpose() * vj;
    const double inv = 1.0 / (s.eta * s.eta);
    hess += inv * b.gram;
    left.col(2 * i) = ac.col(0);
    left.col(2 * i + 1) = ac.col(1);
    right.col(2 * i) = inv * (s.v.squaredNorm() * ac.col(0) - ac.col(1));
    right.col(2 * i + 1) = -inv * ac.col(0);
  }
  hess.noalias() += left * right.transpose();
  hess = 0.5 * (hess + hess.transpose()).eval();
  const double reg = 1e-13 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
  if (p_ == 0) {
    hess.diagonal().array() += reg;
    ldlt_.compute(hess);
  } else {
    MatrixXd kkt = MatrixXd::Zero(n_ + p_, n_ + p_);
    kkt.topLeftCorner(n_, n_) = hess;
    kkt.diagonal().head(n_).array() += reg;
    kkt.topRightCorner(n_, p_) = a_.transpose();
    kkt.bottomLeftCorner(p_, n_) = a_;
    kkt.diagonal().tail(p_).array() -= reg;
    lu_.compute(kkt);
  }
}

void Engine::solve_reduced(const std::vector<Scaling>& sc, const VectorXd& r1, const VectorXd& r2,
                           const VectorXd& r3, VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
  const VectorXd t = apply_winv2(sc, r3);
  const VectorXd rx = r1 + g_.transpose() * t;
  if (p_ == 0) {
    dx = ldlt_.solve(rx);
    dy.resize(0);
  } else {
    VectorXd rhs(n_ + p_);
    rhs << rx, r2;
    const VectorXd sol = lu_.solve(rhs);
    dx = sol.head(n_);
    dy = sol.tail(p_);
  }
  dz = apply_winv2(sc, g_ * dx) - t;
}

void Engine::solve_kkt(const std::vector<Scaling>& sc, const VectorXd& r1, const VectorXd& r2, const VectorXd& r3,
                       VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
  solve_reduced(sc, r1, r2, r3, dx, dy, dz);
  // Iterative refinement against the unreduced system.
  for (int it = 0; it < 3; ++it) {
    VectorXd e1 = r1 - g_.transpose() * dz;
    if (p_ > 0) e1 -= a_.transpose() * dy;
    const VectorXd e2 = p_ > 0 ? VectorXd(r2 - a_ * dx) : VectorXd(0);
    const VectorXd e3 = r3 - (g_ * dx - apply_w2(sc, dz));
    const double err = std::max({e1.lpNorm<Eigen::Infinity>(), e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                 e3.lpNorm<Eigen::Infinity>()});
    const double scale = 1.0 + std::max({r1.lpNorm<Eigen::Infinity>(), r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                         r3.lpNorm<Eigen::Infinity>()});
    if (err <= 1e-14 * scale) break;
    VectorXd cx, cy, cz;
    solve_reduced(sc, e1, e2, e3, cx, cy, cz);
    dx += cx;
    if (p_ > 0) dy += cy;
    dz += cz;
  }
}

bool Engine::interior(const VectorXd& x) const {
  for (const auto& b : blocks_) {
    const auto xi = x.segment(b.offset, b.dim);
    if (!(xi(0) > xi.tail(b.dim - 1).norm())) return false;
  }
  return true;
}

double Engine::max_step(const VectorXd& x, const VectorXd& dx) const {
  double alpha = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks_)
    alpha = std::min(alpha, max_cone_step(x.segment(b.offset, b.dim), dx.segment(b.offset, b.dim)));
  return alpha;
}

void Engine::shift_into_cone(VectorXd& x) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : blocks_) {
    const auto xi = x.segment(b.offset, b.dim);
    worst = std::max(worst, xi.tail(b.dim - 1).norm() - xi(0));
  }
  if (worst >= 0.0) {
    for (const auto& b : blocks_) x(b.offset) += 1.0 + worst;
  }
}

SolveResult Engine::run() {
  SolveResult res;
  const int num_cones = static_cast<int>(blocks_.size());

  if (num_cones == 0) {
    // Only equalities (objective is zero by validation): any solution works.
    res.x = p_ > 0 ? VectorXd(a_.completeOrthogonalDecomposition().solve(beq_)) : VectorXd::Zero(n_);
    res.primal_residual = p_ > 0 ? (a_ * res.x - beq_).norm() : 0.0;
    res.status = res.primal_residual <= opt_.tol * std::max(1.0, beq_.norm()) ? SolveStatus::Optimal
                                                                               : SolveStatus::PrimalInfeasible;
    res.max_violation = prog_.max_violation(res.x);
    return res;
  }

  std::vector<Scaling> sc;
  for (const auto& b : blocks_) sc.push_back(identity_scaling(b.dim));
  factor(sc);

  VectorXd x, y, z, s, tmp_x, tmp_y;
  // Primal start: minimize |s| subject to Gx + s = h, Ax = b.
  solve_kkt(sc, VectorXd::Zero(n_), beq_, h_, x, y, s);
  s = -s;
  shift_into_cone(s);
  // Dual start: minimize |z| subject to G^T z + A^T y + c = 0.
  solve_kkt(sc, -c_, VectorXd::Zero(p_), VectorXd::Zero(m_), tmp_x, y, z);
  shift_into_cone(z);
  double tau = 1.0;
  double kappa = 1.0;

  const double bnorm = std::max({1.0, beq_.size() ? beq_.norm() : 0.0, h_.norm()});
  const double cnorm = std::max(1.0, c_.norm());
  std::ostringstream diag;
  SolveResult best;
  double best_merit = std::numeric_limits<double>::infinity();
  int best_iter = 0;

  auto e_vec = [&]() {
    VectorXd e = VectorXd::Zero(m_);
    for (const auto& b : blocks_) e(b.offset) = 1.0;
    return e;
  }();

  for (int iter = 0; iter <= opt_.max_iters; ++iter) {
    res.iterations = iter;
    // Residuals of the homogeneous embedding.
    const VectorXd gz = g_.transpose() * z;
    const VectorXd ay = p_ > 0 ? VectorXd(a_.transpose() * y) : VectorXd::Zero(n_);
    const VectorXd rx = gz + ay + c_ * tau;
    const VectorXd ry = p_ > 0 ? VectorXd(-a_ * x + beq_ * tau) : VectorXd(0);
    const VectorXd rz = -g_ * x + h_ * tau - s;
    const double by = p_ > 0 ? beq_.dot(y) : 0.0;
    const double rt = -c_.dot(x) - by - h_.dot(z) - kappa;

    const double pcost = c_.dot(x) / tau;
    const double dcost = -(h_.dot(z) + by) / tau;
    const double gap = s.dot(z) / (tau * tau);
    const double pres = std::max(ry.size() ? ry.norm() : 0.0, rz.norm()) / tau / bnorm;
    const double dres = rx.norm() / tau / std::max({cnorm, gz.norm() / tau, ay.norm() / tau});
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0) relgap = gap / -pcost;
    else if (dcost > 0.0) relgap = gap / dcost;

    res.x = x / tau;
    res.eq_duals = p_ > 0 ? VectorXd(y / tau) : VectorXd(0);
    res.cone_duals = z / tau;
    res.objective = pcost;
    res.primal_residual = pres;
    res.dual_residual = dres;
    res.gap = gap;
    res.relative_gap = relgap;

    if (!x.allFinite() || !z.allFinite() || !s.allFinite() || !std::isfinite(tau)) {
      res.status = SolveStatus::NumericalTrouble;
      diag << "non-finite iterate at iteration " << iter;
      break;
    }
    if (pres <= opt_.tol && dres <= opt_.tol && (gap <= opt_.tol || relgap <= opt_.tol)) {
      res.status = SolveStatus::Optimal;
      break;
    }
    const double merit = std::max({pres, dres, std::min(gap, relgap)});
    if (pres <= opt_.tol && merit < best_merit) {
      best_merit = merit;
      best = res;
      best_iter = iter;
    }
    if (best_merit <= opt_.inaccurate_tol && iter - best_iter >= 5) {
      res.status = SolveStatus::NumericalTrouble;
      diag << "no progress since iteration " << best_iter << "; pres=" << pres << " dres=" << dres << " gap=" << gap;
      break;
    }
    // Infeasibility certificates.
    const double hz_by = h_.dot(z) + by;
    if (hz_by < 0.0) {
      VectorXd cert = g_.transpose() * z;
      if (p_ > 0) cert += a_.transpose() * y;
      if (cert.norm() / -hz_by <= opt_.tol) {
        res.status = SolveStatus::PrimalInfeasible;
        res.eq_duals = p_ > 0 ? VectorXd(y / -hz_by) : VectorXd(0);
        res.cone_duals = z / -hz_by;
        diag << "primal infeasibility certificate: |G^T z + A^T y| / -(h^T z + b^T y) = " << cert.norm() / -hz_by;
        break;
      }
    }
    const double cx = c_.dot(x);
    if (cx < 0.0) {
      const double r = std::max(p_ > 0 ? (a_ * x).norm() : 0.0, (g_ * x + s).norm()) / -cx;
      if (r <= opt_.tol) {
        res.status = SolveStatus::DualInfeasible;
        res.x = x / -cx;
        diag << "dual infeasibility certificate: unbounded direction residual " << r;
        break;
      }
    }
    if (iter == opt_.max_iters) {
      res.status = SolveStatus::MaxIterations;
      diag << "iteration limit; pres=" << pres << " dres=" << dres << " gap=" << gap;
      break;
    }

    // Scaling at the current point.
    VectorXd lambda(m_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& b = blocks_[i];
      sc[i] = nt_scaling(s.segment(b.offset, b.dim), z.segment(b.offset, b.dim));
      lambda.segment(b.offset, b.dim) = apply_w(sc[i], z.segment(b.offset, b.dim));
    }
    factor(sc);
    const double mu = (s.dot(z) + tau * kappa) / (num_cones + 1);

    VectorXd x1, y1, z1;
    solve_kkt(sc, -c_, beq_, h_, x1, y1, z1);
    const double den_base = c_.dot(x1) + (p_ > 0 ? beq_.dot(y1) : 0.0) + h_.dot(z1);

    auto direction = [&](double eta, const VectorXd& ds_rhs, double dk_rhs, VectorXd& dx, VectorXd& dy, VectorXd& dz,
                         double& dtau, VectorXd& ds, double& dkappa) {
      VectorXd lam_div(m_), w_lam_div(m_);
      for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        lam_div.segment(b.offset, b.dim) = jordan_div(lambda.segment(b.offset, b.dim), ds_rhs.segment(b.offset, b.dim));
        w_lam_div.segment(b.offset, b.dim) = apply_w(sc[i], lam_div.segment(b.offset, b.dim));
      }
      VectorXd x2, y2, z2;
      solve_kkt(sc, -eta * rx, eta * ry, eta * rz - w_lam_div, x2, y2, z2);
      const double num = -eta * rt + dk_rhs / tau + c_.dot(x2) + (p_ > 0 ? beq_.dot(y2) : 0.0) + h_.dot(z2);
      const double den = kappa / tau - den_base;
      dtau = num / den;
      dx = x2 + dtau * x1;
      dy = p_ > 0 ? VectorXd(y2 + dtau * y1) : VectorXd(0);
      dz = z2 + dtau * z1;
      ds = w_lam_div - apply_w2(sc, dz);
      dkappa = (dk_rhs - kappa * dtau) / tau;
    };

    auto step_to_boundary = [&](const VectorXd& ds, const VectorXd& dz, double dtau, double dkappa) {
      double a = std::min(max_step(s, ds), max_step(z, dz));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Affine (predictor) direction.
    VectorXd ds_rhs(m_);
    for (const auto& b : blocks_) {
      const auto lam = lambda.segment(b.offset, b.dim);
      ds_rhs.segment(b.offset, b.dim) = -jordan(lam, lam);
    }
    VectorXd dxa, dya, dza, dsa;
    double dtaua = 0.0, dkappaa = 0.0;
    direction(1.0, ds_rhs, -tau * kappa, dxa, dya, dza, dtaua, dsa, dkappaa);
    const double alpha_aff = std::min(1.0, step_to_boundary(dsa, dza, dtaua, dkappaa));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // Combined (corrector) direction.
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& b = blocks_[i];
      const VectorXd wds = apply_winv(sc[i], dsa.segment(b.offset, b.dim));
      const VectorXd wdz = apply_w(sc[i], dza.segment(b.offset, b.dim));
      ds_rhs.segment(b.offset, b.dim) -= jordan(wds, wdz);
    }
    ds_rhs += sigma * mu * e_vec;
    const double dk_rhs = -tau * kappa - dtaua * dkappaa + sigma * mu;
    VectorXd dx, dy, dz, ds;
    double dtau = 0.0, dkappa = 0.0;
    direction(1.0 - sigma, ds_rhs, dk_rhs, dx, dy, dz, dtau, ds, dkappa);
    double alpha = std::min(1.0, opt_.step_fraction * step_to_boundary(ds, dz, dtau, dkappa));
    // Rounding can push a near-boundary step just outside; back off until it is interior.
    bool moved = false;
    while (alpha > 1e-14) {
      const VectorXd s_new = s + alpha * ds;
      const VectorXd z_new = z + alpha * dz;
      const double tau_new = tau + alpha * dtau;
      const double kappa_new = kappa + alpha * dkappa;
      if (interior(s_new) && interior(z_new) && tau_new > 0.0 && kappa_new > 0.0) {
        x += alpha * dx;
        if (p_ > 0) y += alpha * dy;
        s = s_new;
        z = z_new;
        tau = tau_new;
        kappa = kappa_new;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      res.status = SolveStatus::NumericalTrouble;
      diag << "step length collapsed at iteration " << iter << "; pres=" << pres << " dres=" << dres
           << " gap=" << gap;
      break;
    }
  }

  if ((res.status == SolveStatus::MaxIterations || res.status == SolveStatus::NumericalTrouble) &&
      best_merit <= opt_.inaccurate_tol) {
    diag << "; returning the best iterate (" << best.iterations << ")";
    const int iters = res.iterations;
    res = best;
    res.iterations = iters;
    res.status = SolveStatus::Inaccurate;
  }
  res.max_violation = prog_.max_violation(res.x);
  if (res.usable()) {
    const double allowed = 10.0 * opt_.tol * bnorm * std::max(1.0, res.x.norm());
    if (res.max_violation > allowed) {
      res.status = SolveStatus::NumericalTrouble;
      diag << "solution fails the feasibility recheck: violation " << res.max_violation;
    }
  }
  res.diagnostics = diag.str();
  return res;
}

}  // namespace

SolveResult solve(const SocProgram& program, const SolverOptions& options) {
  program.validate();
  Engine engine(program, options);
  return engine.run();
}

void write_cbf(const SocProgram& program, std::ostream& out) {
  program.validate();
  const int n = program.num_vars;
  Eigen::Index rows = 0;
  for (const auto& k : program.cones) rows += k.a.rows() + 1;
  const Eigen::Index p = program.eq_matrix.rows();

  out << "VER\n3\n\nOBJSENSE\nMIN\n\nVAR\n" << n << " 1\nF " << n << "\n\n";
  out << "CON\n" << rows + p << ' ' << program.cones.size() + (p > 0 ? 1 : 0) << '\n';
  for (const auto& k : program.cones) out << "Q " << k.a.rows() + 1 << '\n';
  if (p > 0) out << "L= " << p << '\n';
  out << '\n';

  std::ostringstream obj;
  obj.precision(17);
  int obj_nnz = 0;
  for (int j = 0; j < n; ++j) {
    if (program.objective(j) != 0.0) {
      obj << j << ' ' << program.objective(j) << '\n';
      ++obj_nnz;
    }
  }
  out.precision(17);
  out << "OBJACOORD\n" << obj_nnz << '\n' << obj.str() << '\n';

  std::ostringstream acoord, bcoord;
  acoord.precision(17);
  bcoord.precision(17);
  int annz = 0, bnnz = 0;
  Eigen::Index row = 0;
  for (const auto& k : program.cones) {
    for (int j = 0; j < n; ++j)
      if (k.c(j) != 0.0) { acoord << row << ' ' << j << ' ' << k.c(j) << '\n'; ++annz; }
    if (k.d != 0.0) { bcoord << row << ' ' << k.d << '\n'; ++bnnz; }
    ++row;
    for (Eigen::Index i = 0; i < k.a.rows(); ++i, ++row) {
      for (int j = 0; j < n; ++j)
        if (k.a(i, j) != 0.0) { acoord << row << ' ' << j << ' ' << k.a(i, j) << '\n'; ++annz; }
      if (k.b(i) != 0.0) { bcoord << row << ' ' << k.b(i) << '\n'; ++bnnz; }
    }
  }
  for (Eigen::Index i = 0; i < p; ++i, ++row) {
    for (int j = 0; j < n; ++j)
      if (program.eq_matrix(i, j) != 0.0) { acoord << row << ' ' << j << ' ' << program.eq_matrix(i, j) << '\n'; ++annz; }
    if (program.eq_rhs(i) != 0.0) { bcoord << row << ' ' << -program.eq_rhs(i) << '\n'; ++bnnz; }
  }
  out << "ACOORD\n" << annz << '\n' << acoord.str() << '\n';
  out << "BCOORD\n" << bnnz << '\n' << bcoord.str();
}

}  // namespace dfrc::socp
