// SPDX-License-Identifier: Apache-2.0

#include "dfrc/optimizer.hpp"

#include "dfrc/kernels.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace dfrc {

void OptimizerConfig::validate(int num_subcarriers) const {
  if (!(comm_sinr_threshold > 0.0) || !std::isfinite(comm_sinr_threshold))
    throw InvalidArgument("communication SINR threshold must be positive");
  if (static_cast<int>(per_subcarrier_power.size()) != num_subcarriers)
    throw InvalidArgument("need one power budget per subcarrier");
  for (double p : per_subcarrier_power)
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("power budgets must be positive");
  if (!(noise_radar > 0.0)) throw InvalidArgument("radar noise power must be positive");
  if (!(convergence_tol > 0.0)) throw InvalidArgument("convergence tolerance must be positive");
  if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  if (!(surrogate_ridge >= 0.0)) throw InvalidArgument("surrogate ridge must be nonnegative");
  if (!(balancing_tol_db > 0.0)) throw InvalidArgument("balancing tolerance must be positive");
  if (!(solver_tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
}

// ---------------------------------------------------------------------------
// Radar objective

MatrixXcd clutter_noise_matrix(const VectorXcd& w, const LiftedOperators& ops, double noise_radar) {
  if (ops.clutter.empty())
    return MatrixXcd::Identity(ops.echo_size(), ops.echo_size()) * noise_radar;
  return kernels::gram(kernels::clutter_returns(ops, w), noise_radar);
}

VectorXcd optimal_receive_filter(const VectorXcd& w, const LiftedOperators& ops, double noise_radar) {
  const VectorXcd x = ops.t0 * w;
  if (x.squaredNorm() == 0.0) throw DegenerateDesign("no target return: T0 w = 0");
  const VectorXcd g = clutter_noise_matrix(w, ops, noise_radar).llt().solve(x);
  return g / x.dot(g);  // x^H g is real and positive
}

double radar_sinr(const VectorXcd& w, const VectorXcd& w_r, const LiftedOperators& ops, double noise_radar) {
  const cdouble num = w_r.dot(ops.t0 * w);
  const double den = w_r.dot(clutter_noise_matrix(w, ops, noise_radar) * w_r).real();
  return std::norm(num) / den;
}

double optimal_radar_sinr(const VectorXcd& w, const LiftedOperators& ops, double noise_radar) {
  const VectorXcd x = ops.t0 * w;
  if (x.squaredNorm() == 0.0) return 0.0;
  const VectorXcd g = clutter_noise_matrix(w, ops, noise_radar).llt().solve(x);
  return std::max(0.0, x.dot(g).real());
}

namespace {

// x = T0 w and g = A(w)^{-1} x share one factorization of A(w).
struct RadarPoint {
  VectorXcd g;
  double sinr = 0.0;
};

RadarPoint radar_point(const VectorXcd& w, const LiftedOperators& ops, double noise_radar) {
  RadarPoint p;
  const VectorXcd x = ops.t0 * w;
  p.g = clutter_noise_matrix(w, ops, noise_radar).llt().solve(x);
  p.sinr = x.squaredNorm() == 0.0 ? 0.0 : std::max(0.0, x.dot(p.g).real());
  return p;
}

Surrogate surrogate_from_filter(const VectorXcd& g, const LiftedOperators& ops, double noise_radar) {
  Surrogate s;
  if (ops.clutter.empty()) {
    s.u = MatrixXcd::Zero(ops.beamformer_size(), ops.beamformer_size());
  } else {
    s.u = kernels::gram(kernels::clutter_backprojections(ops, g), 0.0);
    s.u = (0.5 * (s.u + s.u.adjoint())).eval();
  }
  s.b = 2.0 * (ops.t0.adjoint() * g);
  s.constant = noise_radar * g.squaredNorm();
  return s;
}

}  // namespace

double Surrogate::value(const VectorXcd& w) const {
  return w.dot(u * w).real() - b.dot(w).real() + constant;
}

Surrogate surrogate_params(const VectorXcd& w_t, const LiftedOperators& ops, double noise_radar) {
  return surrogate_from_filter(radar_point(w_t, ops, noise_radar).g, ops, noise_radar);
}

// ---------------------------------------------------------------------------
// Constraints

MatrixXd comm_sinr_matrix(const BeamformerSet& w, const FreqChannel& channel) {
  const int n_sub = channel.num_subcarriers();
  const int k_users = channel.num_users();
  if (w.num_subcarriers() != n_sub) throw InvalidArgument("beamformer and channel subcarrier counts differ");
  MatrixXd out(n_sub, k_users);
  for (int n = 0; n < n_sub; ++n)
    for (int k = 0; k < k_users; ++k)
      out(n, k) = comm_sinr(w.per_subcarrier[n], channel.h[n][k], k, channel.noise_power);
  return out;
}

VectorXd realized_power(const BeamformerSet& w, const SymbolFrame& symbols) {
  if (w.num_subcarriers() != symbols.num_subcarriers()) throw InvalidArgument("symbol frame size mismatch");
  VectorXd p(w.num_subcarriers());
  for (int n = 0; n < w.num_subcarriers(); ++n)
    p(n) = (w.per_subcarrier[n] * symbols.per_subcarrier[n]).squaredNorm();
  return p;
}

double max_constraint_violation(const BeamformerSet& w, const FreqChannel& channel, const SymbolFrame& symbols,
                                const OptimizerConfig& cfg) {
  double worst = 0.0;
  if (!cfg.radar_only) {
    const MatrixXd sinr = comm_sinr_matrix(w, channel);
    worst = std::max(worst, (cfg.comm_sinr_threshold - sinr.minCoeff()) / cfg.comm_sinr_threshold);
  }
  const VectorXd p = realized_power(w, symbols);
  for (int n = 0; n < p.size(); ++n)
    worst = std::max(worst, (p(n) - cfg.per_subcarrier_power[n]) / cfg.per_subcarrier_power[n]);
  return worst;
}

// ---------------------------------------------------------------------------
// Conic building blocks

namespace {

struct Layout {
  int num_subcarriers;
  int num_users;
  int num_tx;
  int size() const { return num_subcarriers * num_users * num_tx; }
  int index(int n, int k, int t) const { return (n * num_users + k) * num_tx + t; }
};

Layout layout_of(const FreqChannel& channel, const SymbolFrame& symbols) {
  if (channel.num_subcarriers() < 1 || channel.num_users() < 1) throw InvalidArgument("empty channel");
  if (symbols.num_subcarriers() != channel.num_subcarriers() || symbols.num_users() != channel.num_users())
    throw InvalidArgument("symbol frame does not match the channel");
  return {channel.num_subcarriers(), channel.num_users(), static_cast<int>(channel.h[0][0].size())};
}

// || [h^H W_n, sigma / scale] || <= sqrt(1 + 1/gamma) Re(e^{-j phi} h^H w_{n,k}) over w / scale.
socp::SocConstraint comm_cone(const Layout& lay, int n, int k, const std::vector<VectorXcd>& h_n, double sigma,
                              double gamma, double phase, double scale, int extra_cols) {
  MatrixXcd f = MatrixXcd::Zero(lay.num_users, lay.size());
  const VectorXcd& h = h_n[k];
  for (int j = 0; j < lay.num_users; ++j)
    for (int t = 0; t < lay.num_tx; ++t) f(j, lay.index(n, j, t)) = std::conj(h(t));
  const auto emb = socp::complex_to_real_embedding(f, VectorXcd::Zero(lay.num_users), extra_cols);
  socp::SocConstraint c;
  c.a = MatrixXd::Zero(emb.a.rows() + 1, emb.a.cols());
  c.a.topRows(emb.a.rows()) = emb.a;
  c.b = VectorXd::Zero(emb.b.size() + 1);
  c.b(emb.b.size()) = sigma / scale;
  VectorXcd a = VectorXcd::Zero(lay.size());
  const cdouble rot = std::polar(1.0, phase);
  for (int t = 0; t < lay.num_tx; ++t) a(lay.index(n, k, t)) = rot * h(t);
  c.c = std::sqrt(1.0 + 1.0 / gamma) * socp::real_functional(a, extra_cols);
  c.d = 0.0;
  return c;
}

// Same norm as (S_n^T (x) I) vec(W_n), with S_n^T replaced by the R factor of
// its QR decomposition: rows (r, t), r < min(L, K).
MatrixXcd symbol_power_map(const Layout& lay, int n, const MatrixXcd& s) {
  const Eigen::HouseholderQR<MatrixXcd> qr(s.transpose());
  const Eigen::Index rank = std::min(s.rows(), s.cols());
  const MatrixXcd r = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
  MatrixXcd m = MatrixXcd::Zero(rank * lay.num_tx, lay.size());
  for (Eigen::Index i = 0; i < rank; ++i)
    for (int k = 0; k < lay.num_users; ++k)
      for (int t = 0; t < lay.num_tx; ++t) m(i * lay.num_tx + t, lay.index(n, k, t)) = r(i, k);
  return m;
}

socp::SocConstraint power_cone(const MatrixXcd& map, double bound, double scale, int extra_cols) {
  const auto emb = socp::complex_to_real_embedding(map, VectorXcd::Zero(map.rows()), extra_cols);
  socp::SocConstraint c;
  c.a = emb.a;
  c.b = emb.b;
  c.c = VectorXd::Zero(emb.a.cols());
  c.d = std::sqrt(bound) / scale;
  return c;
}

}  // namespace

socp::SocProgram subproblem_program(const Surrogate& surrogate, const VectorXcd& w_t, const FreqChannel& channel,
                                    const SymbolFrame& symbols, const OptimizerConfig& cfg, double& scale_w) {
  const Layout lay = layout_of(channel, symbols);
  const int d = lay.size();
  if (w_t.size() != d || surrogate.u.rows() != d || surrogate.b.size() != d)
    throw InvalidArgument("subproblem dimensions mismatch");
  cfg.validate(lay.num_subcarriers);

  double total_power = 0.0;
  for (double p : cfg.per_subcarrier_power) total_power += p;
  const double rho = std::sqrt(total_power / symbols.frame_length());
  scale_w = rho;

  const Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(surrogate.u);
  const VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const double trace = lambda.sum();
  const bool epigraph = trace > 0.0;
  const double ridge = cfg.surrogate_ridge * trace / d;
  const double quad_scale = epigraph ? rho * rho * (lambda.maxCoeff() + ridge) : 0.0;
  double obj_scale = std::max(quad_scale, rho * surrogate.b.norm());
  if (!(obj_scale > 0.0)) obj_scale = 1.0;

  const int extra = epigraph ? 1 : 0;
  socp::SocProgram prog(2 * d + extra);
  prog.objective.head(2 * d) = -(rho / obj_scale) * socp::real_functional(surrogate.b);
  if (epigraph) {
    prog.objective(2 * d) = 1.0;
    const VectorXd sq = (lambda.array() + ridge).sqrt();
    const MatrixXcd c_mat = (rho / std::sqrt(obj_scale)) * (sq.asDiagonal() * eig.eigenvectors().adjoint());
    const auto emb = socp::complex_to_real_embedding(c_mat, VectorXcd::Zero(d), 1);
    // ||C w||^2 <= tau  <=>  ||[2 C w; tau - 1]|| <= tau + 1
    socp::SocConstraint epi;
    epi.a = MatrixXd::Zero(2 * d + 1, 2 * d + 1);
    epi.a.topRows(2 * d) = 2.0 * emb.a;
    epi.a(2 * d, 2 * d) = 1.0;
    epi.b = VectorXd::Zero(2 * d + 1);
    epi.b(2 * d) = -1.0;
    epi.c = VectorXd::Zero(2 * d + 1);
    epi.c(2 * d) = 1.0;
    epi.d = 1.0;
    prog.add_cone(std::move(epi));
  }

  const double sigma = std::sqrt(channel.noise_power);
  if (!cfg.radar_only) {
    for (int n = 0; n < lay.num_subcarriers; ++n) {
      const MatrixXcd wn = Eigen::Map<const MatrixXcd>(w_t.data() + lay.index(n, 0, 0), lay.num_tx, lay.num_users);
      for (int k = 0; k < lay.num_users; ++k) {
        const cdouble z = channel.h[n][k].dot(wn.col(k));
        const double phase = std::abs(z) > 0.0 ? std::arg(z) : 0.0;
        prog.add_cone(comm_cone(lay, n, k, channel.h[n], sigma, cfg.comm_sinr_threshold, phase, rho, extra));
      }
    }
  }
  for (int n = 0; n < lay.num_subcarriers; ++n)
    prog.add_cone(power_cone(symbol_power_map(lay, n, symbols.per_subcarrier[n]), cfg.per_subcarrier_power[n], rho,
                             extra));
  return prog;
}

SubproblemResult solve_subproblem(const Surrogate& surrogate, const VectorXcd& w_t, const FreqChannel& channel,
                                  const SymbolFrame& symbols, const OptimizerConfig& cfg) {
  double rho = 1.0;
  const auto prog = subproblem_program(surrogate, w_t, channel, symbols, cfg, rho);
  socp::SolverOptions opt;
  opt.tol = cfg.solver_tol;
  const auto sol = socp::solve(prog, opt);
  SubproblemResult out;
  out.status = sol.status;
  out.diagnostics = sol.diagnostics;
  out.w = rho * socp::to_complex(sol.x, w_t.size());
  out.surrogate_value = surrogate.value(out.w);
  return out;
}

bool min_power_beamformer(const std::vector<VectorXcd>& channels, double noise_power, const MatrixXcd& symbols,
                          double threshold, double solver_tol, MatrixXcd& out) {
  if (channels.empty()) throw InvalidArgument("no users");
  const Layout lay{1, static_cast<int>(channels.size()), static_cast<int>(channels[0].size())};
  if (symbols.rows() != lay.num_users) throw InvalidArgument("symbol rows must equal the user count");
  double min_gain = std::numeric_limits<double>::infinity();
  for (const auto& h : channels) min_gain = std::min(min_gain, h.squaredNorm());
  if (!(min_gain > 0.0)) return false;
  const double rho = std::sqrt(lay.num_users * threshold * noise_power / min_gain);

  const int d = lay.size();
  socp::SocProgram prog(2 * d + 1);
  prog.objective(2 * d) = 1.0;
  auto metric = power_cone(symbol_power_map(lay, 0, symbols), 1.0, rho, 1);
  metric.c(2 * d) = 1.0;
  metric.d = 0.0;
  prog.add_cone(std::move(metric));
  const double sigma = std::sqrt(noise_power);
  for (int k = 0; k < lay.num_users; ++k) {
    prog.add_cone(comm_cone(lay, 0, k, channels, sigma, threshold, 0.0, rho, 1));
    // Im(h^H w_k) = 0
    VectorXd row = VectorXd::Zero(2 * d + 1);
    for (int t = 0; t < lay.num_tx; ++t) {
      row(lay.index(0, k, t)) = -channels[k](t).imag();
      row(d + lay.index(0, k, t)) = channels[k](t).real();
    }
    prog.add_equality(row, 0.0);
  }
  socp::SolverOptions opt;
  opt.tol = solver_tol;
  const auto sol = socp::solve(prog, opt);
  if (sol.status == socp::SolveStatus::PrimalInfeasible) return false;
  out = rho * Eigen::Map<const MatrixXcd>(socp::to_complex(sol.x, d).data(), lay.num_tx, lay.num_users);
  if (!sol.optimal()) {
    // Accept an inexact answer only if it actually meets the requirement.
    for (int k = 0; k < lay.num_users; ++k)
      if (comm_sinr(out, channels[k], k, noise_power) < threshold * (1.0 - 1e-6)) {
        spdlog::debug("power minimization ended with {}: {}", socp::status_name(sol.status), sol.diagnostics);
        return false;
      }
  }
  return true;
}

BalancedBeamformer balance_sinr(const std::vector<VectorXcd>& channels, double noise_power, double power_bound,
                                double tol_db, double solver_tol) {
  if (channels.empty()) throw InvalidArgument("no users");
  if (!(power_bound > 0.0) || !(noise_power > 0.0)) throw InvalidArgument("power and noise must be positive");
  const int k_users = static_cast<int>(channels.size());
  const MatrixXcd frobenius = MatrixXcd::Identity(k_users, k_users);

  double best_gain = std::numeric_limits<double>::infinity();
  for (const auto& h : channels) best_gain = std::min(best_gain, h.squaredNorm());
  if (!(best_gain > 0.0)) throw InvalidArgument("a user has an all-zero channel");
  double hi_db = linear_to_db(power_bound * best_gain / noise_power);
  double lo_db = hi_db - 60.0;

  MatrixXcd w_lo;
  auto feasible = [&](double gamma_db, MatrixXcd& w) {
    if (!min_power_beamformer(channels, noise_power, frobenius, db_to_linear(gamma_db), solver_tol, w)) return false;
    return w.squaredNorm() <= power_bound * (1.0 + 1e-9);
  };
  int guard = 0;
  while (!feasible(lo_db, w_lo)) {
    hi_db = lo_db;
    lo_db -= 60.0;
    if (++guard > 4) throw InvalidArgument("SINR balancing found no feasible point (rank-deficient channels?)");
  }
  MatrixXcd w_mid;
  if (feasible(hi_db, w_mid)) {
    lo_db = hi_db;
    w_lo = w_mid;
  }
  while (hi_db - lo_db > tol_db) {
    const double mid = 0.5 * (lo_db + hi_db);
    if (feasible(mid, w_mid)) {
      lo_db = mid;
      w_lo = w_mid;
    } else {
      hi_db = mid;
    }
  }

  BalancedBeamformer out;
  out.w = w_lo * std::sqrt(power_bound / w_lo.squaredNorm());
  out.sinr.resize(k_users);
  for (int k = 0; k < k_users; ++k) out.sinr(k) = comm_sinr(out.w, channels[k], k, noise_power);
  Eigen::Index arg = 0;
  out.min_sinr = out.sinr.minCoeff(&arg);
  out.bottleneck_user = static_cast<int>(arg);
  return out;
}

InitResult initialize(const FreqChannel& channel, const SymbolFrame& symbols, const OptimizerConfig& cfg) {
  const Layout lay = layout_of(channel, symbols);
  cfg.validate(lay.num_subcarriers);
  const int len = symbols.frame_length();
  InitResult res;
  for (int n = 0; n < lay.num_subcarriers; ++n) {
    const double budget = cfg.per_subcarrier_power[n];
    const double bound = cfg.init_power == InitPowerReading::PerSlot ? budget / len : budget / (len * len);
    const auto bal = balance_sinr(channel.h[n], channel.noise_power, bound, cfg.balancing_tol_db, cfg.solver_tol);
    res.balanced_sinr_db.push_back(linear_to_db(bal.min_sinr));

    const MatrixXcd& s = symbols.per_subcarrier[n];
    MatrixXcd w = bal.w * std::sqrt(budget / (bal.w * s).squaredNorm());
    bool restored = false;
    if (!cfg.radar_only) {
      double worst = std::numeric_limits<double>::infinity();
      for (int k = 0; k < lay.num_users; ++k)
        worst = std::min(worst, comm_sinr(w, channel.h[n][k], k, channel.noise_power));
      if (worst < cfg.comm_sinr_threshold) {
        MatrixXcd wr;
        const bool ok = min_power_beamformer(channel.h[n], channel.noise_power, s, cfg.comm_sinr_threshold * (1.0 + 1e-6),
                                             cfg.solver_tol, wr);
        if (!ok || (wr * s).squaredNorm() > budget) {
          throw InfeasibleDesign("communication SINR requirement of " + std::to_string(linear_to_db(cfg.comm_sinr_threshold)) +
                                     " dB is infeasible on subcarrier " + std::to_string(n) + " (user " +
                                     std::to_string(bal.bottleneck_user) + " limits the balanced SINR to " +
                                     std::to_string(linear_to_db(bal.min_sinr)) + " dB)",
                                 n, bal.bottleneck_user, linear_to_db(bal.min_sinr));
        }
        w = wr * std::sqrt(budget / (wr * s).squaredNorm());
        restored = true;
        spdlog::debug("subcarrier {}: balanced start missed the requirement; used power-minimizing start", n);
      }
    }
    res.restored.push_back(restored);
    res.w.per_subcarrier.push_back(w);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Algorithm loop

double DesignResult::min_comm_sinr_db() const {
  if (comm_sinr.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return linear_to_db(comm_sinr.minCoeff());
}

DesignResult run_design(const LiftedOperators& ops, const FreqChannel& channel, const SymbolFrame& symbols,
                        const OptimizerConfig& cfg, const TraceCallback& on_iteration) {
  const Layout lay = layout_of(channel, symbols);
  cfg.validate(lay.num_subcarriers);
  if (ops.beamformer_size() != lay.size() || ops.dims.num_subcarriers != lay.num_subcarriers)
    throw InvalidArgument("lifted operators do not match the channel");

  DesignResult res;
  const auto init = initialize(channel, symbols, cfg);
  VectorXcd w = init.w.stacked();
  auto finish = [&](const VectorXcd& wf) {
    res.w = wf;
    res.beamformers = BeamformerSet::from_stacked(wf, lay.num_subcarriers, lay.num_tx, lay.num_users);
    res.comm_sinr = comm_sinr_matrix(res.beamformers, channel);
    res.radar_sinr = optimal_radar_sinr(wf, ops, cfg.noise_radar);
    res.radar_sinr_db = res.radar_sinr > 0.0 ? linear_to_db(res.radar_sinr) : -std::numeric_limits<double>::infinity();
    if (res.radar_sinr > 0.0) res.receive_filter = optimal_receive_filter(wf, ops, cfg.noise_radar);
  };

  RadarPoint point = radar_point(w, ops, cfg.noise_radar);
  double sinr = point.sinr;
  if (!(sinr > 0.0)) {
    res.degenerate = true;
    res.note = ops.t0.squaredNorm() == 0.0 ? "no target return (zero target power)" : "start point nulls the target";
    spdlog::warn("degenerate design: {}", res.note);
    finish(w);
    return res;
  }

  auto record = [&](int iter) {
    IterationRecord r{iter, -sinr, max_constraint_violation(
                                       BeamformerSet::from_stacked(w, lay.num_subcarriers, lay.num_tx, lay.num_users),
                                       channel, symbols, cfg)};
    res.trace.push_back(r);
    if (on_iteration) on_iteration(r);
  };
  record(0);

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Surrogate sur = surrogate_from_filter(point.g, ops, cfg.noise_radar);
    const auto sub = solve_subproblem(sur, w, channel, symbols, cfg);
    if (sub.status == socp::SolveStatus::Inaccurate)
      spdlog::debug("iteration {}: subproblem solved to reduced accuracy: {}", iter, sub.diagnostics);
    if (sub.status != socp::SolveStatus::Optimal && sub.status != socp::SolveStatus::Inaccurate) {
      res.note = "subproblem " + socp::status_name(sub.status) + " at iteration " + std::to_string(iter);
      spdlog::warn("{}: {}", res.note, sub.diagnostics);
      break;
    }
    RadarPoint cand = radar_point(sub.w, ops, cfg.noise_radar);
    const double next = cand.sinr;
    const double step = (sub.w - w).norm() / w.norm();
    if (next < sinr) {
      // Only inexact subproblem solutions can do this; keep the better point.
      ++res.rejected_steps;
      res.converged = next >= sinr * (1.0 - 1e-7) || step <= cfg.convergence_tol;
      res.note = "stopped at iteration " + std::to_string(iter) + ": step would decrease the radar SINR";
      spdlog::debug("{} ({} -> {})", res.note, sinr, next);
      break;
    }
    w = sub.w;
    sinr = next;
    point = std::move(cand);
    res.iterations = iter;
    record(iter);
    if (step <= cfg.convergence_tol) {
      res.converged = true;
      break;
    }
  }
  finish(w);
  return res;
}

}  // namespace dfrc
