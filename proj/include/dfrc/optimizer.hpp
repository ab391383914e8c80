// SPDX-License-Identifier: Apache-2.0
//
// Joint transmit beamformer / receive filter design. The radar objective is
// the output SINR (T0 w)^H A(w)^{-1} (T0 w); it is maximized by
// majorization-minimization with one conic subproblem per iteration.

#pragma once

#include "dfrc/comm_channel.hpp"
#include "dfrc/common.hpp"
#include "dfrc/lifting.hpp"
#include "dfrc/socp.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dfrc {

/// How the per-subcarrier power budget enters the SINR-balancing start point.
enum class InitPowerReading {
  PerSlot,  // ||W_n||_F^2 <= P_n / L
  Literal,  // L ||W_n||_F^2 <= P_n / L
};

struct OptimizerConfig {
  double comm_sinr_threshold = 10.0;          // Gamma_c, linear
  std::vector<double> per_subcarrier_power;   // P_n, linear
  double noise_radar = 0.1;                   // sigma_r^2
  double convergence_tol = 1e-4;
  int max_iters = 100;
  double surrogate_ridge = 1e-12;  // delta relative to trace(U) / dim
  double balancing_tol_db = 0.01;
  double solver_tol = 1e-8;
  bool radar_only = false;  // drop the communication constraints
  InitPowerReading init_power = InitPowerReading::PerSlot;

  void validate(int num_subcarriers) const;
};

// -- Radar objective ----------------------------------------------------------

/// A(w) = sum_i T_i w w^H T_i^H + sigma_r^2 I.
MatrixXcd clutter_noise_matrix(const VectorXcd& w, const LiftedOperators& ops, double noise_radar);

/// A(w)^{-1} T0 w normalized so that w_r^H T0 w = 1. Throws DegenerateDesign
/// when T0 w = 0.
VectorXcd optimal_receive_filter(const VectorXcd& w, const LiftedOperators& ops, double noise_radar);

/// |w_r^H T0 w|^2 / (w_r^H A(w) w_r).
double radar_sinr(const VectorXcd& w, const VectorXcd& w_r, const LiftedOperators& ops, double noise_radar);

/// (T0 w)^H A(w)^{-1} (T0 w), the SINR of the optimal filter; 0 when T0 w = 0.
double optimal_radar_sinr(const VectorXcd& w, const LiftedOperators& ops, double noise_radar);

/// Convex quadratic upper bound of -SINR(w) touching it at w_t:
///   w^H U w - Re(b^H w) + constant.
struct Surrogate {
  MatrixXcd u;
  VectorXcd b;
  double constant = 0.0;

  double value(const VectorXcd& w) const;
};

Surrogate surrogate_params(const VectorXcd& w_t, const LiftedOperators& ops, double noise_radar);

// -- Constraints --------------------------------------------------------------

/// SINR of every (subcarrier, user) pair, N x K.
MatrixXd comm_sinr_matrix(const BeamformerSet& w, const FreqChannel& channel);

/// sum_l ||W_n s_n[l]||^2 per subcarrier.
VectorXd realized_power(const BeamformerSet& w, const SymbolFrame& symbols);

/// Largest relative violation of the communication and power constraints
/// (0 when feasible).
double max_constraint_violation(const BeamformerSet& w, const FreqChannel& channel, const SymbolFrame& symbols,
                                const OptimizerConfig& cfg);

// -- Conic steps --------------------------------------------------------------

struct SubproblemResult {
  socp::SolveStatus status = socp::SolveStatus::NumericalTrouble;
  VectorXcd w;
  double surrogate_value = 0.0;
  std::string diagnostics;
};

/// Minimizes the surrogate under the communication and power constraints.
/// Each SINR constraint is written as a cone after rotating user k's beam so
/// that h^H w_k has the phase it has at `w_t`; w_t is therefore feasible.
SubproblemResult solve_subproblem(const Surrogate& surrogate, const VectorXcd& w_t, const FreqChannel& channel,
                                  const SymbolFrame& symbols, const OptimizerConfig& cfg);

/// Writes the subproblem as a standalone conic program (for external solvers).
socp::SocProgram subproblem_program(const Surrogate& surrogate, const VectorXcd& w_t, const FreqChannel& channel,
                                    const SymbolFrame& symbols, const OptimizerConfig& cfg, double& scale_w);

struct BalancedBeamformer {
  MatrixXcd w;       // N_t x K
  VectorXd sinr;     // per user
  double min_sinr = 0.0;
  int bottleneck_user = 0;
};

/// Max-min SINR beamformer of one subcarrier with ||W||_F^2 <= power_bound,
/// found by bisection (in dB) over power-minimization feasibility problems.
/// The result meets the power bound with equality.
BalancedBeamformer balance_sinr(const std::vector<VectorXcd>& channels, double noise_power, double power_bound,
                                double tol_db, double solver_tol = 1e-8);

/// Minimum of sum_l ||W s_l||^2 subject to every user meeting `threshold`.
/// Returns false when the requirement is infeasible.
bool min_power_beamformer(const std::vector<VectorXcd>& channels, double noise_power, const MatrixXcd& symbols,
                          double threshold, double solver_tol, MatrixXcd& out);

struct InitResult {
  BeamformerSet w;
  std::vector<double> balanced_sinr_db;  // per subcarrier, before projection
  std::vector<bool> restored;            // restoration step used on subcarrier n
};

/// Feasible start point: SINR balancing per subcarrier, scaled to the realized
/// symbol power budget, with a power-minimization fallback when the scaled
/// point misses the SINR requirement. Throws InfeasibleDesign otherwise.
InitResult initialize(const FreqChannel& channel, const SymbolFrame& symbols, const OptimizerConfig& cfg);

// -- Algorithm loop ------------------------------------------------------------

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;      // -SINR_r
  double max_violation = 0.0;  // relative constraint violation
};

struct DesignResult {
  VectorXcd w;
  BeamformerSet beamformers;
  VectorXcd receive_filter;
  double radar_sinr = 0.0;
  double radar_sinr_db = -std::numeric_limits<double>::infinity();
  MatrixXd comm_sinr;  // N x K, linear
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  int rejected_steps = 0;
  std::vector<IterationRecord> trace;
  std::string note;

  double min_comm_sinr_db() const;
};

using TraceCallback = std::function<void(const IterationRecord&)>;

/// Full design: initialization, MM iterations until the relative step is below
/// the tolerance (or max_iters), then the optimal receive filter.
DesignResult run_design(const LiftedOperators& ops, const FreqChannel& channel, const SymbolFrame& symbols,
                        const OptimizerConfig& cfg, const TraceCallback& on_iteration = {});

}  // namespace dfrc
