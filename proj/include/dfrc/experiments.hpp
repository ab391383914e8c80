// SPDX-License-Identifier: Apache-2.0
//
// Seeded Monte Carlo sweeps and the single-design report.
//
// Jobs are independent (config, trial) units with seeds derived from the base
// seed and the trial index, so results do not depend on the worker count or
// on the order in which jobs finish.

#pragma once

#include "dfrc/scenario.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dfrc {

struct RunOptions {
  int jobs = 1;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
};

/// One (sweep point, scheme, trial) outcome.
struct SweepRow {
  std::string experiment;  // "subcarriers" or "tradeoff"
  double total_power_db = 0.0;
  double comm_sinr_db = 0.0;
  int num_subcarriers = 0;
  std::string scheme;  // "joint", "sets", "radar_only"
  int num_sets = 1;
  int trial = 0;
  std::string status;  // ok, infeasible, degenerate, error
  double radar_sinr_db = 0.0;           // mean over subcarrier sets
  double best_set_radar_sinr_db = 0.0;  // best subcarrier set
  double min_comm_sinr_db = 0.0;
  int iterations = 0;
  bool converged = false;
  double max_power_ratio = 0.0;  // realized / budget, worst subcarrier
  bool mm_monotone = true;       // radar SINR never decreased along the trace
  double wall_time_s = 0.0;  // informational; not written to CSV
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

SweepResult run_subcarrier_sweep(const ScenarioConfig& cfg, const RunOptions& opt = {});
SweepResult run_tradeoff_sweep(const ScenarioConfig& cfg, const RunOptions& opt = {});

/// Columns: experiment,total_power_db,comm_sinr_db,num_subcarriers,scheme,
/// num_sets,trial,status,radar_sinr_db,best_set_radar_sinr_db,
/// min_comm_sinr_db,iterations,converged,max_power_ratio,mm_monotone
void write_sweep_csv(const SweepResult& result, std::ostream& out);

/// Per (point, scheme) statistics over trials with status "ok".
struct SummaryRow {
  std::string experiment;
  double total_power_db = 0.0;
  double comm_sinr_db = 0.0;
  int num_subcarriers = 0;
  std::string scheme;
  int num_sets = 1;
  int trials_ok = 0;
  int trials_total = 0;
  double mean_radar_sinr_db = 0.0;
  double se_radar_sinr_db = 0.0;
  double mean_best_set_radar_sinr_db = 0.0;
  double se_best_set_radar_sinr_db = 0.0;
};

std::vector<SummaryRow> summarize(const SweepResult& result, Averaging averaging);
void write_summary_csv(const std::vector<SummaryRow>& summary, std::ostream& out);

/// Analytic design plus an echo-level Monte Carlo estimate of the output SINR
/// through the designed receive filter.
struct SingleReport {
  std::uint64_t trial_seed = 0;
  DesignResult design;
  double analytic_sinr = 0.0;
  double empirical_sinr = 0.0;
  double empirical_se = 0.0;
  int draws = 0;
  bool consistent = false;  // |empirical - analytic| <= 3 standard errors
  double min_comm_sinr_db = 0.0;
  double worst_power_ratio = 0.0;  // max_n realized / budget
};

/// Echo-level estimate for a given design: `draws` clutter-plus-noise samples.
void echo_monte_carlo(const ProblemInstance& inst, const DesignResult& design, int draws, std::uint64_t seed,
                      SingleReport& report);

SingleReport run_single(const ScenarioConfig& cfg, const RunOptions& opt = {});

nlohmann::json single_report_json(const SingleReport& r);

}  // namespace dfrc
