// SPDX-License-Identifier: Apache-2.0
//
// Scenario configuration (JSON), per-trial random realizations and the
// assembly of a ready-to-optimize problem instance.
//
// Files use dB for every power, degrees for angles and either meters or
// wavelengths (at the carrier) for antenna spacings.

#pragma once

#include "dfrc/comm_channel.hpp"
#include "dfrc/lifting.hpp"
#include "dfrc/optimizer.hpp"
#include "dfrc/radar_scene.hpp"
#include "dfrc/signal_model.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dfrc {

enum class Averaging { Db, Linear };

struct TargetSpec {
  double azimuth_deg = 0.0;
  double speed_m_s = 20.0;
  double power_db = -10.0;
};

struct ChannelSpec {
  int num_taps = 2;
  double noise_db = -20.0;
};

struct SubcarrierSweepSpec {
  std::vector<int> subcarrier_counts{1, 2, 3, 4, 5};
  std::vector<double> total_power_db{20.0, 30.0};
};

struct TradeoffSweepSpec {
  std::vector<double> comm_sinr_db{0.0, 5.0, 10.0, 15.0, 20.0};
  std::vector<int> partitions{1, 2, 4};
  bool radar_only = true;
};

struct ScenarioConfig {
  OfdmGrid grid;
  ArrayGeometry array;
  int num_users = 3;
  Constellation constellation = Constellation::Qpsk;
  TargetSpec target;
  ClutterSpec clutter;
  std::vector<std::filesystem::path> dense_ccm_files;  // replaces the patch field when set
  ChannelSpec channel;
  double radar_noise_db = -10.0;

  // Optimizer knobs; powers as in the file (dB), converted by optimizer_config().
  double comm_sinr_db = 10.0;
  std::optional<double> power_per_subcarrier_db = 21.760912590556813;  // 150 W on every n
  std::optional<double> total_power_db;           // P_n = P_t / N otherwise
  OptimizerConfig optimizer;                      // thresholds/powers filled per run

  std::uint64_t seed = 1;
  int trials = 20;
  Averaging averaging = Averaging::Db;
  int echo_draws = 1000;
  SubcarrierSweepSpec subcarrier_sweep;
  TradeoffSweepSpec tradeoff_sweep;

  /// Throws InvalidArgument on any inconsistency.
  void validate() const;

  /// Optimizer settings for a band of `num_subcarriers` with the configured
  /// threshold and power split.
  OptimizerConfig optimizer_config(int num_subcarriers) const;
};

ScenarioConfig parse_scenario(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

/// Random draws of one trial for the full band. Each component has its own
/// stream so that changing one sweep dimension leaves the others untouched.
struct Realization {
  std::uint64_t trial_seed = 0;
  TapChannel taps;
  FreqChannel channel;
  ClutterField clutter;
  SymbolFrame symbols;
};

std::uint64_t trial_seed(std::uint64_t base_seed, int trial);
Realization draw_realization(const ScenarioConfig& cfg, std::uint64_t trial_seed);

/// Everything the optimizer needs for one band (or one subcarrier set of it).
struct ProblemInstance {
  OfdmGrid grid;
  ArrayGeometry array;
  Scatterer target;
  ClutterField clutter;
  FreqChannel channel;
  SymbolFrame symbols;
  LiftedOperators ops;
  OptimizerConfig optimizer;
};

/// Instance for subcarriers [first, first + count) of the configured band.
ProblemInstance build_instance(const ScenarioConfig& cfg, const Realization& real, int first, int count);
ProblemInstance build_instance(const ScenarioConfig& cfg, const Realization& real);

/// `count` subcarriers split into `sets` contiguous, near-equal blocks:
/// (first, size) pairs.
std::vector<std::pair<int, int>> contiguous_partition(int count, int sets);

nlohmann::json design_to_json(const DesignResult& r);
void write_trace_csv(const DesignResult& r, std::ostream& out);

}  // namespace dfrc
