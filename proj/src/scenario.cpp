// SPDX-License-Identifier: Apache-2.0

#include "dfrc/scenario.hpp"

#include <nlohmann/json.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <ostream>
#include <set>

namespace dfrc {

namespace {

using nlohmann::json;

constexpr std::uint64_t kTrialStream = 0x54524941;    // "TRIA"
constexpr std::uint64_t kChannelStream = 0x4348414e;  // "CHAN"
constexpr std::uint64_t kClutterStream = 0x434c5554;  // "CLUT"
constexpr std::uint64_t kSymbolStream = 0x53594d42;   // "SYMB"

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw InvalidArgument(section + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + section);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::pair<double, double> read_range(const json& j, const char* key, std::pair<double, double> dflt) {
  if (!j.contains(key)) return dflt;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) throw InvalidArgument(std::string(key) + " must be [min, max]");
  return {r[0].get<double>(), r[1].get<double>()};
}

json complex_json(cdouble z) { return json::array({z.real(), z.imag()}); }

json vector_json(const VectorXcd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(complex_json(v(i)));
  return a;
}

json matrix_json(const MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

std::string amplitude_model_name(ClutterAmplitudeModel m) {
  return m == ClutterAmplitudeModel::Flat ? "flat" : "per_subcarrier";
}

}  // namespace

void ScenarioConfig::validate() const {
  grid.validate();
  if (grid.first_subcarrier != 0) throw InvalidArgument("scenario grid must start at subcarrier 0");
  array.validate();
  if (num_users < 1) throw InvalidArgument("need at least one user");
  if (channel.num_taps < 1) throw InvalidArgument("channel needs at least one tap");
  if (channel.num_taps > grid.num_subcarriers)
    throw InvalidArgument("channel taps exceed the subcarrier count of the band");
  if (clutter.max_offset < 0 || clutter.patches_per_cell < 0) throw InvalidArgument("bad clutter field size");
  if (clutter.azimuth_max_deg < clutter.azimuth_min_deg || clutter.speed_max_m_s < clutter.speed_min_m_s)
    throw InvalidArgument("clutter ranges must be [min, max] with min <= max");
  if (power_per_subcarrier_db.has_value() == total_power_db.has_value())
    throw InvalidArgument("set exactly one of power_per_subcarrier_db and total_power_db");
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (echo_draws < 2) throw InvalidArgument("echo_draws must be >= 2");
  for (int n : subcarrier_sweep.subcarrier_counts)
    if (n < 1) throw InvalidArgument("subcarrier counts must be >= 1");
  for (int p : tradeoff_sweep.partitions)
    if (p < 1) throw InvalidArgument("partition counts must be >= 1");
  optimizer_config(grid.num_subcarriers).validate(grid.num_subcarriers);
}

OptimizerConfig ScenarioConfig::optimizer_config(int num_subcarriers) const {
  OptimizerConfig o = optimizer;
  o.comm_sinr_threshold = db_to_linear(comm_sinr_db);
  o.noise_radar = db_to_linear(radar_noise_db);
  const double pn = power_per_subcarrier_db ? db_to_linear(*power_per_subcarrier_db)
                                            : db_to_linear(total_power_db.value_or(0.0)) / grid.num_subcarriers;
  o.per_subcarrier_power.assign(num_subcarriers, pn);
  return o;
}

ScenarioConfig parse_scenario(const json& j) {
  check_keys(j, {"grid", "array", "users", "constellation", "target", "clutter", "channel", "radar_noise_db",
                 "optimizer", "seed", "experiment"},
             "scenario");
  ScenarioConfig cfg;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, {"carrier_freq_hz", "subcarrier_spacing_hz", "symbol_duration_s", "cp_duration_s",
                   "num_subcarriers", "frame_length", "samples_per_symbol", "wave_speed_m_s"},
               "grid");
    read(g, "carrier_freq_hz", cfg.grid.carrier_freq_hz);
    read(g, "subcarrier_spacing_hz", cfg.grid.subcarrier_spacing_hz);
    read(g, "symbol_duration_s", cfg.grid.symbol_duration_s);
    read(g, "cp_duration_s", cfg.grid.cp_duration_s);
    read(g, "num_subcarriers", cfg.grid.num_subcarriers);
    read(g, "frame_length", cfg.grid.frame_length);
    read(g, "samples_per_symbol", cfg.grid.samples_per_symbol);
    read(g, "wave_speed_m_s", cfg.grid.wave_speed_m_s);
  }
  const double wavelength = cfg.grid.wave_speed_m_s / cfg.grid.carrier_freq_hz;
  cfg.array.tx_spacing_m = 0.5 * wavelength;
  cfg.array.rx_spacing_m = 0.5 * wavelength;
  if (j.contains("array")) {
    const auto& a = j.at("array");
    check_keys(a, {"num_tx", "num_rx", "tx_spacing_m", "rx_spacing_m", "tx_spacing_wavelengths",
                   "rx_spacing_wavelengths"},
               "array");
    read(a, "num_tx", cfg.array.num_tx);
    read(a, "num_rx", cfg.array.num_rx);
    if (a.contains("tx_spacing_m") && a.contains("tx_spacing_wavelengths"))
      throw InvalidArgument("give the transmit spacing once");
    if (a.contains("rx_spacing_m") && a.contains("rx_spacing_wavelengths"))
      throw InvalidArgument("give the receive spacing once");
    read(a, "tx_spacing_m", cfg.array.tx_spacing_m);
    read(a, "rx_spacing_m", cfg.array.rx_spacing_m);
    if (a.contains("tx_spacing_wavelengths")) cfg.array.tx_spacing_m = a.at("tx_spacing_wavelengths").get<double>() * wavelength;
    if (a.contains("rx_spacing_wavelengths")) cfg.array.rx_spacing_m = a.at("rx_spacing_wavelengths").get<double>() * wavelength;
  }
  read(j, "users", cfg.num_users);
  if (j.contains("constellation")) cfg.constellation = parse_constellation(j.at("constellation").get<std::string>());
  if (j.contains("target")) {
    const auto& t = j.at("target");
    check_keys(t, {"azimuth_deg", "speed_m_s", "power_db"}, "target");
    read(t, "azimuth_deg", cfg.target.azimuth_deg);
    read(t, "speed_m_s", cfg.target.speed_m_s);
    if (t.contains("power_db")) {
      cfg.target.power_db = t.at("power_db").is_null() ? -std::numeric_limits<double>::infinity()
                                                        : t.at("power_db").get<double>();
    }
  }
  cfg.clutter.power = db_to_linear(-10.0);
  if (j.contains("clutter")) {
    const auto& c = j.at("clutter");
    check_keys(c, {"max_offset", "patches_per_cell", "azimuth_deg", "speed_m_s", "power_db", "amplitude_model",
                   "dense_ccm_files"},
               "clutter");
    read(c, "max_offset", cfg.clutter.max_offset);
    read(c, "patches_per_cell", cfg.clutter.patches_per_cell);
    std::tie(cfg.clutter.azimuth_min_deg, cfg.clutter.azimuth_max_deg) =
        read_range(c, "azimuth_deg", {cfg.clutter.azimuth_min_deg, cfg.clutter.azimuth_max_deg});
    std::tie(cfg.clutter.speed_min_m_s, cfg.clutter.speed_max_m_s) =
        read_range(c, "speed_m_s", {cfg.clutter.speed_min_m_s, cfg.clutter.speed_max_m_s});
    if (c.contains("power_db")) cfg.clutter.power = db_to_linear(c.at("power_db").get<double>());
    if (c.contains("amplitude_model")) {
      const auto name = c.at("amplitude_model").get<std::string>();
      if (name == "flat") cfg.clutter.amplitude_model = ClutterAmplitudeModel::Flat;
      else if (name == "per_subcarrier") cfg.clutter.amplitude_model = ClutterAmplitudeModel::PerSubcarrier;
      else throw InvalidArgument("amplitude_model must be 'flat' or 'per_subcarrier'");
    }
    if (c.contains("dense_ccm_files"))
      for (const auto& p : c.at("dense_ccm_files")) cfg.dense_ccm_files.emplace_back(p.get<std::string>());
  }
  if (j.contains("channel")) {
    const auto& c = j.at("channel");
    check_keys(c, {"taps", "noise_db"}, "channel");
    read(c, "taps", cfg.channel.num_taps);
    read(c, "noise_db", cfg.channel.noise_db);
  }
  read(j, "radar_noise_db", cfg.radar_noise_db);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o, {"comm_sinr_db", "power_per_subcarrier_db", "total_power_db", "convergence_tol", "max_iters",
                   "surrogate_ridge", "balancing_tol_db", "solver_tol", "init_power", "radar_only"},
               "optimizer");
    read(o, "comm_sinr_db", cfg.comm_sinr_db);
    if (o.contains("power_per_subcarrier_db")) cfg.power_per_subcarrier_db = o.at("power_per_subcarrier_db").get<double>();
    if (o.contains("total_power_db")) {
      cfg.total_power_db = o.at("total_power_db").get<double>();
      if (!o.contains("power_per_subcarrier_db")) cfg.power_per_subcarrier_db.reset();
    }
    read(o, "convergence_tol", cfg.optimizer.convergence_tol);
    read(o, "max_iters", cfg.optimizer.max_iters);
    read(o, "surrogate_ridge", cfg.optimizer.surrogate_ridge);
    read(o, "balancing_tol_db", cfg.optimizer.balancing_tol_db);
    read(o, "solver_tol", cfg.optimizer.solver_tol);
    read(o, "radar_only", cfg.optimizer.radar_only);
    if (o.contains("init_power")) {
      const auto name = o.at("init_power").get<std::string>();
      if (name == "per_slot") cfg.optimizer.init_power = InitPowerReading::PerSlot;
      else if (name == "literal") cfg.optimizer.init_power = InitPowerReading::Literal;
      else throw InvalidArgument("init_power must be 'per_slot' or 'literal'");
    }
  }
  read(j, "seed", cfg.seed);
  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    check_keys(e, {"trials", "averaging", "echo_draws", "subcarrier_sweep", "tradeoff_sweep"}, "experiment");
    read(e, "trials", cfg.trials);
    read(e, "echo_draws", cfg.echo_draws);
    if (e.contains("averaging")) {
      const auto name = e.at("averaging").get<std::string>();
      if (name == "db") cfg.averaging = Averaging::Db;
      else if (name == "linear") cfg.averaging = Averaging::Linear;
      else throw InvalidArgument("averaging must be 'db' or 'linear'");
    }
    if (e.contains("subcarrier_sweep")) {
      const auto& s = e.at("subcarrier_sweep");
      check_keys(s, {"subcarrier_counts", "total_power_db"}, "subcarrier_sweep");
      read(s, "subcarrier_counts", cfg.subcarrier_sweep.subcarrier_counts);
      read(s, "total_power_db", cfg.subcarrier_sweep.total_power_db);
    }
    if (e.contains("tradeoff_sweep")) {
      const auto& s = e.at("tradeoff_sweep");
      check_keys(s, {"comm_sinr_db", "partitions", "radar_only"}, "tradeoff_sweep");
      read(s, "comm_sinr_db", cfg.tradeoff_sweep.comm_sinr_db);
      read(s, "partitions", cfg.tradeoff_sweep.partitions);
      read(s, "radar_only", cfg.tradeoff_sweep.radar_only);
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  return parse_scenario(j);
}

json scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  const auto& g = cfg.grid;
  j["grid"] = {{"carrier_freq_hz", g.carrier_freq_hz}, {"subcarrier_spacing_hz", g.subcarrier_spacing_hz},
               {"symbol_duration_s", g.symbol_duration_s}, {"cp_duration_s", g.cp_duration_s},
               {"num_subcarriers", g.num_subcarriers}, {"frame_length", g.frame_length},
               {"samples_per_symbol", g.samples_per_symbol}, {"wave_speed_m_s", g.wave_speed_m_s}};
  j["array"] = {{"num_tx", cfg.array.num_tx}, {"num_rx", cfg.array.num_rx},
                {"tx_spacing_m", cfg.array.tx_spacing_m}, {"rx_spacing_m", cfg.array.rx_spacing_m}};
  j["users"] = cfg.num_users;
  j["constellation"] = std::string(constellation_name(cfg.constellation));
  j["target"] = {{"azimuth_deg", cfg.target.azimuth_deg}, {"speed_m_s", cfg.target.speed_m_s}};
  j["target"]["power_db"] = std::isfinite(cfg.target.power_db) ? json(cfg.target.power_db) : json(nullptr);
  j["clutter"] = {{"max_offset", cfg.clutter.max_offset},
                  {"patches_per_cell", cfg.clutter.patches_per_cell},
                  {"azimuth_deg", {cfg.clutter.azimuth_min_deg, cfg.clutter.azimuth_max_deg}},
                  {"speed_m_s", {cfg.clutter.speed_min_m_s, cfg.clutter.speed_max_m_s}},
                  {"power_db", linear_to_db(cfg.clutter.power)},
                  {"amplitude_model", amplitude_model_name(cfg.clutter.amplitude_model)}};
  if (!cfg.dense_ccm_files.empty()) {
    json files = json::array();
    for (const auto& p : cfg.dense_ccm_files) files.push_back(p.string());
    j["clutter"]["dense_ccm_files"] = files;
  }
  j["channel"] = {{"taps", cfg.channel.num_taps}, {"noise_db", cfg.channel.noise_db}};
  j["radar_noise_db"] = cfg.radar_noise_db;
  const auto& o = cfg.optimizer;
  j["optimizer"] = {{"comm_sinr_db", cfg.comm_sinr_db},
                    {"convergence_tol", o.convergence_tol},
                    {"max_iters", o.max_iters},
                    {"surrogate_ridge", o.surrogate_ridge},
                    {"balancing_tol_db", o.balancing_tol_db},
                    {"solver_tol", o.solver_tol},
                    {"radar_only", o.radar_only},
                    {"init_power", o.init_power == InitPowerReading::PerSlot ? "per_slot" : "literal"}};
  if (cfg.power_per_subcarrier_db) j["optimizer"]["power_per_subcarrier_db"] = *cfg.power_per_subcarrier_db;
  if (cfg.total_power_db) j["optimizer"]["total_power_db"] = *cfg.total_power_db;
  j["seed"] = cfg.seed;
  j["experiment"] = {{"trials", cfg.trials},
                     {"averaging", cfg.averaging == Averaging::Db ? "db" : "linear"},
                     {"echo_draws", cfg.echo_draws},
                     {"subcarrier_sweep",
                      {{"subcarrier_counts", cfg.subcarrier_sweep.subcarrier_counts},
                       {"total_power_db", cfg.subcarrier_sweep.total_power_db}}},
                     {"tradeoff_sweep",
                      {{"comm_sinr_db", cfg.tradeoff_sweep.comm_sinr_db},
                       {"partitions", cfg.tradeoff_sweep.partitions},
                       {"radar_only", cfg.tradeoff_sweep.radar_only}}}};
  return j;
}

std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return derive_seed(base_seed, kTrialStream, static_cast<std::uint64_t>(trial));
}

Realization draw_realization(const ScenarioConfig& cfg, std::uint64_t seed) {
  Realization r;
  r.trial_seed = seed;
  std::mt19937_64 chan_rng(derive_seed(seed, kChannelStream));
  r.taps = random_tap_channel(cfg.num_users, cfg.channel.num_taps, cfg.array.num_tx, db_to_linear(cfg.channel.noise_db),
                              chan_rng);
  r.channel = dft_response(r.taps, cfg.grid);
  std::mt19937_64 clutter_rng(derive_seed(seed, kClutterStream));
  r.clutter = random_clutter_field(cfg.clutter, cfg.grid.num_subcarriers, clutter_rng);
  r.symbols = generate_symbols(cfg.num_users, cfg.grid, cfg.constellation, derive_seed(seed, kSymbolStream));
  return r;
}

ProblemInstance build_instance(const ScenarioConfig& cfg, const Realization& real, int first, int count) {
  const int full = cfg.grid.num_subcarriers;
  if (first < 0 || count < 1 || first + count > full) throw InvalidArgument("subcarrier set out of range");
  ProblemInstance p;
  p.grid = cfg.grid.subset(first, count);
  p.array = cfg.array;
  p.channel = real.channel.subset(first, count);
  p.symbols = real.symbols.subset(first, count);
  p.clutter = real.clutter.subset(first, count);
  const double target_power = std::isfinite(cfg.target.power_db) ? db_to_linear(cfg.target.power_db) : 0.0;
  p.target = make_target(deg_to_rad(cfg.target.azimuth_deg), cfg.target.speed_m_s, target_power, count);

  InnerCcmFactors factors;
  if (!cfg.dense_ccm_files.empty()) {
    if (first != 0 || count != full) throw InvalidArgument("dense clutter CCMs only apply to the full band");
    for (const auto& path : cfg.dense_ccm_files) factors.push_back(read_dense_ccm_factors(path));
  } else {
    factors = clutter_factors(p.clutter, p.grid, p.array);
  }
  const EchoDims dims = EchoDims::from(p.grid, p.array, cfg.num_users);
  for (const auto& cell : factors)
    for (const auto& u : cell.factors)
      if (u.size() != dims.stacked_signature_size()) throw InvalidArgument("clutter CCM dimension does not match the scene");
  p.ops = build_lifted_operators(stacked_signature(p.target, p.grid, p.array), factors, p.symbols, dims);
  p.optimizer = cfg.optimizer_config(count);
  return p;
}

ProblemInstance build_instance(const ScenarioConfig& cfg, const Realization& real) {
  return build_instance(cfg, real, 0, cfg.grid.num_subcarriers);
}

std::vector<std::pair<int, int>> contiguous_partition(int count, int sets) {
  if (sets < 1 || sets > count) throw InvalidArgument("cannot split " + std::to_string(count) + " subcarriers into " +
                                                      std::to_string(sets) + " sets");
  std::vector<std::pair<int, int>> out;
  int first = 0;
  for (int s = 0; s < sets; ++s) {
    const int size = count / sets + (s < count % sets ? 1 : 0);
    out.emplace_back(first, size);
    first += size;
  }
  return out;
}

json design_to_json(const DesignResult& r) {
  json j;
  j["radar_sinr"] = r.radar_sinr;
  j["radar_sinr_db"] = std::isfinite(r.radar_sinr_db) ? json(r.radar_sinr_db) : json(nullptr);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["degenerate"] = r.degenerate;
  j["rejected_steps"] = r.rejected_steps;
  if (!r.note.empty()) j["note"] = r.note;
  json sinr = json::array();
  for (Eigen::Index n = 0; n < r.comm_sinr.rows(); ++n) {
    json row = json::array();
    for (Eigen::Index k = 0; k < r.comm_sinr.cols(); ++k) row.push_back(linear_to_db(r.comm_sinr(n, k)));
    sinr.push_back(row);
  }
  j["comm_sinr_db"] = sinr;
  j["w"] = vector_json(r.w);
  json bf = json::array();
  for (const auto& w : r.beamformers.per_subcarrier) bf.push_back(matrix_json(w));
  j["beamformers"] = bf;
  j["receive_filter"] = vector_json(r.receive_filter);
  json trace = json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"iter", t.iteration}, {"objective", t.objective}, {"max_violation", t.max_violation}});
  j["trace"] = trace;
  return j;
}

void write_trace_csv(const DesignResult& r, std::ostream& out) {
  out << "iter,objective,max_violation\n";
  for (const auto& t : r.trace) out << fmt::format("{},{:.17g},{:.17g}\n", t.iteration, t.objective, t.max_violation);
}

}  // namespace dfrc
