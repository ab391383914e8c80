// SPDX-License-Identifier: Apache-2.0

#include "dfrc/experiments.hpp"

#include <nlohmann/json.hpp>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <tuple>

namespace dfrc {

namespace {

constexpr std::uint64_t kEchoStream = 0x4543484f;  // "ECHO"
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int effective_trials(const ScenarioConfig& cfg, const RunOptions& opt) { return opt.trials.value_or(cfg.trials); }
std::uint64_t effective_seed(const ScenarioConfig& cfg, const RunOptions& opt) { return opt.seed.value_or(cfg.seed); }

// Runs job(i) for i in [0, count) on `jobs` workers. Each job writes only its
// own output slot.
template <typename Job>
void run_jobs(int count, int jobs, Job&& job) {
  const int workers = std::max(1, jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (int i = 0; i < count; ++i) job(i);
}

double reduce_db(const std::vector<double>& values_db, Averaging averaging) {
  double acc = 0.0;
  for (double v : values_db) acc += averaging == Averaging::Db ? v : db_to_linear(v);
  acc /= static_cast<double>(values_db.size());
  return averaging == Averaging::Db ? acc : linear_to_db(acc);
}

double power_ratio(const DesignResult& res, const ProblemInstance& inst) {
  const VectorXd p = realized_power(res.beamformers, inst.symbols);
  double worst = 0.0;
  for (int n = 0; n < p.size(); ++n) worst = std::max(worst, p(n) / inst.optimizer.per_subcarrier_power[n]);
  return worst;
}

bool trace_monotone(const DesignResult& res) {
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    if (res.trace[i].objective > res.trace[i - 1].objective) return false;
  return true;
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.10g}", v);
}

}  // namespace

SweepResult run_subcarrier_sweep(const ScenarioConfig& cfg, const RunOptions& opt) {
  const int trials = effective_trials(cfg, opt);
  const std::uint64_t seed = effective_seed(cfg, opt);
  const auto& counts = cfg.subcarrier_sweep.subcarrier_counts;
  const auto& powers = cfg.subcarrier_sweep.total_power_db;
  const int jobs_total = static_cast<int>(powers.size() * counts.size()) * trials;
  std::vector<SweepRow> rows(jobs_total);

  run_jobs(jobs_total, opt.jobs, [&](int job) {
    const int trial = job % trials;
    const int ci = (job / trials) % static_cast<int>(counts.size());
    const int pi = job / (trials * static_cast<int>(counts.size()));
    SweepRow& row = rows[job];
    row.experiment = "subcarriers";
    row.total_power_db = powers[pi];
    row.comm_sinr_db = cfg.comm_sinr_db;
    row.num_subcarriers = counts[ci];
    row.scheme = "joint";
    row.trial = trial;
    row.best_set_radar_sinr_db = row.radar_sinr_db = row.min_comm_sinr_db = kNaN;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ScenarioConfig c = cfg;
      c.grid.num_subcarriers = counts[ci];
      c.total_power_db = powers[pi];
      c.power_per_subcarrier_db.reset();
      c.validate();
      const auto real = draw_realization(c, trial_seed(seed, trial));
      const auto inst = build_instance(c, real);
      const auto res = run_design(inst.ops, inst.channel, inst.symbols, inst.optimizer);
      row.status = res.degenerate ? "degenerate" : "ok";
      row.radar_sinr_db = row.best_set_radar_sinr_db = res.radar_sinr_db;
      row.min_comm_sinr_db = res.min_comm_sinr_db();
      row.iterations = res.iterations;
      row.converged = res.converged;
      row.max_power_ratio = power_ratio(res, inst);
      row.mm_monotone = trace_monotone(res);
    } catch (const InfeasibleDesign& e) {
      row.status = "infeasible";
      spdlog::info("N={} P_t={} dB trial {}: {}", counts[ci], powers[pi], trial, e.what());
    } catch (const std::exception& e) {
      row.status = "error";
      spdlog::error("N={} P_t={} dB trial {}: {}", counts[ci], powers[pi], trial, e.what());
    }
    row.wall_time_s = seconds_since(t0);
    spdlog::debug("subcarrier sweep job {} done in {:.2f} s", job, row.wall_time_s);
  });
  return {std::move(rows)};
}

SweepResult run_tradeoff_sweep(const ScenarioConfig& cfg, const RunOptions& opt) {
  const int trials = effective_trials(cfg, opt);
  const std::uint64_t seed = effective_seed(cfg, opt);
  const auto& gammas = cfg.tradeoff_sweep.comm_sinr_db;
  const auto& partitions = cfg.tradeoff_sweep.partitions;
  const int full = cfg.grid.num_subcarriers;
  for (int p : partitions)
    if (p > full) throw InvalidArgument("partition count " + std::to_string(p) + " exceeds the subcarrier count");
  const int schemes = static_cast<int>(partitions.size()) + (cfg.tradeoff_sweep.radar_only ? 1 : 0);
  const int per_trial = static_cast<int>(gammas.size()) * schemes;
  std::vector<SweepRow> rows(static_cast<std::size_t>(per_trial) * trials);

  run_jobs(trials, opt.jobs, [&](int trial) {
    const auto t_trial = std::chrono::steady_clock::now();
    auto slot = [&](int gi, int si) -> SweepRow& { return rows[(trial * gammas.size() + gi) * schemes + si]; };
    for (int gi = 0; gi < static_cast<int>(gammas.size()); ++gi) {
      for (int si = 0; si < schemes; ++si) {
        SweepRow& row = slot(gi, si);
        row.experiment = "tradeoff";
        row.total_power_db = kNaN;
        row.comm_sinr_db = gammas[gi];
        row.num_subcarriers = full;
        row.trial = trial;
        row.status = "error";
        row.best_set_radar_sinr_db = row.radar_sinr_db = row.min_comm_sinr_db = kNaN;
        if (si < static_cast<int>(partitions.size())) {
          row.num_sets = partitions[si];
          row.scheme = partitions[si] == 1 ? "joint" : "sets";
        } else {
          row.num_sets = 1;
          row.scheme = "radar_only";
        }
      }
    }
    try {
      const auto real = draw_realization(cfg, trial_seed(seed, trial));

      if (cfg.tradeoff_sweep.radar_only) {
        const auto t0 = std::chrono::steady_clock::now();
        auto inst = build_instance(cfg, real);
        inst.optimizer.radar_only = true;
        const auto res = run_design(inst.ops, inst.channel, inst.symbols, inst.optimizer);
        const double wall = seconds_since(t0);
        for (int gi = 0; gi < static_cast<int>(gammas.size()); ++gi) {
          SweepRow& row = slot(gi, schemes - 1);
          row.status = res.degenerate ? "degenerate" : "ok";
          row.radar_sinr_db = row.best_set_radar_sinr_db = res.radar_sinr_db;
          row.min_comm_sinr_db = res.min_comm_sinr_db();
          row.iterations = res.iterations;
          row.converged = res.converged;
          row.max_power_ratio = power_ratio(res, inst);
          row.mm_monotone = trace_monotone(res);
          row.wall_time_s = wall;
        }
      }

      for (int si = 0; si < static_cast<int>(partitions.size()); ++si) {
        std::vector<ProblemInstance> sets;
        for (const auto& [first, size] : contiguous_partition(full, partitions[si]))
          sets.push_back(build_instance(cfg, real, first, size));
        for (int gi = 0; gi < static_cast<int>(gammas.size()); ++gi) {
          SweepRow& row = slot(gi, si);
          const auto t0 = std::chrono::steady_clock::now();
          try {
            std::vector<double> set_db;
            double min_comm = std::numeric_limits<double>::infinity();
            bool degenerate = false;
            bool converged = true;
            int iterations = 0;
            double ratio = 0.0;
            bool monotone = true;
            for (auto& inst : sets) {
              inst.optimizer.comm_sinr_threshold = db_to_linear(gammas[gi]);
              const auto res = run_design(inst.ops, inst.channel, inst.symbols, inst.optimizer);
              degenerate = degenerate || res.degenerate;
              converged = converged && res.converged;
              iterations += res.iterations;
              set_db.push_back(res.radar_sinr_db);
              min_comm = std::min(min_comm, res.min_comm_sinr_db());
              ratio = std::max(ratio, power_ratio(res, inst));
              monotone = monotone && trace_monotone(res);
            }
            row.status = degenerate ? "degenerate" : "ok";
            row.radar_sinr_db = reduce_db(set_db, cfg.averaging);
            row.best_set_radar_sinr_db = *std::max_element(set_db.begin(), set_db.end());
            row.min_comm_sinr_db = min_comm;
            row.iterations = iterations;
            row.converged = converged;
            row.max_power_ratio = ratio;
            row.mm_monotone = monotone;
          } catch (const InfeasibleDesign& e) {
            row.status = "infeasible";
            spdlog::info("Gamma={} dB sets={} trial {}: {}", gammas[gi], partitions[si], trial, e.what());
          }
          row.wall_time_s = seconds_since(t0);
        }
      }
    } catch (const std::exception& e) {
      spdlog::error("trade-off trial {}: {}", trial, e.what());
    }
    spdlog::debug("trade-off trial {} done in {:.2f} s", trial, seconds_since(t_trial));
  });
  return {std::move(rows)};
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "experiment,total_power_db,comm_sinr_db,num_subcarriers,scheme,num_sets,trial,status,radar_sinr_db,"
         "best_set_radar_sinr_db,min_comm_sinr_db,iterations,converged,max_power_ratio,mm_monotone\n";
  for (const auto& r : result.rows) {
    out << r.experiment << ',' << fmt_num(r.total_power_db) << ',' << fmt_num(r.comm_sinr_db) << ','
        << r.num_subcarriers << ',' << r.scheme << ',' << r.num_sets << ',' << r.trial << ',' << r.status << ','
        << fmt_num(r.radar_sinr_db) << ',' << fmt_num(r.best_set_radar_sinr_db) << ',' << fmt_num(r.min_comm_sinr_db)
        << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << fmt_num(r.max_power_ratio) << ','
        << (r.mm_monotone ? 1 : 0) << '\n';
  }
}

std::vector<SummaryRow> summarize(const SweepResult& result, Averaging averaging) {
  using Key = std::tuple<std::string, double, double, int, int, std::string>;
  std::map<Key, std::vector<const SweepRow*>> groups;
  std::vector<Key> order;
  for (const auto& r : result.rows) {
    const double p = std::isnan(r.total_power_db) ? -1e300 : r.total_power_db;
    Key k{r.experiment, p, r.comm_sinr_db, r.num_subcarriers, r.num_sets, r.scheme};
    if (!groups.count(k)) order.push_back(k);
    groups[k].push_back(&r);
  }
  auto stats = [&](const std::vector<double>& db, double& mean, double& se) {
    const double n = static_cast<double>(db.size());
    if (db.empty()) {
      mean = se = kNaN;
      return;
    }
    if (averaging == Averaging::Db) {
      double m = 0.0, v = 0.0;
      for (double x : db) m += x;
      m /= n;
      for (double x : db) v += (x - m) * (x - m);
      mean = m;
      se = db.size() > 1 ? std::sqrt(v / (n - 1) / n) : 0.0;
    } else {
      double m = 0.0, v = 0.0;
      for (double x : db) m += db_to_linear(x);
      m /= n;
      for (double x : db) v += (db_to_linear(x) - m) * (db_to_linear(x) - m);
      const double se_lin = db.size() > 1 ? std::sqrt(v / (n - 1) / n) : 0.0;
      mean = linear_to_db(m);
      se = 10.0 / std::log(10.0) * se_lin / m;
    }
  };
  std::vector<SummaryRow> out;
  for (const auto& k : order) {
    const auto& rows = groups[k];
    SummaryRow s;
    s.experiment = rows[0]->experiment;
    s.total_power_db = rows[0]->total_power_db;
    s.comm_sinr_db = rows[0]->comm_sinr_db;
    s.num_subcarriers = rows[0]->num_subcarriers;
    s.scheme = rows[0]->scheme;
    s.num_sets = rows[0]->num_sets;
    s.trials_total = static_cast<int>(rows.size());
    std::vector<double> mean_db, best_db;
    for (const auto* r : rows) {
      if (r->status != "ok") continue;
      mean_db.push_back(r->radar_sinr_db);
      best_db.push_back(r->best_set_radar_sinr_db);
    }
    s.trials_ok = static_cast<int>(mean_db.size());
    stats(mean_db, s.mean_radar_sinr_db, s.se_radar_sinr_db);
    stats(best_db, s.mean_best_set_radar_sinr_db, s.se_best_set_radar_sinr_db);
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(const std::vector<SummaryRow>& summary, std::ostream& out) {
  out << "experiment,total_power_db,comm_sinr_db,num_subcarriers,scheme,num_sets,trials_ok,trials_total,"
         "mean_radar_sinr_db,se_radar_sinr_db,mean_best_set_radar_sinr_db,se_best_set_radar_sinr_db\n";
  for (const auto& s : summary) {
    out << s.experiment << ',' << fmt_num(s.total_power_db) << ',' << fmt_num(s.comm_sinr_db) << ','
        << s.num_subcarriers << ',' << s.scheme << ',' << s.num_sets << ',' << s.trials_ok << ',' << s.trials_total
        << ',' << fmt_num(s.mean_radar_sinr_db) << ',' << fmt_num(s.se_radar_sinr_db) << ','
        << fmt_num(s.mean_best_set_radar_sinr_db) << ',' << fmt_num(s.se_best_set_radar_sinr_db) << '\n';
  }
}

void echo_monte_carlo(const ProblemInstance& inst, const DesignResult& design, int draws, std::uint64_t seed,
                      SingleReport& report) {
  report.analytic_sinr = design.radar_sinr;
  report.draws = draws;
  if (design.degenerate || design.receive_filter.size() == 0) {
    report.empirical_sinr = 0.0;
    report.empirical_se = 0.0;
    report.consistent = design.radar_sinr == 0.0;
    return;
  }
  const EchoSimulator sim(design.beamformers.per_subcarrier, inst.symbols, inst.target, inst.clutter, inst.grid,
                          inst.array, inst.optimizer.noise_radar);
  const VectorXcd& wr = design.receive_filter;
  const double signal = std::norm(wr.dot(sim.target_echo()));
  std::mt19937_64 rng(derive_seed(seed, kEchoStream));
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double p = std::norm(wr.dot(sim.draw_interference(rng)));
    sum += p;
    sum_sq += p * p;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  const double se_mean = std::sqrt(var / n);
  report.empirical_sinr = signal / mean;
  // Delta method: d(s/m) = -(s/m^2) dm.
  report.empirical_se = report.empirical_sinr * se_mean / mean;
  report.consistent = std::abs(report.empirical_sinr - report.analytic_sinr) <= 3.0 * report.empirical_se;
}

SingleReport run_single(const ScenarioConfig& cfg, const RunOptions& opt) {
  SingleReport rep;
  rep.trial_seed = trial_seed(effective_seed(cfg, opt), 0);
  const auto real = draw_realization(cfg, rep.trial_seed);
  const auto inst = build_instance(cfg, real);
  rep.design = run_design(inst.ops, inst.channel, inst.symbols, inst.optimizer);
  rep.min_comm_sinr_db = rep.design.min_comm_sinr_db();
  const VectorXd p = realized_power(rep.design.beamformers, inst.symbols);
  for (int n = 0; n < p.size(); ++n)
    rep.worst_power_ratio = std::max(rep.worst_power_ratio, p(n) / inst.optimizer.per_subcarrier_power[n]);
  echo_monte_carlo(inst, rep.design, cfg.echo_draws, rep.trial_seed, rep);
  return rep;
}

nlohmann::json single_report_json(const SingleReport& r) {
  nlohmann::json j;
  j["trial_seed"] = r.trial_seed;
  j["design"] = design_to_json(r.design);
  j["analytic_radar_sinr"] = r.analytic_sinr;
  j["empirical_radar_sinr"] = r.empirical_sinr;
  j["empirical_standard_error"] = r.empirical_se;
  j["echo_draws"] = r.draws;
  j["echo_consistent"] = r.consistent;
  j["min_comm_sinr_db"] = std::isfinite(r.min_comm_sinr_db) ? nlohmann::json(r.min_comm_sinr_db) : nlohmann::json(nullptr);
  j["worst_power_ratio"] = r.worst_power_ratio;
  return j;
}

}  // namespace dfrc
