// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion on stdout (also written to
// acceptance_report.txt), details on stderr. Sweep outputs are kept in the
// working directory for inspection.
//
//   dfrc_acceptance [--configs DIR] [--jobs J]

#include "dfrc/experiments.hpp"
#include "dfrc/validation.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

using namespace dfrc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

VectorXcd random_cvec(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng);
    v(i) = cdouble(re, g(rng));
  }
  return v;
}

// Clutter-plus-noise covariance straight from its definition.
MatrixXcd direct_a(const LiftedOperators& ops, const VectorXcd& w, double noise) {
  MatrixXcd a = noise * MatrixXcd::Identity(ops.echo_size(), ops.echo_size());
  for (const auto& t : ops.clutter) {
    const VectorXcd c = t.op * w;
    a += c * c.adjoint();
  }
  return a;
}

std::vector<RandomScene> make_scenes(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  RandomSceneLimits lim;
  lim.max_subcarriers = 4;
  lim.max_frame = 4;
  lim.max_samples = 3;
  lim.max_tx = 4;
  lim.max_rx = 4;
  lim.max_users = 3;
  std::vector<RandomScene> out;
  for (int i = 0; i < count; ++i) out.push_back(random_scene(rng, lim));
  return out;
}

Verdict reformulation(const std::vector<RandomScene>& scenes, double elapsed_build) {
  const auto t0 = Clock::now();
  double worst_t0 = 0.0, worst_ccm = 0.0;
  for (const auto& s : scenes) {
    const auto& p = s.instance;
    const auto& d = p.ops.dims;
    const auto set = BeamformerSet::from_stacked(s.w, d.num_subcarriers, d.num_tx, d.num_users);
    const MatrixXcd xbar = build_xbar(set.per_subcarrier, p.symbols, d);
    const VectorXcd xv = xbar * s.target_signature;
    worst_t0 = std::max(worst_t0, (p.ops.t0 * s.w - xv).norm() / xv.norm());

    MatrixXcd rhs = MatrixXcd::Zero(d.echo_size(), d.echo_size());
    for (const auto& cell : s.factors) {
      const MatrixXcd jx =
          lifted_shift(cell.offset, d.samples_per_symbol, d.num_rx, d.frame_length).cast<cdouble>() * xbar;
      rhs += jx * dense_ccm(cell, d.stacked_signature_size()) * jx.adjoint();
    }
    const MatrixXcd lhs = direct_a(p.ops, s.w, 0.0);
    worst_ccm = std::max(worst_ccm, (lhs - rhs).norm() / rhs.norm());
  }
  const double secs = elapsed_build + seconds_since(t0);
  return {worst_t0 < 1e-9 && worst_ccm < 1e-9 && secs < 30.0,
          fmt::format("{} scenarios, target echo err {:.2e}, covariance err {:.2e}, {:.1f} s", scenes.size(), worst_t0,
                      worst_ccm, secs)};
}

Verdict filter_optimality(const std::vector<RandomScene>& scenes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst_rel = 0.0;
  int dominated = 0;
  for (const auto& s : scenes) {
    const auto& p = s.instance;
    const double noise = p.optimizer.noise_radar;
    const VectorXcd x = p.ops.t0 * s.w;
    const MatrixXcd a = direct_a(p.ops, s.w, noise);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXcd> ges(x * x.adjoint(), a, Eigen::EigenvaluesOnly);
    const double lmax = ges.eigenvalues().maxCoeff();
    const VectorXcd g = optimal_receive_filter(s.w, p.ops, noise);
    const double got = radar_sinr(s.w, g, p.ops, noise);
    worst_rel = std::max(worst_rel, std::abs(got - lmax) / lmax);
    for (int i = 0; i < 100; ++i) {
      const VectorXcd r = random_cvec(rng, p.ops.echo_size());
      const double other = std::norm(r.dot(x)) / r.dot(a * r).real();
      if (other > got * (1.0 + 1e-12)) ++dominated;
    }
  }
  return {worst_rel < 1e-8 && dominated == 0,
          fmt::format("{} instances, eigenvalue err {:.2e}, random filters beating it: {}", scenes.size(), worst_rel,
                      dominated)};
}

struct MajorizationStats {
  double worst_violation = 0.0;
  double worst_tangency = 0.0;
  int points = 0;
};

MajorizationStats majorization(const std::vector<RandomScene>& scenes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MajorizationStats st;
  for (const auto& s : scenes) {
    const auto& p = s.instance;
    const double noise = p.optimizer.noise_radar;
    const Surrogate sur = surrogate_params(s.w, p.ops, noise);
    // -SINR(w) via a direct solve, independent of the library's filter path
    auto neg_sinr = [&](const VectorXcd& w) {
      const VectorXcd x = p.ops.t0 * w;
      return -x.dot(direct_a(p.ops, w, noise).ldlt().solve(x)).real();
    };
    const double f0 = neg_sinr(s.w);
    st.worst_tangency = std::max(st.worst_tangency, std::abs(sur.value(s.w) - f0) / std::max(1.0, std::abs(f0)));
    for (int i = 0; i < 100; ++i) {
      VectorXcd w = random_cvec(rng, s.w.size());
      if (i % 2 == 0) w = s.w + unit(rng) * w;
      else w *= 2.0 * unit(rng) * s.w.norm() / w.norm();
      st.worst_violation = std::max(st.worst_violation, neg_sinr(w) - sur.value(w));
      ++st.points;
    }
  }
  return st;
}

struct AuditTally {
  int designs = 0;
  int comm_failures = 0;
  int power_failures = 0;
  int traces = 0;
  int non_monotone = 0;
  double worst_comm_shortfall_db = -std::numeric_limits<double>::infinity();
  double worst_power_ratio = 0.0;

  void design(double min_comm_db, double gamma_db, double power_ratio, bool check_comm) {
    ++designs;
    if (check_comm) {
      worst_comm_shortfall_db = std::max(worst_comm_shortfall_db, gamma_db - min_comm_db);
      if (!(min_comm_db >= gamma_db - 1e-3)) ++comm_failures;
    }
    worst_power_ratio = std::max(worst_power_ratio, power_ratio);
    if (!(power_ratio <= 1.0 + 1e-6)) ++power_failures;
  }
  void trace(bool monotone) {
    ++traces;
    if (!monotone) ++non_monotone;
  }
  void rows(const SweepResult& r) {
    for (const auto& row : r.rows) {
      if (row.status != "ok") continue;
      design(row.min_comm_sinr_db, row.comm_sinr_db, row.max_power_ratio, row.scheme != "radar_only");
      trace(row.mm_monotone);
    }
  }
};

// Independent audit of one design against its instance.
void audit_design(const DesignResult& r, const ProblemInstance& inst, AuditTally& tally) {
  double min_db = std::numeric_limits<double>::infinity();
  for (int n = 0; n < inst.channel.num_subcarriers(); ++n) {
    const MatrixXcd& w = r.beamformers.per_subcarrier[n];
    for (int k = 0; k < inst.channel.num_users(); ++k) {
      const VectorXcd& h = inst.channel.h[n][k];
      double sig = 0.0, intf = 0.0;
      for (int j = 0; j < w.cols(); ++j) (j == k ? sig : intf) += std::norm(h.dot(w.col(j)));
      min_db = std::min(min_db, linear_to_db(sig / (intf + inst.channel.noise_power)));
    }
  }
  double ratio = 0.0;
  for (int n = 0; n < inst.channel.num_subcarriers(); ++n) {
    double pw = 0.0;
    for (int l = 0; l < inst.symbols.per_subcarrier[n].cols(); ++l)
      pw += (r.beamformers.per_subcarrier[n] * inst.symbols.per_subcarrier[n].col(l)).squaredNorm();
    ratio = std::max(ratio, pw / inst.optimizer.per_subcarrier_power[n]);
  }
  tally.design(min_db, linear_to_db(inst.optimizer.comm_sinr_threshold), ratio, !inst.optimizer.radar_only);
  bool mono = true;
  for (std::size_t i = 1; i < r.trace.size(); ++i) mono = mono && r.trace[i].objective <= r.trace[i - 1].objective;
  tally.trace(mono);
}

using Curve = std::map<double, const SummaryRow*>;

const SummaryRow* find(const std::vector<SummaryRow>& s, const std::function<bool(const SummaryRow&)>& pred) {
  for (const auto& r : s)
    if (pred(r)) return &r;
  return nullptr;
}

Verdict fig2_trend(const std::vector<SummaryRow>& summary, const ScenarioConfig& cfg, double secs) {
  bool ok = secs <= 600.0;
  std::string detail;
  for (double pt : cfg.subcarrier_sweep.total_power_db) {
    std::vector<double> means;
    for (int n : cfg.subcarrier_sweep.subcarrier_counts) {
      const auto* r = find(summary, [&](const SummaryRow& s) { return s.total_power_db == pt && s.num_subcarriers == n; });
      means.push_back(r && r->trials_ok > 0 ? r->mean_radar_sinr_db : std::nan(""));
    }
    bool increasing = true;
    for (std::size_t i = 1; i < means.size(); ++i) increasing = increasing && means[i] > means[i - 1];
    const double first = means.size() > 1 ? means[1] - means[0] : std::nan("");
    const double last = means.size() > 1 ? means.back() - means[means.size() - 2] : std::nan("");
    const bool saturating = last < first && last <= 1.0;
    ok = ok && increasing && saturating;
    std::string row;
    for (double m : means) row += fmt::format(" {:.2f}", m);
    detail += fmt::format("P_t={:g} dB:{} (first step {:.2f}, last step {:.2f}){}; ", pt, row, first, last,
                          increasing ? "" : " NOT increasing");
  }
  detail += fmt::format("{} trials, {:.0f} s", cfg.trials, secs);
  return {ok, detail};
}

Verdict fig3_trend(const std::vector<SummaryRow>& summary, const ScenarioConfig& cfg, int trials, double secs) {
  const auto& gammas = cfg.tradeoff_sweep.comm_sinr_db;
  // curve order: radar-only, then partitions as configured (1, 2, 4)
  std::vector<std::pair<std::string, std::vector<const SummaryRow*>>> curves;
  if (cfg.tradeoff_sweep.radar_only) {
    std::vector<const SummaryRow*> c;
    for (double g : gammas)
      c.push_back(find(summary, [&](const SummaryRow& s) { return s.scheme == "radar_only" && s.comm_sinr_db == g; }));
    curves.emplace_back("radar-only", c);
  }
  for (int p : cfg.tradeoff_sweep.partitions) {
    std::vector<const SummaryRow*> c;
    for (double g : gammas)
      c.push_back(find(summary, [&](const SummaryRow& s) {
        return s.scheme != "radar_only" && s.num_sets == p && s.comm_sinr_db == g;
      }));
    curves.emplace_back(fmt::format("N_sub={}", p), c);
  }
  bool ok = secs <= 900.0 && trials >= 20;
  std::string detail;
  for (const auto& [name, c] : curves) {
    bool mono = true;
    std::string vals;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i] || c[i]->trials_ok == 0) {
        mono = false;
        vals += " n/a";
        continue;
      }
      vals += fmt::format(" {:.2f}", c[i]->mean_radar_sinr_db);
      if (i > 0 && c[i - 1] && c[i]->mean_radar_sinr_db > c[i - 1]->mean_radar_sinr_db) mono = false;
    }
    ok = ok && mono;
    detail += fmt::format("{}:{}{}; ", name, vals, mono ? "" : " NOT non-increasing");
  }
  int order_violations = 0;
  for (std::size_t ci = 1; ci < curves.size(); ++ci) {
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      const auto* hi = curves[ci - 1].second[gi];
      const auto* lo = curves[ci].second[gi];
      if (!hi || !lo) {
        ++order_violations;
        continue;
      }
      const double se = std::max(hi->se_radar_sinr_db, lo->se_radar_sinr_db);
      if (hi->mean_radar_sinr_db < lo->mean_radar_sinr_db - se) ++order_violations;
    }
  }
  ok = ok && order_violations == 0;
  detail += fmt::format("ordering violations {}, {} of {} trials feasible at every point, {:.0f} s", order_violations,
                        trials, cfg.trials, secs);
  return {ok, detail};
}

// Rows of the trials that are feasible at every sweep point, so each curve
// point averages the same realizations.
SweepResult common_trials(const SweepResult& r) {
  std::map<int, bool> all_ok;
  for (const auto& row : r.rows) all_ok.try_emplace(row.trial, true).first->second &= row.status == "ok";
  SweepResult out;
  for (const auto& row : r.rows)
    if (all_ok[row.trial]) out.rows.push_back(row);
  return out;
}

int count_trials(const SweepResult& r) {
  std::map<int, bool> seen;
  for (const auto& row : r.rows) seen[row.trial] = true;
  return static_cast<int>(seen.size());
}

std::string csv_string(const SweepResult& r) {
  std::ostringstream os;
  write_sweep_csv(r, os);
  return os.str();
}

void save(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string summary_string(const std::vector<SummaryRow>& s) {
  std::ostringstream os;
  write_summary_csv(s, os);
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path configs = DFRC_CONFIG_DIR;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--configs") == 0) configs = argv[i + 1];
    else if (std::strcmp(argv[i], "--jobs") == 0) jobs = std::max(1, std::atoi(argv[i + 1]));
  }
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DFRC_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(env));
  const std::filesystem::path out_dir = std::filesystem::current_path();

  std::vector<std::pair<std::string, Verdict>> verdicts(8);
  AuditTally tally;
  auto report = [&](int idx, const std::string& name, Verdict v) {
    fmt::print(stderr, "[{}] {}: {}\n", idx + 1, name, v.detail);
    verdicts[idx] = {name, std::move(v)};
  };

  // 1-3 on small random scenes
  const auto t_build = Clock::now();
  const auto scenes = make_scenes(20240601, 20);
  report(0, "reformulation identity", reformulation(scenes, seconds_since(t_build)));
  report(1, "filter optimality", filter_optimality(scenes, 77));
  const auto maj = majorization(scenes, 78);

  for (const auto& s : scenes) {
    auto inst = s.instance;
    inst.optimizer.comm_sinr_threshold = db_to_linear(0.0);
    inst.optimizer.max_iters = 10;
    try {
      const auto r = run_design(inst.ops, inst.channel, inst.symbols, inst.optimizer);
      if (!r.degenerate) audit_design(r, inst, tally);
    } catch (const InfeasibleDesign&) {
    }
  }

  // 7: echo-level Monte Carlo
  {
    const auto base = load_scenario(configs / "single.json");
    int consistent = 0;
    std::string detail;
    for (int i = 0; i < 5; ++i) {
      ScenarioConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(i);
      cfg.echo_draws = 1000;
      if (i == 4) cfg.clutter.patches_per_cell = 0;
      const auto rep = run_single(cfg);
      const auto real = draw_realization(cfg, rep.trial_seed);
      const auto inst = build_instance(cfg, real);
      if (!rep.design.degenerate) audit_design(rep.design, inst, tally);
      const double z = std::abs(rep.empirical_sinr - rep.analytic_sinr) / rep.empirical_se;
      if (rep.draws == 1000 && z <= 3.0) ++consistent;
      detail += fmt::format("{}{}: analytic {:.4g}, echo {:.4g} (z={:.2f}); ", i == 4 ? "no clutter" : "scenario ",
                            i == 4 ? "" : std::to_string(i + 1), rep.analytic_sinr, rep.empirical_sinr, z);
    }
    detail += fmt::format("{}/5 within 3 SE", consistent);
    report(6, "echo-level consistency", {consistent == 5, detail});
  }

  // 5: Fig. 2 sweep
  {
    const auto cfg = load_scenario(configs / "fig2_subcarriers.json");
    RunOptions opt;
    opt.jobs = jobs;
    const auto t0 = Clock::now();
    const auto res = run_subcarrier_sweep(cfg, opt);
    const double secs = seconds_since(t0);
    tally.rows(res);
    const auto summary = summarize(res, cfg.averaging);
    save(out_dir / "acceptance_fig2.csv", csv_string(res));
    save(out_dir / "acceptance_fig2_summary.csv", summary_string(summary));
    report(4, "Fig. 2 trend", fig2_trend(summary, cfg, secs));
  }

  // 6: Fig. 3 sweep
  {
    const auto cfg = load_scenario(configs / "fig3_tradeoff.json");
    RunOptions opt;
    opt.jobs = jobs;
    const auto t0 = Clock::now();
    const auto res = run_tradeoff_sweep(cfg, opt);
    const double secs = seconds_since(t0);
    tally.rows(res);
    save(out_dir / "acceptance_fig3.csv", csv_string(res));
    save(out_dir / "acceptance_fig3_summary.csv", summary_string(summarize(res, cfg.averaging)));
    const auto paired = common_trials(res);
    const auto summary = summarize(paired, cfg.averaging);
    save(out_dir / "acceptance_fig3_paired_summary.csv", summary_string(summary));
    report(5, "Fig. 3 trend", fig3_trend(summary, cfg, count_trials(paired), secs));
  }

  // 3 and 4 cover every design produced above
  report(2, "majorization contract",
         {maj.worst_violation < 1e-8 && maj.worst_tangency < 1e-8 && tally.non_monotone == 0 && tally.traces > 0,
          fmt::format("{} points, worst violation {:.2e}, tangency err {:.2e}; {} MM traces, {} non-monotone",
                      maj.points, maj.worst_violation, maj.worst_tangency, tally.traces, tally.non_monotone)});
  report(3, "constraint fidelity",
         {tally.comm_failures == 0 && tally.power_failures == 0 && tally.designs > 0,
          fmt::format("{} designs audited, worst SINR shortfall {:.2e} dB, worst power ratio {:.9f}, "
                      "{} SINR failures, {} power failures",
                      tally.designs, tally.worst_comm_shortfall_db, tally.worst_power_ratio, tally.comm_failures,
                      tally.power_failures)});

  // 8: determinism on reduced trial counts
  {
    auto cfg3 = load_scenario(configs / "fig3_tradeoff.json");
    auto cfg2 = load_scenario(configs / "fig2_subcarriers.json");
    RunOptions one, four;
    one.trials = four.trials = 2;
    four.jobs = 4;
    const auto a = csv_string(run_tradeoff_sweep(cfg3, one));
    const auto b = csv_string(run_tradeoff_sweep(cfg3, one));
    const auto c = csv_string(run_tradeoff_sweep(cfg3, four));
    one.trials = four.trials = 1;
    const auto d = csv_string(run_subcarrier_sweep(cfg2, one));
    const auto e = csv_string(run_subcarrier_sweep(cfg2, four));
    const bool ok = a == b && a == c && d == e;
    report(7, "determinism",
           {ok, fmt::format("trade-off CSV {} bytes: rerun {}, 4 jobs {}; subcarrier CSV {} bytes: 4 jobs {}",
                            a.size(), a == b ? "identical" : "DIFFERS", a == c ? "identical" : "DIFFERS", d.size(),
                            d == e ? "identical" : "DIFFERS")});
  }

  int failures = 0;
  std::ofstream summary_file(out_dir / "acceptance_report.txt");
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& [name, v] = verdicts[i];
    const auto line = fmt::format("{} criterion {} ({}): {}\n", v.pass ? "PASS" : "FAIL", i + 1, name, v.detail);
    fmt::print("{}", line);
    summary_file << line;
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
