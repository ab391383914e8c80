// SPDX-License-Identifier: Apache-2.0
//
// dfrc: batch designs and sweeps for the wideband DFRC beamformer.
//
//   dfrc single            --config c.json [--seed S] [--trials ECHO_DRAWS] [--out report.json]
//   dfrc sweep-subcarriers --config c.json [--seed S] [--trials T] [--jobs J] [--out rows.csv]
//   dfrc sweep-tradeoff    --config c.json [--seed S] [--trials T] [--jobs J] [--out rows.csv]
//   dfrc validate          [--seed S] [--trials CASES] [--out checks.csv]
//
// DFRC_LOG_LEVEL (trace, debug, info, warn, error, off) sets the log level.

#include "dfrc/experiments.hpp"
#include "dfrc/validation.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  int jobs = 1;
  std::string out;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("dfrc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DFRC_LOG_LEVEL")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("unknown DFRC_LOG_LEVEL '{}'; keeping 'warn'", env);
    else
      spdlog::set_level(level);
  }
}

// Writes to --out when given, otherwise to stdout.
template <typename Writer>
void emit(const std::string& path, Writer&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  write(f);
}

dfrc::RunOptions run_options(const Common& c) {
  dfrc::RunOptions o;
  o.jobs = c.jobs;
  o.trials = c.trials;
  o.seed = c.seed;
  return o;
}

int finish_sweep(const dfrc::ScenarioConfig& cfg, const dfrc::SweepResult& res, const Common& c) {
  emit(c.out, [&](std::ostream& os) { dfrc::write_sweep_csv(res, os); });
  const auto summary = dfrc::summarize(res, cfg.averaging);
  if (!c.out.empty()) {
    std::ofstream f(c.out + ".summary.csv", std::ios::binary);
    dfrc::write_summary_csv(summary, f);
  }
  dfrc::write_summary_csv(summary, std::cerr);
  int errors = 0;
  for (const auto& r : res.rows) errors += r.status == "error" ? 1 : 0;
  if (errors > 0) spdlog::error("{} run(s) failed", errors);
  return errors > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Wideband DFRC joint transmit beamforming and receive filter design"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    auto* cfg_opt = sub->add_option("--config", common.config, "scenario JSON file");
    cfg_opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "base seed (overrides the config)");
    sub->add_option("--out", common.out, "output path (stdout when omitted)");
    sub->add_option("--trials", common.trials, "Monte Carlo trials or echo draws (overrides the config)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* single = app.add_subcommand("single", "one design with an echo-level SINR check (JSON report)");
  add_common(single);
  auto* sweep_n = app.add_subcommand("sweep-subcarriers", "radar SINR versus number of subcarriers (CSV)");
  add_common(sweep_n);
  auto* sweep_g = app.add_subcommand("sweep-tradeoff", "radar SINR versus communication SINR requirement (CSV)");
  add_common(sweep_g);
  auto* validate = app.add_subcommand("validate", "run the model and optimizer self-checks");
  validate->add_option("--seed", common.seed, "random seed");
  validate->add_option("--trials", common.trials, "number of random scenes")->check(CLI::PositiveNumber);
  validate->add_option("--out", common.out, "CSV of check results");
  validate->add_option("--jobs", common.jobs, "accepted for uniformity; checks run serially");

  CLI11_PARSE(app, argc, argv);

  try {
    if (single->parsed()) {
      auto cfg = dfrc::load_scenario(common.config);
      if (common.trials) cfg.echo_draws = *common.trials;
      cfg.validate();
      nlohmann::json report;
      int code = 0;
      try {
        const auto rep = dfrc::run_single(cfg, run_options(common));
        report = dfrc::single_report_json(rep);
        report["status"] = rep.design.degenerate ? "degenerate" : "ok";
        std::cerr << fmt::format("radar SINR {:.4f} dB (echo Monte Carlo {:.4f} dB +- {:.4f} dB, {}), "
                                 "min comm SINR {:.4f} dB, {} iterations{}\n",
                                 rep.design.radar_sinr_db, dfrc::linear_to_db(rep.empirical_sinr),
                                 10.0 / std::log(10.0) * rep.empirical_se / std::max(rep.empirical_sinr, 1e-300),
                                 rep.consistent ? "consistent" : "INCONSISTENT", rep.min_comm_sinr_db,
                                 rep.design.iterations, rep.design.converged ? "" : " (not converged)");
      } catch (const dfrc::InfeasibleDesign& e) {
        report["status"] = "infeasible";
        report["reason"] = e.what();
        report["subcarrier"] = e.subcarrier();
        report["user"] = e.user();
        std::cerr << "infeasible: " << e.what() << '\n';
      }
      emit(common.out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
      return code;
    }
    if (sweep_n->parsed()) {
      const auto cfg = dfrc::load_scenario(common.config);
      return finish_sweep(cfg, dfrc::run_subcarrier_sweep(cfg, run_options(common)), common);
    }
    if (sweep_g->parsed()) {
      const auto cfg = dfrc::load_scenario(common.config);
      return finish_sweep(cfg, dfrc::run_tradeoff_sweep(cfg, run_options(common)), common);
    }
    if (validate->parsed()) {
      const auto checks = dfrc::run_validation_suite(common.seed.value_or(1), common.trials.value_or(20));
      bool all = true;
      emit(common.out, [&](std::ostream& os) {
        os << "check,cases,worst,threshold,pass\n";
        for (const auto& c : checks)
          os << fmt::format("\"{}\",{},{:.3e},{:.1e},{}\n", c.name, c.cases, c.worst, c.threshold, c.pass ? 1 : 0);
      });
      for (const auto& c : checks) {
        std::cerr << fmt::format("{} {} (worst {:.3e}, limit {:.1e}, {} cases)\n", c.pass ? "PASS" : "FAIL", c.name,
                                 c.worst, c.threshold, c.cases);
        all = all && c.pass;
      }
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
