// SPDX-License-Identifier: Apache-2.0

#include "dfrc/experiments.hpp"
#include "dfrc/validation.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <sstream>

using namespace dfrc;
using nlohmann::json;

namespace {

json tiny_json() {
  return json::parse(R"({
    "grid": {"num_subcarriers": 2, "frame_length": 2, "samples_per_symbol": 2},
    "array": {"num_tx": 2, "num_rx": 2, "tx_spacing_wavelengths": 2.0, "rx_spacing_wavelengths": 0.5},
    "users": 1,
    "target": {"azimuth_deg": 10.0, "speed_m_s": 20.0, "power_db": -10.0},
    "clutter": {"max_offset": 1, "patches_per_cell": 3, "power_db": -10.0},
    "channel": {"taps": 1, "noise_db": -20.0},
    "radar_noise_db": -10.0,
    "optimizer": {"comm_sinr_db": 5.0, "power_per_subcarrier_db": 10.0, "max_iters": 5},
    "seed": 7,
    "experiment": {
      "trials": 2,
      "echo_draws": 400,
      "subcarrier_sweep": {"subcarrier_counts": [1, 2], "total_power_db": [20.0]},
      "tradeoff_sweep": {"comm_sinr_db": [0.0, 5.0], "partitions": [1, 2], "radar_only": true}
    }
  })");
}

std::string csv_of(const SweepResult& r) {
  std::ostringstream os;
  write_sweep_csv(r, os);
  return os.str();
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("dB conversions round trip") {
    for (double db : {-30.0, -3.0, 0.0, 10.0, 21.760912590556813, 47.0})
      CHECK(linear_to_db(db_to_linear(db)) == doctest::Approx(db).epsilon(1e-14));
    CHECK(db_to_linear(21.760912590556813) == doctest::Approx(150.0).epsilon(1e-14));
    CHECK(db_to_linear(-10.0) == doctest::Approx(0.1).epsilon(1e-14));
  }

  TEST_CASE("contiguous partitions cover the band") {
    CHECK(contiguous_partition(4, 1) == std::vector<std::pair<int, int>>{{0, 4}});
    CHECK(contiguous_partition(4, 2) == std::vector<std::pair<int, int>>{{0, 2}, {2, 2}});
    CHECK(contiguous_partition(5, 2) == std::vector<std::pair<int, int>>{{0, 3}, {3, 2}});
    CHECK(contiguous_partition(4, 4).size() == 4);
    CHECK_THROWS_AS(contiguous_partition(2, 4), InvalidArgument);
    CHECK_THROWS_AS(contiguous_partition(2, 0), InvalidArgument);
  }

  TEST_CASE("config parsing, unit conversion and strict keys") {
    const auto cfg = parse_scenario(tiny_json());
    CHECK(cfg.grid.num_subcarriers == 2);
    CHECK(cfg.num_users == 1);
    CHECK(cfg.array.tx_spacing_m == doctest::Approx(2.0 * cfg.grid.wave_speed_m_s / cfg.grid.carrier_freq_hz));
    CHECK(cfg.trials == 2);
    const auto opt = cfg.optimizer_config(2);
    CHECK(opt.comm_sinr_threshold == doctest::Approx(db_to_linear(5.0)));
    CHECK(opt.per_subcarrier_power.size() == 2);
    CHECK(opt.per_subcarrier_power[0] == doctest::Approx(10.0));
    CHECK(opt.noise_radar == doctest::Approx(0.1));

    const auto back = parse_scenario(scenario_to_json(cfg));
    CHECK(scenario_to_json(back) == scenario_to_json(cfg));

    auto bad = tiny_json();
    bad["grid"]["num_subcarier"] = 3;
    CHECK_THROWS_AS(parse_scenario(bad), InvalidArgument);
    bad = tiny_json();
    bad["users"] = 0;
    CHECK_THROWS_AS(parse_scenario(bad), InvalidArgument);
    bad = tiny_json();
    bad["channel"]["taps"] = 5;
    CHECK_THROWS_AS(parse_scenario(bad), InvalidArgument);
  }

  TEST_CASE("trial seeds are stable and distinct") {
    CHECK(trial_seed(7, 0) == trial_seed(7, 0));
    CHECK(trial_seed(7, 0) != trial_seed(7, 1));
    CHECK(trial_seed(7, 0) != trial_seed(8, 0));
    const auto cfg = parse_scenario(tiny_json());
    const auto a = draw_realization(cfg, trial_seed(7, 1));
    const auto b = draw_realization(cfg, trial_seed(7, 1));
    CHECK(a.symbols.per_subcarrier[1] == b.symbols.per_subcarrier[1]);
    CHECK(a.channel.h[0][0] == b.channel.h[0][0]);
  }

  TEST_CASE("summary statistics") {
    SweepResult r;
    const double vals[3] = {10.0, 12.0, 17.0};
    for (int t = 0; t < 3; ++t) {
      SweepRow row;
      row.experiment = "tradeoff";
      row.scheme = "joint";
      row.trial = t;
      row.status = "ok";
      row.radar_sinr_db = vals[t];
      row.best_set_radar_sinr_db = vals[t];
      r.rows.push_back(row);
    }
    SweepRow bad = r.rows[0];
    bad.status = "infeasible";
    bad.trial = 3;
    r.rows.push_back(bad);
    const auto s = summarize(r, Averaging::Db);
    REQUIRE(s.size() == 1);
    CHECK(s[0].trials_ok == 3);
    CHECK(s[0].trials_total == 4);
    CHECK(s[0].mean_radar_sinr_db == doctest::Approx(13.0));
    // sample std of {10, 12, 17} is sqrt(13)
    CHECK(s[0].se_radar_sinr_db == doctest::Approx(std::sqrt(13.0 / 3.0)));
  }

  TEST_CASE("sweeps are reproducible and independent of the job count") {
    const auto cfg = parse_scenario(tiny_json());
    RunOptions one, two;
    two.jobs = 2;
    const auto a = csv_of(run_tradeoff_sweep(cfg, one));
    const auto b = csv_of(run_tradeoff_sweep(cfg, two));
    const auto c = csv_of(run_tradeoff_sweep(cfg, one));
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a.rfind("experiment,total_power_db,comm_sinr_db,", 0) == 0);

    const auto s1 = csv_of(run_subcarrier_sweep(cfg, one));
    const auto s2 = csv_of(run_subcarrier_sweep(cfg, two));
    CHECK(s1 == s2);
    RunOptions other = one;
    other.seed = 8;
    CHECK(csv_of(run_subcarrier_sweep(cfg, other)) != s1);
  }

  TEST_CASE("single design report is self-consistent") {
    const auto cfg = parse_scenario(tiny_json());
    const auto r = run_single(cfg);
    CHECK(r.draws == 400);
    CHECK(r.min_comm_sinr_db >= 5.0 - 1e-3);
    CHECK(r.worst_power_ratio <= 1.0 + 1e-6);
    CHECK(r.analytic_sinr == doctest::Approx(r.design.radar_sinr));
    CHECK(std::abs(r.empirical_sinr - r.analytic_sinr) <= 4.0 * r.empirical_se);
    const auto j = single_report_json(r);
    CHECK(j.contains("design"));
  }

  TEST_CASE("self-check suite passes") {
    for (const auto& c : run_validation_suite(3, 3)) {
      INFO(c.name, " worst=", c.worst, " threshold=", c.threshold);
      CHECK(c.pass);
    }
  }
}
