// SPDX-License-Identifier: Apache-2.0

#include "dfrc/validation.hpp"

#include "dfrc/socp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace dfrc {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

VectorXcd random_complex(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng);
    v(i) = cdouble(re, g(rng));
  }
  return v;
}

double rel_frobenius(const MatrixXcd& a, const MatrixXcd& b) {
  const double den = std::max(b.norm(), 1e-300);
  return (a - b).norm() / den;
}

}  // namespace

RandomScene random_scene(std::mt19937_64& rng, const RandomSceneLimits& lim) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomScene s;
  auto& p = s.instance;
  p.grid.num_subcarriers = uniform_int(rng, 1, lim.max_subcarriers);
  p.grid.frame_length = uniform_int(rng, 1, lim.max_frame);
  p.grid.samples_per_symbol = uniform_int(rng, 1, lim.max_samples);
  p.array.num_tx = uniform_int(rng, 1, lim.max_tx);
  p.array.num_rx = uniform_int(rng, 1, lim.max_rx);
  const double wavelength = p.grid.wave_speed_m_s / p.grid.carrier_freq_hz;
  p.array.tx_spacing_m = (0.5 + 1.5 * unit(rng)) * wavelength;
  p.array.rx_spacing_m = 0.5 * wavelength;
  const int k_users = uniform_int(rng, 1, lim.max_users);

  p.target = make_target(deg_to_rad(-60.0 + 120.0 * unit(rng)), 50.0 * unit(rng), 0.5 + unit(rng),
                         p.grid.num_subcarriers);
  p.target.amplitudes = random_complex(rng, p.grid.num_subcarriers);

  p.clutter.max_offset = uniform_int(rng, 0, lim.max_offset);
  p.clutter.amplitude_model = unit(rng) < 0.7 ? ClutterAmplitudeModel::Flat : ClutterAmplitudeModel::PerSubcarrier;
  p.clutter.cells.resize(2 * p.clutter.max_offset + 1);
  for (int c = 0; c < p.clutter.num_cells(); ++c) {
    const int patches = uniform_int(rng, 1, lim.max_patches);
    for (int i = 0; i < patches; ++i) {
      Scatterer sc;
      sc.azimuth_rad = deg_to_rad(360.0 * unit(rng));
      sc.speed_m_s = 50.0 * unit(rng);
      sc.power = 0.5 + unit(rng);
      sc.range_offset = c - p.clutter.max_offset;
      sc.amplitudes = VectorXcd::Constant(p.grid.num_subcarriers, std::sqrt(sc.power));
      p.clutter.cells[c].push_back(sc);
    }
  }

  const int taps = uniform_int(rng, 1, std::min(2, p.grid.num_subcarriers));
  const auto tap_channel = random_tap_channel(k_users, taps, p.array.num_tx, 0.01, rng);
  p.channel = dft_response(tap_channel, p.grid);
  p.symbols = generate_symbols(k_users, p.grid, Constellation::Qpsk, rng());

  const EchoDims dims = EchoDims::from(p.grid, p.array, k_users);
  s.factors = clutter_factors(p.clutter, p.grid, p.array);
  s.target_signature = stacked_signature(p.target, p.grid, p.array);
  p.ops = build_lifted_operators(s.target_signature, s.factors, p.symbols, dims);
  p.optimizer.per_subcarrier_power.assign(p.grid.num_subcarriers, 1.0);
  p.optimizer.noise_radar = 0.1 + unit(rng);
  s.w = random_complex(rng, dims.beamformer_size());
  return s;
}

std::vector<CheckResult> run_validation_suite(std::uint64_t seed, int cases) {
  std::mt19937_64 rng(seed);
  CheckResult t0{"T0 w equals the unlifted target echo", 0.0, 1e-9, 0, false};
  CheckResult ccm{"clutter operators reproduce the dense clutter covariance", 0.0, 1e-9, 0, false};
  CheckResult filt{"optimal filter attains the largest generalized eigenvalue", 0.0, 1e-8, 0, false};
  CheckResult dom{"optimal filter dominates random filters", 0.0, 1e-10, 0, false};
  CheckResult maj{"surrogate upper-bounds -SINR and touches it at w_t", 0.0, 1e-8, 0, false};
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int c = 0; c < cases; ++c) {
    const auto scene = random_scene(rng);
    const auto& p = scene.instance;
    const auto& dims = p.ops.dims;
    const auto bf = BeamformerSet::from_stacked(scene.w, dims.num_subcarriers, dims.num_tx, dims.num_users);

    const MatrixXcd xbar = build_xbar(bf.per_subcarrier, p.symbols, dims);
    const VectorXcd direct = xbar * scene.target_signature;
    t0.worst = std::max(t0.worst, (p.ops.t0 * scene.w - direct).norm() / std::max(direct.norm(), 1e-300));
    ++t0.cases;

    MatrixXcd lhs = MatrixXcd::Zero(dims.echo_size(), dims.echo_size());
    for (const auto& op : p.ops.clutter) {
      const VectorXcd y = op.op * scene.w;
      lhs += y * y.adjoint();
    }
    MatrixXcd rhs = MatrixXcd::Zero(dims.echo_size(), dims.echo_size());
    for (const auto& cell : scene.factors) {
      const MatrixXd shift = lifted_shift(cell.offset, dims.samples_per_symbol, dims.num_rx, dims.frame_length);
      const MatrixXcd jx = shift.cast<cdouble>() * xbar;
      rhs += jx * dense_ccm(cell, dims.stacked_signature_size()) * jx.adjoint();
    }
    if (rhs.norm() > 0.0) ccm.worst = std::max(ccm.worst, rel_frobenius(lhs, rhs));
    ++ccm.cases;

    const double noise = p.optimizer.noise_radar;
    const double sinr = optimal_radar_sinr(scene.w, p.ops, noise);
    const MatrixXcd a = clutter_noise_matrix(scene.w, p.ops, noise);
    const VectorXcd x = p.ops.t0 * scene.w;
    const Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXcd> ges(x * x.adjoint(), a);
    const double top = ges.eigenvalues().maxCoeff();
    filt.worst = std::max(filt.worst, std::abs(sinr - top) / std::max(top, 1e-300));
    ++filt.cases;

    const VectorXcd wr = optimal_receive_filter(scene.w, p.ops, noise);
    const double achieved = radar_sinr(scene.w, wr, p.ops, noise);
    for (int i = 0; i < 100; ++i) {
      const VectorXcd r = random_complex(rng, dims.echo_size());
      const double other = radar_sinr(scene.w, r, p.ops, noise);
      dom.worst = std::max(dom.worst, (other - achieved) / achieved);
    }
    ++dom.cases;

    const Surrogate sur = surrogate_params(scene.w, p.ops, noise);
    maj.worst = std::max(maj.worst, std::abs(sur.value(scene.w) + sinr) / std::max(1.0, sinr));
    for (int i = 0; i < 100; ++i) {
      const VectorXcd w = scene.w + random_complex(rng, scene.w.size()) * std::exp(gauss(rng));
      const double gap = sur.value(w) + optimal_radar_sinr(w, p.ops, noise);
      maj.worst = std::max(maj.worst, -gap);
    }
    ++maj.cases;
  }

  CheckResult solver{"conic solver reference cases", 0.0, 1e-7, 0, false};
  {
    socp::SocProgram prog(1);
    prog.objective(0) = 1.0;
    prog.add_cone({MatrixXd::Identity(1, 1), VectorXd::Zero(1), VectorXd::Zero(1), 1.0});
    const auto r = socp::solve(prog);
    solver.worst = std::max(solver.worst, r.optimal() ? std::abs(r.x(0) + 1.0) : 1.0);
    ++solver.cases;
  }
  {
    VectorXd center(3);
    center << 1.0, -2.0, 0.5;
    socp::SocProgram prog(3);
    prog.add_cone({MatrixXd::Identity(3, 3), -center, VectorXd::Zero(3), 0.0});
    const auto r = socp::solve(prog);
    solver.worst = std::max(solver.worst, r.optimal() ? (r.x - center).norm() : 1.0);
    ++solver.cases;
  }

  std::vector<CheckResult> out{t0, ccm, filt, dom, maj, solver};
  for (auto& r : out) r.pass = r.worst <= r.threshold;
  return out;
}

}  // namespace dfrc
