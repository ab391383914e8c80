// SPDX-License-Identifier: Apache-2.0

#include "dfrc/radar_scene.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cstring>
#include <fstream>

namespace dfrc {

namespace {

constexpr std::array<char, 8> kCcmMagic = {'D', 'F', 'R', 'C', 'C', 'C', 'M', '1'};

// a (x) b with b varying fastest.
VectorXcd kron(const VectorXcd& a, const VectorXcd& b) {
  VectorXcd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

Scatterer unit_amplitude(const Scatterer& s, int num_subcarriers) {
  Scatterer u = s;
  u.amplitudes = VectorXcd::Ones(num_subcarriers);
  return u;
}

}  // namespace

EchoDims EchoDims::from(const OfdmGrid& grid, const ArrayGeometry& geom, int num_users) {
  return EchoDims{grid.num_subcarriers, grid.frame_length, grid.samples_per_symbol,
                  geom.num_rx,          geom.num_tx,       num_users};
}

Scatterer make_target(double azimuth_rad, double speed_m_s, double power, int num_subcarriers) {
  if (power < 0.0) throw InvalidArgument("target power must be non-negative");
  Scatterer t;
  t.azimuth_rad = azimuth_rad;
  t.speed_m_s = speed_m_s;
  t.power = power;
  t.amplitudes = VectorXcd::Constant(num_subcarriers, cdouble(std::sqrt(power), 0.0));
  return t;
}

void ClutterField::validate(int num_subcarriers) const {
  if (max_offset < 0) throw InvalidArgument("clutter max offset must be >= 0");
  if (num_cells() != 2 * max_offset + 1) throw InvalidArgument("clutter field needs 2M+1 cells");
  for (int c = 0; c < num_cells(); ++c) {
    for (const auto& p : cells[c]) {
      if (p.range_offset != c - max_offset) throw InvalidArgument("patch range offset does not match its cell");
      if (p.amplitudes.size() != num_subcarriers) throw InvalidArgument("patch amplitudes must cover every subcarrier");
      if (p.power < 0.0) throw InvalidArgument("patch power must be non-negative");
    }
  }
}

ClutterField ClutterField::subset(int first, int count) const {
  ClutterField out = *this;
  for (auto& cell : out.cells)
    for (auto& p : cell) p.amplitudes = p.amplitudes.segment(first, count).eval();
  return out;
}

ClutterField random_clutter_field(const ClutterSpec& spec, int num_subcarriers, std::mt19937_64& rng) {
  if (spec.max_offset < 0 || spec.patches_per_cell < 0) throw InvalidArgument("bad clutter spec");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClutterField field;
  field.max_offset = spec.max_offset;
  field.amplitude_model = spec.amplitude_model;
  field.cells.resize(2 * spec.max_offset + 1);
  for (int c = 0; c < field.num_cells(); ++c) {
    for (int i = 0; i < spec.patches_per_cell; ++i) {
      // 1 - U lies in (0, 1], so both ranges are half-open on the left.
      const double az = spec.azimuth_min_deg + (1.0 - unit(rng)) * (spec.azimuth_max_deg - spec.azimuth_min_deg);
      const double v = spec.speed_min_m_s + (1.0 - unit(rng)) * (spec.speed_max_m_s - spec.speed_min_m_s);
      Scatterer p;
      p.azimuth_rad = deg_to_rad(az);
      p.speed_m_s = v;
      p.power = spec.power;
      p.range_offset = c - spec.max_offset;
      p.amplitudes = VectorXcd::Constant(num_subcarriers, cdouble(std::sqrt(spec.power), 0.0));
      field.cells[c].push_back(std::move(p));
    }
  }
  return field;
}

VectorXcd space_time_signature(const Scatterer& s, int n, const OfdmGrid& grid, const ArrayGeometry& geom) {
  if (n < 0 || n >= grid.num_subcarriers) throw InvalidArgument("subcarrier index out of range");
  if (s.amplitudes.size() != grid.num_subcarriers) throw InvalidArgument("amplitudes must cover every subcarrier");
  const double fn = grid.subcarrier_freq(n);
  const double fb = baseband_freq(n, s.speed_m_s, grid);
  const VectorXcd q = slow_time_phase(fb, grid);
  const VectorXcd p = fast_time_phase(fb, grid);
  const VectorXcd b = steering_rx(s.azimuth_rad, fn, geom, grid.wave_speed_m_s);
  const VectorXcd a = steering_tx(s.azimuth_rad, fn, geom, grid.wave_speed_m_s);
  return s.amplitudes(n) * kron(q, kron(p, kron(b, a)));
}

VectorXcd stacked_signature(const Scatterer& s, const OfdmGrid& grid, const ArrayGeometry& geom) {
  const EchoDims dims = EchoDims::from(grid, geom, 1);
  VectorXcd v(dims.stacked_signature_size());
  for (int n = 0; n < grid.num_subcarriers; ++n)
    v.segment(n * dims.signature_size(), dims.signature_size()) = space_time_signature(s, n, grid, geom);
  return v;
}

MatrixXd shift_matrix(int m, int samples_per_symbol) {
  if (samples_per_symbol < 1) throw InvalidArgument("samples per symbol must be >= 1");
  MatrixXd j = MatrixXd::Zero(samples_per_symbol, samples_per_symbol);
  if (std::abs(m) >= samples_per_symbol) {
    spdlog::debug("shift offset {} >= N_s {}: shift matrix is zero", m, samples_per_symbol);
    return j;
  }
  for (int i = 0; i < samples_per_symbol; ++i) {
    const int col = i + m;
    if (col >= 0 && col < samples_per_symbol) j(i, col) = 1.0;
  }
  return j;
}

MatrixXd lifted_shift(int m, int samples_per_symbol, int num_rx, int frame_length) {
  const MatrixXd jt = shift_matrix(m, samples_per_symbol).transpose();
  const int block = samples_per_symbol * num_rx;
  MatrixXd inner = MatrixXd::Zero(block, block);
  for (int i = 0; i < samples_per_symbol; ++i)
    for (int k = 0; k < samples_per_symbol; ++k)
      if (jt(i, k) != 0.0) inner.block(i * num_rx, k * num_rx, num_rx, num_rx).setIdentity();
  MatrixXd out = MatrixXd::Zero(block * frame_length, block * frame_length);
  for (int l = 0; l < frame_length; ++l) out.block(l * block, l * block, block, block) = inner;
  return out;
}

VectorXcd apply_lifted_shift(int m, const VectorXcd& echo, const EchoDims& dims) {
  if (echo.size() != dims.echo_size()) throw InvalidArgument("echo length mismatch");
  const int ns = dims.samples_per_symbol;
  const int nr = dims.num_rx;
  VectorXcd out = VectorXcd::Zero(echo.size());
  for (int l = 0; l < dims.frame_length; ++l) {
    for (int i = 0; i < ns; ++i) {
      const int src = i - m;
      if (src < 0 || src >= ns) continue;
      out.segment((l * ns + i) * nr, nr) = echo.segment((l * ns + src) * nr, nr);
    }
  }
  return out;
}

CellFactors inner_ccm_factors(int offset, const std::vector<Scatterer>& patches, ClutterAmplitudeModel model,
                              const OfdmGrid& grid, const ArrayGeometry& geom) {
  CellFactors cell;
  cell.offset = offset;
  const int sig = EchoDims::from(grid, geom, 1).signature_size();
  for (const auto& p : patches) {
    if (p.power < 0.0) throw InvalidArgument("patch power must be non-negative");
    if (p.power == 0.0) continue;
    const double scale = std::sqrt(p.power);
    const VectorXcd unit = stacked_signature(unit_amplitude(p, grid.num_subcarriers), grid, geom);
    if (model == ClutterAmplitudeModel::Flat) {
      cell.factors.push_back(scale * unit);
    } else {
      for (int n = 0; n < grid.num_subcarriers; ++n) {
        VectorXcd u = VectorXcd::Zero(unit.size());
        u.segment(n * sig, sig) = scale * unit.segment(n * sig, sig);
        cell.factors.push_back(std::move(u));
      }
    }
  }
  return cell;
}

InnerCcmFactors clutter_factors(const ClutterField& field, const OfdmGrid& grid, const ArrayGeometry& geom) {
  field.validate(grid.num_subcarriers);
  InnerCcmFactors out;
  for (int m = -field.max_offset; m <= field.max_offset; ++m)
    out.push_back(inner_ccm_factors(m, field.cell(m), field.amplitude_model, grid, geom));
  return out;
}

CellFactors factors_from_dense(int offset, const MatrixXcd& ccm, double cutoff) {
  if (ccm.rows() != ccm.cols()) throw InvalidArgument("inner CCM must be square");
  const double scale = std::max(ccm.norm(), 1e-300);
  if ((ccm - ccm.adjoint()).norm() > 1e-10 * scale) throw InvalidArgument("inner CCM is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(ccm);
  if (eig.info() != Eigen::Success) throw InvalidArgument("inner CCM eigendecomposition failed");
  const VectorXd& lambda = eig.eigenvalues();
  const double lmax = lambda.size() ? lambda.maxCoeff() : 0.0;
  const double trace = ccm.diagonal().real().sum();
  if (lambda.size() && lambda.minCoeff() < -1e-10 * std::max(std::abs(trace), 1e-300))
    throw InvalidArgument("inner CCM is not positive semidefinite");
  CellFactors cell;
  cell.offset = offset;
  for (Eigen::Index r = lambda.size() - 1; r >= 0; --r) {
    if (lambda(r) <= cutoff * lmax || lambda(r) <= 0.0) break;
    cell.factors.push_back(std::sqrt(lambda(r)) * eig.eigenvectors().col(r));
  }
  return cell;
}

MatrixXcd dense_ccm(const CellFactors& cell, int dim) {
  MatrixXcd m = MatrixXcd::Zero(dim, dim);
  for (const auto& u : cell.factors) {
    if (u.size() != dim) throw InvalidArgument("factor length mismatch");
    m.noalias() += u * u.adjoint();
  }
  return m;
}

void write_dense_ccm(const std::filesystem::path& path, int offset, const MatrixXcd& ccm) {
  if (ccm.rows() != ccm.cols()) throw InvalidArgument("inner CCM must be square");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const std::int64_t dim = ccm.rows();
  const std::int64_t off = offset;
  out.write(kCcmMagic.data(), kCcmMagic.size());
  out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  out.write(reinterpret_cast<const char*>(&off), sizeof off);
  for (Eigen::Index r = 0; r < ccm.rows(); ++r) {
    for (Eigen::Index c = 0; c < ccm.cols(); ++c) {
      const double pair[2] = {ccm(r, c).real(), ccm(r, c).imag()};
      out.write(reinterpret_cast<const char*>(pair), sizeof pair);
    }
  }
}

CellFactors read_dense_ccm_factors(const std::filesystem::path& path, double cutoff) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (magic != kCcmMagic) throw InvalidArgument("not a dense CCM file: " + path.string());
  std::int64_t dim = 0;
  std::int64_t off = 0;
  in.read(reinterpret_cast<char*>(&dim), sizeof dim);
  in.read(reinterpret_cast<char*>(&off), sizeof off);
  if (!in || dim <= 0 || dim > (1 << 16)) throw InvalidArgument("bad dense CCM header");
  MatrixXcd m(dim, dim);
  for (std::int64_t r = 0; r < dim; ++r) {
    for (std::int64_t c = 0; c < dim; ++c) {
      double pair[2];
      in.read(reinterpret_cast<char*>(pair), sizeof pair);
      m(r, c) = cdouble(pair[0], pair[1]);
    }
  }
  if (!in) throw InvalidArgument("truncated dense CCM file");
  return factors_from_dense(static_cast<int>(off), m, cutoff);
}

namespace {

void check_beamformers(const std::vector<MatrixXcd>& w, const SymbolFrame& s, const EchoDims& dims) {
  if (static_cast<int>(w.size()) != dims.num_subcarriers || s.num_subcarriers() != dims.num_subcarriers)
    throw InvalidArgument("beamformer/symbol subcarrier count mismatch");
  for (int n = 0; n < dims.num_subcarriers; ++n) {
    if (w[n].rows() != dims.num_tx || w[n].cols() != dims.num_users)
      throw InvalidArgument("beamformer must be N_t x K");
    if (s.per_subcarrier[n].rows() != dims.num_users || s.per_subcarrier[n].cols() != dims.frame_length)
      throw InvalidArgument("symbols must be K x L");
  }
}

}  // namespace

MatrixXcd build_xbar(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols, const EchoDims& dims) {
  check_beamformers(beamformers, symbols, dims);
  const int block = dims.slot_block();
  const int nt = dims.num_tx;
  MatrixXcd xbar = MatrixXcd::Zero(dims.echo_size(), dims.stacked_signature_size());
  for (int n = 0; n < dims.num_subcarriers; ++n) {
    for (int l = 0; l < dims.frame_length; ++l) {
      // I_{N_s N_r} (x) (s^T W^T): row j holds the row vector (W s)^T at columns j*N_t..
      const VectorXcd x = beamformers[n] * symbols.symbol(n, l);
      const int col0 = n * dims.signature_size() + l * block * nt;
      for (int j = 0; j < block; ++j) xbar.block(l * block + j, col0 + j * nt, 1, nt) = x.transpose();
    }
  }
  return xbar;
}

VectorXcd apply_xbar(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols, const VectorXcd& v,
                     const EchoDims& dims) {
  check_beamformers(beamformers, symbols, dims);
  if (v.size() != dims.stacked_signature_size()) throw InvalidArgument("signature length mismatch");
  const int block = dims.slot_block();
  const int nt = dims.num_tx;
  VectorXcd y = VectorXcd::Zero(dims.echo_size());
  for (int n = 0; n < dims.num_subcarriers; ++n) {
    for (int l = 0; l < dims.frame_length; ++l) {
      const VectorXcd x = beamformers[n] * symbols.symbol(n, l);
      const Eigen::Map<const MatrixXcd> vnl(v.data() + n * dims.signature_size() + l * block * nt, nt, block);
      y.segment(l * block, block) += vnl.transpose() * x;
    }
  }
  return y;
}

EchoSimulator::EchoSimulator(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols,
                             const Scatterer& target, const ClutterField& clutter, const OfdmGrid& grid,
                             const ArrayGeometry& geom, double radar_noise)
    : dims_(EchoDims::from(grid, geom, symbols.num_users())), radar_noise_(radar_noise) {
  if (radar_noise < 0.0) throw InvalidArgument("radar noise power must be non-negative");
  clutter.validate(grid.num_subcarriers);
  target_echo_ = apply_xbar(beamformers, symbols, stacked_signature(target, grid, geom), dims_);
  const int sig = dims_.signature_size();
  for (int m = -clutter.max_offset; m <= clutter.max_offset; ++m) {
    for (const auto& p : clutter.cell(m)) {
      Scatterer unit = p;
      unit.amplitudes = VectorXcd::Ones(grid.num_subcarriers);
      const VectorXcd v = stacked_signature(unit, grid, geom);
      PatchEcho pe{p.power, {}};
      if (clutter.amplitude_model == ClutterAmplitudeModel::Flat) {
        pe.echoes.push_back(apply_lifted_shift(m, apply_xbar(beamformers, symbols, v, dims_), dims_));
      } else {
        for (int n = 0; n < grid.num_subcarriers; ++n) {
          VectorXcd vn = VectorXcd::Zero(v.size());
          vn.segment(n * sig, sig) = v.segment(n * sig, sig);
          pe.echoes.push_back(apply_lifted_shift(m, apply_xbar(beamformers, symbols, vn, dims_), dims_));
        }
      }
      patches_.push_back(std::move(pe));
    }
  }
}

VectorXcd EchoSimulator::draw_clutter(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  VectorXcd y = VectorXcd::Zero(dims_.echo_size());
  for (const auto& p : patches_) {
    const double scale = std::sqrt(p.power);
    for (const auto& e : p.echoes) {
      const double re = normal(rng);
      y += (scale * cdouble(re, normal(rng))) * e;
    }
  }
  return y;
}

VectorXcd EchoSimulator::draw_interference(std::mt19937_64& rng) const {
  VectorXcd y = draw_clutter(rng);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * radar_noise_));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double re = normal(rng);
    y(i) += cdouble(re, normal(rng));
  }
  return y;
}

VectorXcd EchoSimulator::draw(std::mt19937_64& rng) const { return target_echo_ + draw_interference(rng); }

VectorXcd simulate_echoes(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols,
                          const Scatterer& target, const ClutterField& clutter, const OfdmGrid& grid,
                          const ArrayGeometry& geom, double radar_noise, std::mt19937_64& rng) {
  return EchoSimulator(beamformers, symbols, target, clutter, grid, geom, radar_noise).draw(rng);
}

}  // namespace dfrc
