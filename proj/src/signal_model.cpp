// SPDX-License-Identifier: Apache-2.0

#include "dfrc/signal_model.hpp"

#include <random>
#include <string>

namespace dfrc {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite");
}

VectorXcd steering(int count, double spacing, double theta, double freq, double c) {
  require_finite(theta, "steering angle");
  require_finite(freq, "steering frequency");
  if (!(freq > 0.0)) throw InvalidArgument("steering frequency must be positive");
  const double step = -2.0 * kPi * spacing * std::sin(theta) * freq / c;
  VectorXcd v(count);
  for (int i = 0; i < count; ++i) v(i) = std::polar(1.0, step * i);
  return v;
}

constexpr std::uint64_t kSymbolStream = 0x53594d42;  // "SYMB"

}  // namespace

void OfdmGrid::validate() const {
  if (num_subcarriers < 1 || frame_length < 1 || samples_per_symbol < 1)
    throw InvalidArgument("OFDM grid sizes must be >= 1");
  if (first_subcarrier < 0) throw InvalidArgument("first_subcarrier must be >= 0");
  for (double v : {carrier_freq_hz, subcarrier_spacing_hz, symbol_duration_s, cp_duration_s, wave_speed_m_s}) {
    if (!std::isfinite(v) || !(v > 0.0))
      throw InvalidArgument("OFDM grid durations and frequencies must be positive and finite");
  }
  if (std::abs(subcarrier_spacing_hz * symbol_duration_s - 1.0) > 1e-9)
    throw InvalidArgument("subcarrier spacing times symbol duration must equal 1");
}

OfdmGrid OfdmGrid::subset(int first, int count) const {
  if (first < 0 || count < 1 || first + count > num_subcarriers)
    throw InvalidArgument("subcarrier subset out of range");
  OfdmGrid g = *this;
  g.first_subcarrier = first_subcarrier + first;
  g.num_subcarriers = count;
  return g;
}

void ArrayGeometry::validate() const {
  if (num_tx < 1 || num_rx < 1) throw InvalidArgument("antenna counts must be >= 1");
  if (!(tx_spacing_m > 0.0) || !(rx_spacing_m > 0.0) || !std::isfinite(tx_spacing_m) ||
      !std::isfinite(rx_spacing_m))
    throw InvalidArgument("antenna spacings must be positive");
}

SymbolFrame SymbolFrame::subset(int first, int count) const {
  if (first < 0 || count < 1 || first + count > num_subcarriers())
    throw InvalidArgument("symbol frame subset out of range");
  SymbolFrame out;
  out.per_subcarrier.assign(per_subcarrier.begin() + first, per_subcarrier.begin() + first + count);
  return out;
}

Constellation parse_constellation(std::string_view name) {
  if (name == "qpsk") return Constellation::Qpsk;
  if (name == "bpsk") return Constellation::Bpsk;
  if (name == "8psk") return Constellation::Psk8;
  if (name == "gaussian") return Constellation::Gaussian;
  throw InvalidArgument("unknown constellation '" + std::string(name) + "'");
}

std::string_view constellation_name(Constellation c) {
  switch (c) {
    case Constellation::Qpsk: return "qpsk";
    case Constellation::Bpsk: return "bpsk";
    case Constellation::Psk8: return "8psk";
    case Constellation::Gaussian: return "gaussian";
  }
  return "qpsk";
}

VectorXcd steering_tx(double theta_rad, double freq_hz, const ArrayGeometry& geom, double wave_speed) {
  return steering(geom.num_tx, geom.tx_spacing_m, theta_rad, freq_hz, wave_speed);
}

VectorXcd steering_rx(double theta_rad, double freq_hz, const ArrayGeometry& geom, double wave_speed) {
  return steering(geom.num_rx, geom.rx_spacing_m, theta_rad, freq_hz, wave_speed);
}

VectorXcd fast_time_phase(double freq_hz, const OfdmGrid& grid) {
  require_finite(freq_hz, "fast-time frequency");
  const int ns = grid.samples_per_symbol;
  VectorXcd p(ns);
  for (int i = 0; i < ns; ++i) {
    const double t = static_cast<double>(i + 1) / ns * grid.symbol_duration_s;
    p(i) = std::polar(1.0, 2.0 * kPi * freq_hz * t);
  }
  return p;
}

VectorXcd slow_time_phase(double freq_hz, const OfdmGrid& grid) {
  require_finite(freq_hz, "slow-time frequency");
  VectorXcd q(grid.frame_length);
  for (int l = 0; l < grid.frame_length; ++l) q(l) = std::polar(1.0, 2.0 * kPi * freq_hz * l * grid.slot_duration());
  return q;
}

double doppler_shift(double speed_m_s, double freq_hz, double wave_speed) {
  return 2.0 * speed_m_s * freq_hz / wave_speed;
}

double baseband_freq(int n, double speed_m_s, const OfdmGrid& grid) {
  const double fn = grid.subcarrier_freq(n);
  return (grid.first_subcarrier + n) * grid.subcarrier_spacing_hz + doppler_shift(speed_m_s, fn, grid.wave_speed_m_s);
}

SymbolFrame generate_symbols(int num_users, const OfdmGrid& grid, Constellation constellation,
                             std::uint64_t seed) {
  if (num_users < 1) throw InvalidArgument("number of users must be >= 1");
  SymbolFrame frame;
  frame.per_subcarrier.reserve(grid.num_subcarriers);
  for (int n = 0; n < grid.num_subcarriers; ++n) {
    std::mt19937_64 rng(derive_seed(seed, kSymbolStream, static_cast<std::uint64_t>(grid.first_subcarrier + n)));
    MatrixXcd s(num_users, grid.frame_length);
    // Column-major fill: slot by slot, user by user.
    for (int l = 0; l < grid.frame_length; ++l) {
      for (int k = 0; k < num_users; ++k) {
        switch (constellation) {
          case Constellation::Qpsk: {
            const auto bits = rng() >> 62;
            s(k, l) = cdouble((bits & 1U) ? -1.0 : 1.0, (bits & 2U) ? -1.0 : 1.0) / std::sqrt(2.0);
            break;
          }
          case Constellation::Bpsk:
            s(k, l) = (rng() >> 63) ? -1.0 : 1.0;
            break;
          case Constellation::Psk8:
            s(k, l) = std::polar(1.0, 2.0 * kPi * static_cast<double>(rng() >> 61) / 8.0);
            break;
          case Constellation::Gaussian: {
            std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
            const double re = normal(rng);
            s(k, l) = cdouble(re, normal(rng));
            break;
          }
        }
      }
    }
    frame.per_subcarrier.push_back(std::move(s));
  }
  return frame;
}

}  // namespace dfrc
