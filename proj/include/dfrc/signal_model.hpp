// SPDX-License-Identifier: Apache-2.0
//
// OFDM grid bookkeeping, array steering vectors, fast/slow-time phase vectors
// and data-symbol generation.

#pragma once

#include "dfrc/common.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace dfrc {

/// OFDM numerology. Subcarrier indices are 0-based; `first_subcarrier` places
/// subcarrier 0 of this grid inside a wider band (used when a band is split
/// into independently designed subcarrier sets).
struct OfdmGrid {
  double carrier_freq_hz = 2.4e9;
  double subcarrier_spacing_hz = 0.2e6;
  double symbol_duration_s = 5e-6;
  double cp_duration_s = 2e-6;
  int num_subcarriers = 1;
  int frame_length = 1;
  int samples_per_symbol = 1;
  double wave_speed_m_s = 3e8;
  int first_subcarrier = 0;

  /// Throws InvalidArgument unless all sizes are >= 1, all durations and
  /// frequencies are positive and the spacing-duration product is 1.
  void validate() const;

  /// Absolute RF frequency of subcarrier n (0-based within this grid).
  double subcarrier_freq(int n) const {
    return (first_subcarrier + n) * subcarrier_spacing_hz + carrier_freq_hz;
  }
  double slot_duration() const { return symbol_duration_s + cp_duration_s; }

  /// Grid restricted to `count` subcarriers starting at local index `first`.
  OfdmGrid subset(int first, int count) const;
};

struct ArrayGeometry {
  int num_tx = 1;
  int num_rx = 1;
  double tx_spacing_m = 0.0625;
  double rx_spacing_m = 0.0625;

  void validate() const;
};

/// Per-subcarrier K x L symbol matrices S_n = [s_n[1], ..., s_n[L]].
struct SymbolFrame {
  std::vector<MatrixXcd> per_subcarrier;

  int num_subcarriers() const { return static_cast<int>(per_subcarrier.size()); }
  int num_users() const { return per_subcarrier.empty() ? 0 : static_cast<int>(per_subcarrier[0].rows()); }
  int frame_length() const { return per_subcarrier.empty() ? 0 : static_cast<int>(per_subcarrier[0].cols()); }
  VectorXcd symbol(int n, int l) const { return per_subcarrier.at(n).col(l); }

  SymbolFrame subset(int first, int count) const;
};

enum class Constellation { Qpsk, Bpsk, Psk8, Gaussian };

Constellation parse_constellation(std::string_view name);
std::string_view constellation_name(Constellation c);

/// Transmit steering vector a(theta, f): entry i is exp(-j 2 pi i d_t sin(theta) f / c).
VectorXcd steering_tx(double theta_rad, double freq_hz, const ArrayGeometry& geom, double wave_speed);
/// Receive steering vector b(theta, f), same form with d_r and N_r.
VectorXcd steering_rx(double theta_rad, double freq_hz, const ArrayGeometry& geom, double wave_speed);

/// Fast-time phases over the N_s samples of one symbol: entry i (1-based) is
/// exp(j 2 pi f (i / N_s) T_s).
VectorXcd fast_time_phase(double freq_hz, const OfdmGrid& grid);

/// Slow-time phases over the L slots: entry l (1-based) is exp(j 2 pi f (l-1) (T_s + T_cp)).
VectorXcd slow_time_phase(double freq_hz, const OfdmGrid& grid);

/// Two-way Doppler shift 2 v f / c.
double doppler_shift(double speed_m_s, double freq_hz, double wave_speed);

/// Baseband frequency of the echo on subcarrier n: offset from the carrier
/// plus the Doppler shift at that subcarrier's RF frequency.
double baseband_freq(int n, double speed_m_s, const OfdmGrid& grid);

/// Unit-average-power symbols for K users. Subcarrier n draws from its own
/// stream, seeded from (seed, first_subcarrier + n), so a wider grid extends a
/// narrower one without changing the shared subcarriers.
SymbolFrame generate_symbols(int num_users, const OfdmGrid& grid, Constellation constellation,
                             std::uint64_t seed);

}  // namespace dfrc
