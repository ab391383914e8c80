// SPDX-License-Identifier: Apache-2.0
//
// Wideband multi-tap downlink channel, its per-subcarrier response and the
// per-user communication SINR.

#pragma once

#include "dfrc/common.hpp"
#include "dfrc/signal_model.hpp"

#include <random>
#include <vector>

namespace dfrc {

/// D-tap impulse response per user: taps[k][d] is the N_t-vector h_{k,d}.
struct TapChannel {
  std::vector<std::vector<VectorXcd>> taps;
  double noise_power = 0.01;

  int num_users() const { return static_cast<int>(taps.size()); }
  int num_taps() const { return taps.empty() ? 0 : static_cast<int>(taps[0].size()); }
  int num_tx() const { return taps.empty() || taps[0].empty() ? 0 : static_cast<int>(taps[0][0].size()); }

  /// Throws unless every user has the same D >= 1 taps of equal length and the
  /// noise power is positive. When `cp_samples` > 0, also requires D <= cp_samples.
  void validate(int cp_samples = 0) const;
};

/// Frequency-domain channel: h[n][k] is the N_t-vector for subcarrier n, user k.
struct FreqChannel {
  std::vector<std::vector<VectorXcd>> h;
  double noise_power = 0.01;

  int num_subcarriers() const { return static_cast<int>(h.size()); }
  int num_users() const { return h.empty() ? 0 : static_cast<int>(h[0].size()); }

  FreqChannel subset(int first, int count) const;
};

/// h~_{n,k} = sum_d h_{k,d} exp(-j 2 pi n d / N), the N-point DFT of the taps
/// (0-based n, d). Requires D <= N and a full-band grid (first_subcarrier 0);
/// responses for subcarrier sets are sliced from the full-band result.
FreqChannel dft_response(const TapChannel& channel, const OfdmGrid& grid);

/// |h^H w_k|^2 / (sum_{j != k} |h^H w_j|^2 + sigma^2).
double comm_sinr(const MatrixXcd& beamformer, const VectorXcd& channel, int user, double noise_power);

/// i.i.d. CN(0, I) taps.
TapChannel random_tap_channel(int num_users, int num_taps, int num_tx, double noise_power, std::mt19937_64& rng);

}  // namespace dfrc
