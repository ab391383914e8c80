// SPDX-License-Identifier: Apache-2.0

#include "dfrc/comm_channel.hpp"

namespace dfrc {

void TapChannel::validate(int cp_samples) const {
  if (taps.empty()) throw InvalidArgument("channel has no users");
  const int d = num_taps();
  const int nt = num_tx();
  if (d < 1) throw InvalidArgument("channel needs at least one tap");
  if (nt < 1) throw InvalidArgument("channel taps must be non-empty vectors");
  for (const auto& user : taps) {
    if (static_cast<int>(user.size()) != d) throw InvalidArgument("all users need the same tap count");
    for (const auto& tap : user)
      if (tap.size() != nt) throw InvalidArgument("tap length mismatch");
  }
  if (cp_samples > 0 && d > cp_samples) throw InvalidArgument("tap count exceeds the cyclic prefix length");
  if (!(noise_power > 0.0)) throw InvalidArgument("user noise power must be positive");
}

FreqChannel FreqChannel::subset(int first, int count) const {
  if (first < 0 || count < 1 || first + count > num_subcarriers())
    throw InvalidArgument("channel subset out of range");
  FreqChannel out;
  out.noise_power = noise_power;
  out.h.assign(h.begin() + first, h.begin() + first + count);
  return out;
}

FreqChannel dft_response(const TapChannel& channel, const OfdmGrid& grid) {
  channel.validate();
  if (grid.first_subcarrier != 0) throw InvalidArgument("dft_response expects a full-band grid");
  const int n_sc = grid.num_subcarriers;
  const int d_taps = channel.num_taps();
  if (d_taps > n_sc) throw InvalidArgument("tap count exceeds the number of subcarriers");

  FreqChannel out;
  out.noise_power = channel.noise_power;
  out.h.resize(n_sc);
  for (int n = 0; n < n_sc; ++n) {
    out.h[n].reserve(channel.num_users());
    for (const auto& user : channel.taps) {
      VectorXcd acc = VectorXcd::Zero(channel.num_tx());
      for (int d = 0; d < d_taps; ++d) {
        const auto idx = static_cast<double>((static_cast<long>(n) * d) % n_sc);
        acc += std::polar(1.0, -2.0 * kPi * idx / n_sc) * user[d];
      }
      out.h[n].push_back(std::move(acc));
    }
  }
  return out;
}

double comm_sinr(const MatrixXcd& beamformer, const VectorXcd& channel, int user, double noise_power) {
  if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
  if (channel.size() != beamformer.rows()) throw InvalidArgument("channel/beamformer size mismatch");
  if (user < 0 || user >= beamformer.cols()) throw InvalidArgument("user index out of range");
  const Eigen::RowVectorXcd gains = channel.adjoint() * beamformer;
  double interference = 0.0;
  for (Eigen::Index j = 0; j < gains.size(); ++j)
    if (j != user) interference += std::norm(gains(j));
  return std::norm(gains(user)) / (interference + noise_power);
}

TapChannel random_tap_channel(int num_users, int num_taps, int num_tx, double noise_power, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  TapChannel ch;
  ch.noise_power = noise_power;
  ch.taps.resize(num_users);
  for (auto& user : ch.taps) {
    user.resize(num_taps);
    for (auto& tap : user) {
      tap.resize(num_tx);
      for (int i = 0; i < num_tx; ++i) {
        const double re = normal(rng);
        tap(i) = cdouble(re, normal(rng));
      }
    }
  }
  ch.validate();
  return ch;
}

}  // namespace dfrc
