// SPDX-License-Identifier: Apache-2.0
//
// Target and clutter geometry, space-time signatures, range-shift matrices,
// inner clutter-covariance factors and the unlifted (direct) echo model.
//
// Signature layout: for one subcarrier the vector has L * N_s * N_r * N_t
// entries ordered slot-major, then fast-time sample, then receive antenna,
// then transmit antenna (the transmit index varies fastest):
//   index((l, i, r, t)) = ((l * N_s + i) * N_r + r) * N_t + t.
// Echo vectors have L * N_s * N_r entries with the same ordering minus t.

#pragma once

#include "dfrc/common.hpp"
#include "dfrc/signal_model.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace dfrc {

struct EchoDims {
  int num_subcarriers = 1;
  int frame_length = 1;
  int samples_per_symbol = 1;
  int num_rx = 1;
  int num_tx = 1;
  int num_users = 1;

  static EchoDims from(const OfdmGrid& grid, const ArrayGeometry& geom, int num_users);

  int echo_size() const { return frame_length * samples_per_symbol * num_rx; }
  int slot_block() const { return samples_per_symbol * num_rx; }
  int signature_size() const { return frame_length * samples_per_symbol * num_rx * num_tx; }
  int stacked_signature_size() const { return num_subcarriers * signature_size(); }
  int beamformer_size() const { return num_subcarriers * num_tx * num_users; }
};

struct Scatterer {
  double azimuth_rad = 0.0;
  double speed_m_s = 0.0;
  VectorXcd amplitudes;  // nominal alpha per subcarrier
  double power = 1.0;    // E{|alpha|^2}
  int range_offset = 0;
};

/// Nominal target with deterministic zero-phase amplitudes sqrt(power).
Scatterer make_target(double azimuth_rad, double speed_m_s, double power, int num_subcarriers);

enum class ClutterAmplitudeModel {
  Flat,           // one complex amplitude per patch shared by all subcarriers
  PerSubcarrier,  // independent amplitudes per (patch, subcarrier)
};

struct ClutterField {
  int max_offset = 0;                        // M; cells cover m = -M..M
  std::vector<std::vector<Scatterer>> cells;  // cells[m + M]
  ClutterAmplitudeModel amplitude_model = ClutterAmplitudeModel::Flat;

  int num_cells() const { return static_cast<int>(cells.size()); }
  const std::vector<Scatterer>& cell(int m) const { return cells.at(m + max_offset); }
  void validate(int num_subcarriers) const;
  ClutterField subset(int first, int count) const;
};

struct ClutterSpec {
  int max_offset = 2;
  int patches_per_cell = 30;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;
  double speed_min_m_s = 0.0;
  double speed_max_m_s = 50.0;
  double power = 0.1;
  ClutterAmplitudeModel amplitude_model = ClutterAmplitudeModel::Flat;
};

/// Patches uniformly distributed in azimuth (min, max] and speed (min, max].
ClutterField random_clutter_field(const ClutterSpec& spec, int num_subcarriers, std::mt19937_64& rng);

/// Factors u_{m,r} of one cell's inner CCM, M_m = sum_r u u^H.
struct CellFactors {
  int offset = 0;
  std::vector<VectorXcd> factors;
};
using InnerCcmFactors = std::vector<CellFactors>;

/// alpha_n * q(f_b) (x) p(f_b) (x) b(theta, f_n) (x) a(theta, f_n) for subcarrier n (0-based).
VectorXcd space_time_signature(const Scatterer& s, int n, const OfdmGrid& grid, const ArrayGeometry& geom);

/// Signatures of all subcarriers stacked.
VectorXcd stacked_signature(const Scatterer& s, const OfdmGrid& grid, const ArrayGeometry& geom);

/// J_m(i, j) = 1 iff i - j + m = 0. Zero matrix when |m| >= N_s.
MatrixXd shift_matrix(int m, int samples_per_symbol);

/// I_L (x) (J_m^T (x) I_{N_r}), dense.
MatrixXd lifted_shift(int m, int samples_per_symbol, int num_rx, int frame_length);

/// Applies the lifted shift without forming it: every slot's fast-time
/// samples are delayed by m (zero-filled).
VectorXcd apply_lifted_shift(int m, const VectorXcd& echo, const EchoDims& dims);

/// Factors of E{sum_patches v v^H} for one cell under the amplitude model.
CellFactors inner_ccm_factors(int offset, const std::vector<Scatterer>& patches, ClutterAmplitudeModel model,
                              const OfdmGrid& grid, const ArrayGeometry& geom);

InnerCcmFactors clutter_factors(const ClutterField& field, const OfdmGrid& grid, const ArrayGeometry& geom);

/// Factors of an externally supplied dense inner CCM via eigendecomposition.
/// Eigenvalues below cutoff * max eigenvalue are dropped. Throws when the
/// matrix is not Hermitian positive semidefinite within tolerance.
CellFactors factors_from_dense(int offset, const MatrixXcd& ccm, double cutoff = 1e-10);

/// Sum_r u u^H, dense.
MatrixXcd dense_ccm(const CellFactors& cell, int dim);

/// Binary dense-CCM file: 8-byte magic "DFRCCCM1", int64 dimension, int64 range
/// offset, then dim * dim complex doubles row-major as (re, im) pairs, little endian.
void write_dense_ccm(const std::filesystem::path& path, int offset, const MatrixXcd& ccm);
CellFactors read_dense_ccm_factors(const std::filesystem::path& path, double cutoff = 1e-10);

// -- Unlifted echo model --------------------------------------------------

/// Dense X-bar (echo_size x stacked_signature_size); oracle use only.
MatrixXcd build_xbar(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols, const EchoDims& dims);

/// X-bar v without forming X-bar: slot by slot, V_{n,l}^T W_n s_n[l].
VectorXcd apply_xbar(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols, const VectorXcd& v,
                     const EchoDims& dims);

/// Draws echoes y0 + y_c + z with clutter amplitudes drawn per the field's
/// amplitude model and noise of variance `radar_noise` per entry. Unit-amplitude
/// patch echoes are precomputed once, so repeated draws are cheap.
class EchoSimulator {
 public:
  EchoSimulator(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols, const Scatterer& target,
                const ClutterField& clutter, const OfdmGrid& grid, const ArrayGeometry& geom, double radar_noise);

  const VectorXcd& target_echo() const { return target_echo_; }
  /// Clutter-only component of one draw.
  VectorXcd draw_clutter(std::mt19937_64& rng) const;
  /// Clutter plus noise of one draw.
  VectorXcd draw_interference(std::mt19937_64& rng) const;
  /// Full received vector of one draw.
  VectorXcd draw(std::mt19937_64& rng) const;

 private:
  struct PatchEcho {
    double power;
    std::vector<VectorXcd> echoes;  // one per amplitude draw slot
  };
  EchoDims dims_;
  double radar_noise_;
  VectorXcd target_echo_;
  std::vector<PatchEcho> patches_;
};

/// One draw of the received echo vector.
VectorXcd simulate_echoes(const std::vector<MatrixXcd>& beamformers, const SymbolFrame& symbols,
                          const Scatterer& target, const ClutterField& clutter, const OfdmGrid& grid,
                          const ArrayGeometry& geom, double radar_noise, std::mt19937_64& rng);

}  // namespace dfrc
