// SPDX-License-Identifier: Apache-2.0
//
// Explicit linear operators over the stacked beamformer vector
//   w = [vec(W_1); ...; vec(W_N)]   (column-major vec)
// so that the target echo is T0 w and each clutter factor contributes T_{m,r} w.

#pragma once

#include "dfrc/common.hpp"
#include "dfrc/radar_scene.hpp"
#include "dfrc/signal_model.hpp"

#include <filesystem>
#include <vector>

namespace dfrc {

struct BeamformerSet {
  std::vector<MatrixXcd> per_subcarrier;  // N_t x K each

  int num_subcarriers() const { return static_cast<int>(per_subcarrier.size()); }

  VectorXcd stacked() const;
  static BeamformerSet from_stacked(const VectorXcd& w, int num_subcarriers, int num_tx, int num_users);
};

/// Per-slot matrices V_l (N_t x N_s N_r) with vec(V_l) = the l-th slot block of
/// a single-subcarrier signature.
std::vector<MatrixXcd> reshape_signature(const VectorXcd& v, const EchoDims& dims);

/// [V-bar_1^T (S_1^T (x) I), ..., V-bar_N^T (S_N^T (x) I)] for a stacked
/// signature v; maps w to X-bar v.
MatrixXcd lift_signature(const VectorXcd& stacked, const SymbolFrame& symbols, const EchoDims& dims);

struct TaggedOperator {
  int offset = 0;  // range-cell offset m
  int rank = 0;    // factor index r within the cell
  MatrixXcd op;
};

struct LiftedOperators {
  EchoDims dims;
  MatrixXcd t0;
  std::vector<TaggedOperator> clutter;

  int echo_size() const { return dims.echo_size(); }
  int beamformer_size() const { return dims.beamformer_size(); }
};

MatrixXcd build_t0(const VectorXcd& target_signature, const SymbolFrame& symbols, const EchoDims& dims);

/// J-bar_m applied to the rows of an operator (fast-time delay by m).
MatrixXcd shift_operator_rows(int m, const MatrixXcd& op, const EchoDims& dims);

/// One operator per (cell, factor); independent pairs are built in parallel.
std::vector<TaggedOperator> build_tmr(const InnerCcmFactors& factors, const SymbolFrame& symbols,
                                      const EchoDims& dims);
/// Serial reference for build_tmr.
std::vector<TaggedOperator> build_tmr_serial(const InnerCcmFactors& factors, const SymbolFrame& symbols,
                                             const EchoDims& dims);

LiftedOperators build_lifted_operators(const VectorXcd& target_signature, const InnerCcmFactors& factors,
                                       const SymbolFrame& symbols, const EchoDims& dims);

/// Writes `<prefix>.bin` (t0 then every clutter operator, each row-major
/// complex doubles as (re, im) pairs) and `<prefix>.json` (dims and tags).
void dump_lifted_operators(const LiftedOperators& ops, const std::filesystem::path& prefix);
LiftedOperators load_lifted_operators(const std::filesystem::path& prefix);

}  // namespace dfrc
