// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel kernels over the clutter operator list. Each parallel kernel
// has a serial reference computing the same per-operator expression; the two
// agree bit for bit because work is split over independent output columns.
// gram() and gram_serial() use different summation orders and agree to
// rounding only.

#pragma once

#include "dfrc/lifting.hpp"

namespace dfrc::kernels {

/// Columns T_i w for every clutter operator.
MatrixXcd clutter_returns(const LiftedOperators& ops, const VectorXcd& w);
MatrixXcd clutter_returns_serial(const LiftedOperators& ops, const VectorXcd& w);

/// Columns T_i^H g for every clutter operator.
MatrixXcd clutter_backprojections(const LiftedOperators& ops, const VectorXcd& g);
MatrixXcd clutter_backprojections_serial(const LiftedOperators& ops, const VectorXcd& g);

/// cols * cols^H + ridge * I.
MatrixXcd gram(const MatrixXcd& cols, double ridge);

/// Rank-one accumulation sum_i c_i c_i^H + ridge I; serial reference for gram().
MatrixXcd gram_serial(const MatrixXcd& cols, double ridge);

}  // namespace dfrc::kernels
