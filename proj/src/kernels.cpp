// SPDX-License-Identifier: Apache-2.0

#include "dfrc/kernels.hpp"

namespace dfrc::kernels {

namespace {

constexpr long kParallelThreshold = 16;

void check_width(const LiftedOperators& ops, const VectorXcd& w) {
  if (w.size() != ops.beamformer_size()) throw InvalidArgument("beamformer vector length mismatch");
}

}  // namespace

MatrixXcd clutter_returns_serial(const LiftedOperators& ops, const VectorXcd& w) {
  check_width(ops, w);
  MatrixXcd y(ops.echo_size(), static_cast<Eigen::Index>(ops.clutter.size()));
  for (std::size_t i = 0; i < ops.clutter.size(); ++i) y.col(i).noalias() = ops.clutter[i].op * w;
  return y;
}

MatrixXcd clutter_returns(const LiftedOperators& ops, const VectorXcd& w) {
  check_width(ops, w);
  const auto count = static_cast<long>(ops.clutter.size());
  MatrixXcd y(ops.echo_size(), count);
#pragma omp parallel for schedule(static) if (count > kParallelThreshold)
  for (long i = 0; i < count; ++i) y.col(i).noalias() = ops.clutter[i].op * w;
  return y;
}

MatrixXcd clutter_backprojections_serial(const LiftedOperators& ops, const VectorXcd& g) {
  if (g.size() != ops.echo_size()) throw InvalidArgument("echo vector length mismatch");
  MatrixXcd z(ops.beamformer_size(), static_cast<Eigen::Index>(ops.clutter.size()));
  for (std::size_t i = 0; i < ops.clutter.size(); ++i) z.col(i).noalias() = ops.clutter[i].op.adjoint() * g;
  return z;
}

MatrixXcd clutter_backprojections(const LiftedOperators& ops, const VectorXcd& g) {
  if (g.size() != ops.echo_size()) throw InvalidArgument("echo vector length mismatch");
  const auto count = static_cast<long>(ops.clutter.size());
  MatrixXcd z(ops.beamformer_size(), count);
#pragma omp parallel for schedule(static) if (count > kParallelThreshold)
  for (long i = 0; i < count; ++i) z.col(i).noalias() = ops.clutter[i].op.adjoint() * g;
  return z;
}

MatrixXcd gram(const MatrixXcd& cols, double ridge) {
  MatrixXcd out = MatrixXcd::Identity(cols.rows(), cols.rows()) * ridge;
  out.selfadjointView<Eigen::Lower>().rankUpdate(cols);
  out.triangularView<Eigen::StrictlyUpper>() = out.adjoint();
  return out;
}

MatrixXcd gram_serial(const MatrixXcd& cols, double ridge) {
  MatrixXcd out = MatrixXcd::Identity(cols.rows(), cols.rows()) * ridge;
  for (Eigen::Index i = 0; i < cols.cols(); ++i) out.noalias() += cols.col(i) * cols.col(i).adjoint();
  return out;
}

}  // namespace dfrc::kernels
