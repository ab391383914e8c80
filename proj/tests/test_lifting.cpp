// SPDX-License-Identifier: Apache-2.0

#include "dfrc/kernels.hpp"
#include "dfrc/lifting.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace dfrc;

namespace {

struct Setup {
  OfdmGrid grid;
  ArrayGeometry geom;
  EchoDims dims;
  SymbolFrame symbols;
  VectorXcd target;
  ClutterField field;
  InnerCcmFactors factors;
};

Setup make_setup(int n, int l, int ns, int nr, int nt, int k, ClutterAmplitudeModel model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Setup s;
  s.grid.num_subcarriers = n;
  s.grid.frame_length = l;
  s.grid.samples_per_symbol = ns;
  s.geom.num_rx = nr;
  s.geom.num_tx = nt;
  s.dims = EchoDims::from(s.grid, s.geom, k);
  s.symbols = generate_symbols(k, s.grid, Constellation::Qpsk, seed + 1);
  s.target = stacked_signature(make_target(deg_to_rad(15.0), 20.0, 1.0, n), s.grid, s.geom);
  ClutterSpec spec;
  spec.max_offset = 1;
  spec.patches_per_cell = 4;
  spec.amplitude_model = model;
  s.field = random_clutter_field(spec, n, rng);
  s.factors = clutter_factors(s.field, s.grid, s.geom);
  return s;
}

}  // namespace

TEST_SUITE("lifting") {
  TEST_CASE("stacked beamformer layout and round trip") {
    std::mt19937_64 rng(1);
    BeamformerSet set;
    for (int n = 0; n < 3; ++n) set.per_subcarrier.push_back(test::random_matrix(rng, 4, 2));
    const VectorXcd w = set.stacked();
    REQUIRE(w.size() == 24);
    for (int n = 0; n < 3; ++n)
      for (int k = 0; k < 2; ++k)
        for (int t = 0; t < 4; ++t) CHECK(w(n * 8 + k * 4 + t) == set.per_subcarrier[n](t, k));
    const auto back = BeamformerSet::from_stacked(w, 3, 4, 2);
    for (int n = 0; n < 3; ++n) CHECK(back.per_subcarrier[n] == set.per_subcarrier[n]);
    CHECK_THROWS_AS(BeamformerSet::from_stacked(w, 3, 4, 3), InvalidArgument);
  }

  TEST_CASE("per-slot reshape picks the right entries") {
    std::mt19937_64 rng(2);
    EchoDims d;
    d.frame_length = 3;
    d.samples_per_symbol = 2;
    d.num_rx = 2;
    d.num_tx = 3;
    const VectorXcd v = test::random_vector(rng, d.signature_size());
    const auto slots = reshape_signature(v, d);
    REQUIRE(slots.size() == 3);
    for (int l = 0; l < 3; ++l) {
      CHECK(slots[l].rows() == 3);
      CHECK(slots[l].cols() == 4);
      for (int i = 0; i < 2; ++i)
        for (int r = 0; r < 2; ++r)
          for (int t = 0; t < 3; ++t) CHECK(slots[l](t, i * 2 + r) == v(((l * 2 + i) * 2 + r) * 3 + t));
    }
    CHECK_THROWS_AS(reshape_signature(v.head(5), d), InvalidArgument);
  }

  TEST_CASE("target operator reproduces the unlifted echo") {
    std::mt19937_64 rng(3);
    const auto s = make_setup(3, 3, 2, 2, 3, 2, ClutterAmplitudeModel::Flat, 30);
    const MatrixXcd t0 = build_t0(s.target, s.symbols, s.dims);
    CHECK(t0.rows() == s.dims.echo_size());
    CHECK(t0.cols() == s.dims.beamformer_size());
    for (int trial = 0; trial < 5; ++trial) {
      const VectorXcd w = test::random_vector(rng, s.dims.beamformer_size());
      const auto set = BeamformerSet::from_stacked(w, 3, 3, 2);
      const VectorXcd want = build_xbar(set.per_subcarrier, s.symbols, s.dims) * s.target;
      CHECK(test::rel_err(VectorXcd(t0 * w), want) < 1e-12);
    }
  }

  TEST_CASE("clutter operators reproduce the clutter covariance") {
    std::mt19937_64 rng(4);
    for (auto model : {ClutterAmplitudeModel::Flat, ClutterAmplitudeModel::PerSubcarrier}) {
      const auto s = make_setup(2, 2, 3, 2, 2, 2, model, 40);
      const auto tmr = build_tmr(s.factors, s.symbols, s.dims);
      const VectorXcd w = test::random_vector(rng, s.dims.beamformer_size());
      const auto set = BeamformerSet::from_stacked(w, 2, 2, 2);
      const MatrixXcd xbar = build_xbar(set.per_subcarrier, s.symbols, s.dims);

      MatrixXcd want = MatrixXcd::Zero(s.dims.echo_size(), s.dims.echo_size());
      for (const auto& cell : s.factors) {
        const MatrixXcd jx =
            lifted_shift(cell.offset, s.dims.samples_per_symbol, s.dims.num_rx, s.dims.frame_length).cast<cdouble>() *
            xbar;
        want += jx * dense_ccm(cell, s.dims.stacked_signature_size()) * jx.adjoint();
      }
      MatrixXcd got = MatrixXcd::Zero(s.dims.echo_size(), s.dims.echo_size());
      for (const auto& t : tmr) {
        const VectorXcd c = t.op * w;
        got += c * c.adjoint();
      }
      CHECK(test::rel_err(got, want) < 1e-11);
    }
  }

  TEST_CASE("row shift matches the explicit lifted shift matrix") {
    std::mt19937_64 rng(5);
    EchoDims d;
    d.frame_length = 2;
    d.samples_per_symbol = 4;
    d.num_rx = 2;
    const MatrixXcd op = test::random_matrix(rng, d.echo_size(), 5);
    for (int m = -4; m <= 4; ++m) {
      const MatrixXcd want = lifted_shift(m, 4, 2, 2).cast<cdouble>() * op;
      CHECK((shift_operator_rows(m, op, d) - want).norm() == 0.0);
    }
    CHECK_THROWS_AS(shift_operator_rows(1, op.topRows(3), d), InvalidArgument);
  }

  TEST_CASE("parallel operator build equals the serial reference") {
    const auto s = make_setup(2, 3, 2, 2, 2, 1, ClutterAmplitudeModel::PerSubcarrier, 50);
    const auto par = build_tmr(s.factors, s.symbols, s.dims);
    const auto ser = build_tmr_serial(s.factors, s.symbols, s.dims);
    REQUIRE(par.size() == ser.size());
    REQUIRE(par.size() > 8);
    for (std::size_t i = 0; i < par.size(); ++i) {
      CHECK(par[i].offset == ser[i].offset);
      CHECK(par[i].rank == ser[i].rank);
      CHECK(par[i].op == ser[i].op);
    }
  }

  TEST_CASE("kernels agree with their serial references") {
    std::mt19937_64 rng(6);
    const auto s = make_setup(2, 3, 2, 2, 2, 2, ClutterAmplitudeModel::PerSubcarrier, 60);
    const auto ops = build_lifted_operators(s.target, s.factors, s.symbols, s.dims);
    const VectorXcd w = test::random_vector(rng, ops.beamformer_size());
    const VectorXcd g = test::random_vector(rng, ops.echo_size());
    const MatrixXcd ret = kernels::clutter_returns(ops, w);
    CHECK(ret == kernels::clutter_returns_serial(ops, w));
    CHECK(kernels::clutter_backprojections(ops, g) == kernels::clutter_backprojections_serial(ops, g));
    for (std::size_t i = 0; i < ops.clutter.size(); ++i)
      CHECK((ret.col(static_cast<Eigen::Index>(i)) - ops.clutter[i].op * w).norm() <= 1e-12 * ret.norm());

    const MatrixXcd a = kernels::gram(ret, 0.5);
    const MatrixXcd b = kernels::gram_serial(ret, 0.5);
    CHECK(test::rel_err(a, b) < 1e-13);
    CHECK(a == MatrixXcd(a.adjoint()));
    const MatrixXcd direct = ret * ret.adjoint() + 0.5 * MatrixXcd::Identity(ret.rows(), ret.rows());
    CHECK(test::rel_err(a, direct) < 1e-13);
  }

  TEST_CASE("operator dump round trip") {
    const auto s = make_setup(2, 2, 2, 2, 2, 1, ClutterAmplitudeModel::Flat, 70);
    const auto ops = build_lifted_operators(s.target, s.factors, s.symbols, s.dims);
    const auto prefix = std::filesystem::temp_directory_path() / "dfrc_test_ops";
    dump_lifted_operators(ops, prefix);
    const auto back = load_lifted_operators(prefix);
    CHECK(back.dims.echo_size() == ops.dims.echo_size());
    CHECK(back.dims.beamformer_size() == ops.dims.beamformer_size());
    CHECK(back.t0 == ops.t0);
    REQUIRE(back.clutter.size() == ops.clutter.size());
    for (std::size_t i = 0; i < ops.clutter.size(); ++i) {
      CHECK(back.clutter[i].offset == ops.clutter[i].offset);
      CHECK(back.clutter[i].rank == ops.clutter[i].rank);
      CHECK(back.clutter[i].op == ops.clutter[i].op);
    }
    std::filesystem::remove(std::filesystem::path(prefix.string() + ".bin"));
    std::filesystem::remove(std::filesystem::path(prefix.string() + ".json"));
  }

  TEST_CASE("mismatched symbol frame is rejected") {
    const auto s = make_setup(2, 2, 2, 2, 2, 2, ClutterAmplitudeModel::Flat, 80);
    EchoDims d = s.dims;
    d.num_users = 3;
    CHECK_THROWS_AS(build_t0(s.target, s.symbols, d), InvalidArgument);
    CHECK_THROWS_AS(build_t0(s.target.head(4), s.symbols, s.dims), InvalidArgument);
  }
}
