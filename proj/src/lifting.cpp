// SPDX-License-Identifier: Apache-2.0

#include "dfrc/lifting.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace dfrc {

VectorXcd BeamformerSet::stacked() const {
  Eigen::Index total = 0;
  for (const auto& w : per_subcarrier) total += w.size();
  VectorXcd out(total);
  Eigen::Index pos = 0;
  for (const auto& w : per_subcarrier) {
    out.segment(pos, w.size()) = Eigen::Map<const VectorXcd>(w.data(), w.size());
    pos += w.size();
  }
  return out;
}

BeamformerSet BeamformerSet::from_stacked(const VectorXcd& w, int num_subcarriers, int num_tx, int num_users) {
  const Eigen::Index block = static_cast<Eigen::Index>(num_tx) * num_users;
  if (w.size() != block * num_subcarriers) throw InvalidArgument("stacked beamformer length mismatch");
  BeamformerSet set;
  for (int n = 0; n < num_subcarriers; ++n)
    set.per_subcarrier.push_back(Eigen::Map<const MatrixXcd>(w.data() + n * block, num_tx, num_users));
  return set;
}

std::vector<MatrixXcd> reshape_signature(const VectorXcd& v, const EchoDims& dims) {
  if (v.size() != dims.signature_size()) throw InvalidArgument("signature length is not L * N_s * N_r * N_t");
  const int block = dims.slot_block() * dims.num_tx;
  std::vector<MatrixXcd> out;
  out.reserve(dims.frame_length);
  for (int l = 0; l < dims.frame_length; ++l)
    out.push_back(Eigen::Map<const MatrixXcd>(v.data() + l * block, dims.num_tx, dims.slot_block()));
  return out;
}

MatrixXcd lift_signature(const VectorXcd& stacked, const SymbolFrame& symbols, const EchoDims& dims) {
  if (stacked.size() != dims.stacked_signature_size()) throw InvalidArgument("stacked signature length mismatch");
  if (symbols.num_subcarriers() != dims.num_subcarriers || symbols.num_users() != dims.num_users ||
      symbols.frame_length() != dims.frame_length)
    throw InvalidArgument("symbol frame does not match dimensions");
  const int nt = dims.num_tx;
  const int k_users = dims.num_users;
  const int block = dims.slot_block();
  MatrixXcd out = MatrixXcd::Zero(dims.echo_size(), dims.beamformer_size());
  for (int n = 0; n < dims.num_subcarriers; ++n) {
    const auto slots = reshape_signature(stacked.segment(n * dims.signature_size(), dims.signature_size()), dims);
    const MatrixXcd& s = symbols.per_subcarrier[n];
    for (int l = 0; l < dims.frame_length; ++l) {
      // Row block l: V_l^T (s^T (x) I_{N_t}); column (k, t) of subcarrier n is s_k V_l(t, :)^T.
      const MatrixXcd vt = slots[l].transpose();
      for (int k = 0; k < k_users; ++k)
        out.block(l * block, (n * k_users + k) * nt, block, nt) = s(k, l) * vt;
    }
  }
  return out;
}

MatrixXcd build_t0(const VectorXcd& target_signature, const SymbolFrame& symbols, const EchoDims& dims) {
  return lift_signature(target_signature, symbols, dims);
}

MatrixXcd shift_operator_rows(int m, const MatrixXcd& op, const EchoDims& dims) {
  if (op.rows() != dims.echo_size()) throw InvalidArgument("operator row count mismatch");
  if (m == 0) return op;
  const int ns = dims.samples_per_symbol;
  const int nr = dims.num_rx;
  MatrixXcd out = MatrixXcd::Zero(op.rows(), op.cols());
  for (int l = 0; l < dims.frame_length; ++l) {
    for (int i = 0; i < ns; ++i) {
      const int src = i - m;
      if (src < 0 || src >= ns) continue;
      out.middleRows((l * ns + i) * nr, nr) = op.middleRows((l * ns + src) * nr, nr);
    }
  }
  return out;
}

namespace {

struct FactorRef {
  int offset;
  int rank;
  const VectorXcd* u;
};

std::vector<FactorRef> flatten(const InnerCcmFactors& factors) {
  std::vector<FactorRef> refs;
  for (const auto& cell : factors)
    for (std::size_t r = 0; r < cell.factors.size(); ++r)
      refs.push_back({cell.offset, static_cast<int>(r), &cell.factors[r]});
  return refs;
}

TaggedOperator make_tmr(const FactorRef& ref, const SymbolFrame& symbols, const EchoDims& dims) {
  return {ref.offset, ref.rank, shift_operator_rows(ref.offset, lift_signature(*ref.u, symbols, dims), dims)};
}

}  // namespace

std::vector<TaggedOperator> build_tmr_serial(const InnerCcmFactors& factors, const SymbolFrame& symbols,
                                             const EchoDims& dims) {
  std::vector<TaggedOperator> out;
  for (const auto& ref : flatten(factors)) out.push_back(make_tmr(ref, symbols, dims));
  return out;
}

std::vector<TaggedOperator> build_tmr(const InnerCcmFactors& factors, const SymbolFrame& symbols,
                                      const EchoDims& dims) {
  const auto refs = flatten(factors);
  std::vector<TaggedOperator> out(refs.size());
  const auto count = static_cast<long>(refs.size());
#pragma omp parallel for schedule(static) if (count > 8)
  for (long i = 0; i < count; ++i) out[i] = make_tmr(refs[i], symbols, dims);
  return out;
}

LiftedOperators build_lifted_operators(const VectorXcd& target_signature, const InnerCcmFactors& factors,
                                       const SymbolFrame& symbols, const EchoDims& dims) {
  LiftedOperators ops;
  ops.dims = dims;
  ops.t0 = build_t0(target_signature, symbols, dims);
  ops.clutter = build_tmr(factors, symbols, dims);
  return ops;
}

namespace {

void write_matrix(std::ofstream& out, const MatrixXcd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double pair[2] = {m(r, c).real(), m(r, c).imag()};
      out.write(reinterpret_cast<const char*>(pair), sizeof pair);
    }
  }
}

MatrixXcd read_matrix(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
  MatrixXcd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double pair[2];
      in.read(reinterpret_cast<char*>(pair), sizeof pair);
      m(r, c) = cdouble(pair[0], pair[1]);
    }
  }
  if (!in) throw InvalidArgument("truncated operator dump");
  return m;
}

}  // namespace

void dump_lifted_operators(const LiftedOperators& ops, const std::filesystem::path& prefix) {
  nlohmann::json meta;
  const auto& d = ops.dims;
  meta["dims"] = {{"num_subcarriers", d.num_subcarriers}, {"frame_length", d.frame_length},
                  {"samples_per_symbol", d.samples_per_symbol}, {"num_rx", d.num_rx},
                  {"num_tx", d.num_tx}, {"num_users", d.num_users}};
  meta["rows"] = ops.t0.rows();
  meta["cols"] = ops.t0.cols();
  meta["layout"] = "row-major complex128 (re, im); t0 first, then clutter operators in listed order";
  auto& tags = meta["clutter"] = nlohmann::json::array();
  for (const auto& t : ops.clutter) tags.push_back({{"m", t.offset}, {"r", t.rank}});

  std::filesystem::path bin = prefix;
  bin += ".bin";
  std::filesystem::path sidecar = prefix;
  sidecar += ".json";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + bin.string());
  write_matrix(out, ops.t0);
  for (const auto& t : ops.clutter) write_matrix(out, t.op);
  std::ofstream js(sidecar);
  js << meta.dump(2) << '\n';
}

LiftedOperators load_lifted_operators(const std::filesystem::path& prefix) {
  std::filesystem::path bin = prefix;
  bin += ".bin";
  std::filesystem::path sidecar = prefix;
  sidecar += ".json";
  std::ifstream js(sidecar);
  if (!js) throw std::runtime_error("cannot open " + sidecar.string());
  const auto meta = nlohmann::json::parse(js);
  LiftedOperators ops;
  const auto& d = meta.at("dims");
  ops.dims = EchoDims{d.at("num_subcarriers"), d.at("frame_length"), d.at("samples_per_symbol"),
                      d.at("num_rx"),          d.at("num_tx"),       d.at("num_users")};
  const Eigen::Index rows = meta.at("rows");
  const Eigen::Index cols = meta.at("cols");
  if (rows != ops.dims.echo_size() || cols != ops.dims.beamformer_size())
    throw InvalidArgument("operator dump dims are inconsistent");
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + bin.string());
  ops.t0 = read_matrix(in, rows, cols);
  for (const auto& tag : meta.at("clutter"))
    ops.clutter.push_back({tag.at("m").get<int>(), tag.at("r").get<int>(), read_matrix(in, rows, cols)});
  return ops;
}

}  // namespace dfrc
