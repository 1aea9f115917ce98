#include "qrand/states.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <stdexcept>

namespace qrand {

namespace {

void validate_density(const std::vector<Register>& regs, const Mat& m) {
  check_unique_labels(regs);
  const Eigen::Index d = total_dim(regs);
  if (m.rows() != d || m.cols() != d) {
    throw std::invalid_argument(fmt::format(
        "state matrix is {}x{} but registers span dimension {}", m.rows(), m.cols(), d));
  }
  const double herm_res = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm_res > tol::herm) {
    throw std::invalid_argument(
        fmt::format("state is not Hermitian (residual {:.3e} > {:.1e})", herm_res, tol::herm));
  }
  const double tr_res = std::abs(m.trace() - cplx(1.0));
  if (tr_res > tol::trace) {
    throw std::invalid_argument(
        fmt::format("state trace deviates from 1 by {:.3e} (> {:.1e})", tr_res, tol::trace));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -tol::psd) {
    throw std::invalid_argument(
        fmt::format("state has eigenvalue {:.3e} < -{:.1e}", min_eig, tol::psd));
  }
}

}  // namespace

DensityOperator::DensityOperator() : regs_(), mat_(Mat::Identity(1, 1)) {}

DensityOperator::DensityOperator(std::vector<Register> regs, Mat matrix)
    : regs_(std::move(regs)), mat_(std::move(matrix)) {
  validate_density(regs_, mat_);
}

DensityOperator::DensityOperator(unchecked_t, std::vector<Register> regs, Mat matrix)
    : regs_(std::move(regs)), mat_(std::move(matrix)) {}

DensityOperator DensityOperator::clipped(std::vector<Register> regs, const Mat& matrix) {
  Mat h = 0.5 * (matrix + matrix.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Eigen::VectorXd ev = es.eigenvalues();
  const double min_eig = ev.minCoeff();
  if (min_eig < -tol::psd) {
    throw std::runtime_error(
        fmt::format("state eigenvalue {:.3e} below -{:.1e}; refusing to clip", min_eig, tol::psd));
  }
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), 0.0);
  const double total = ev.sum();
  if (total <= 0) {
    throw std::runtime_error("state has zero trace after clipping");
  }
  ev /= total;
  Mat out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  DensityOperator rho(unchecked_t{}, std::move(regs), std::move(out));
  check_unique_labels(rho.regs_);
  return rho;
}

bool DensityOperator::has(std::string_view label) const {
  return std::any_of(regs_.begin(), regs_.end(),
                     [&](const Register& r) { return r.label == label; });
}

size_t DensityOperator::position(std::string_view label) const {
  for (size_t i = 0; i < regs_.size(); ++i) {
    if (regs_[i].label == label) return i;
  }
  throw std::invalid_argument(fmt::format("unknown register '{}'", label));
}

PureState::PureState(std::vector<Register> regs, Vec vector)
    : regs_(std::move(regs)), vec_(std::move(vector)) {
  check_unique_labels(regs_);
  if (vec_.size() != total_dim(regs_)) {
    throw std::invalid_argument(fmt::format("vector length {} does not match register dimension {}",
                                            vec_.size(), total_dim(regs_)));
  }
  const double norm_res = std::abs(vec_.norm() - 1.0);
  if (norm_res > tol::trace) {
    throw std::invalid_argument(
        fmt::format("state vector norm deviates from 1 by {:.3e}", norm_res));
  }
}

DensityOperator PureState::to_density() const {
  return DensityOperator(regs_, vec_ * vec_.adjoint());
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  std::vector<Register> regs = a.registers();
  regs.insert(regs.end(), b.registers().begin(), b.registers().end());
  check_unique_labels(regs);
  Mat out(a.dim() * b.dim(), a.dim() * b.dim());
  for (Eigen::Index i = 0; i < a.dim(); ++i) {
    for (Eigen::Index j = 0; j < a.dim(); ++j) {
      out.block(i * b.dim(), j * b.dim(), b.dim(), b.dim()) = a.matrix()(i, j) * b.matrix();
    }
  }
  return DensityOperator(std::move(regs), std::move(out));
}

PureState tensor(const PureState& a, const PureState& b) {
  std::vector<Register> regs = a.registers();
  regs.insert(regs.end(), b.registers().begin(), b.registers().end());
  check_unique_labels(regs);
  Vec out(a.dim() * b.dim());
  for (Eigen::Index i = 0; i < a.dim(); ++i) {
    out.segment(i * b.dim(), b.dim()) = a.vector()(i) * b.vector();
  }
  return PureState(std::move(regs), std::move(out));
}

DensityOperator partial_trace(const DensityOperator& rho, const std::vector<std::string>& keep) {
  std::vector<size_t> keep_pos;
  for (const auto& label : keep) keep_pos.push_back(rho.position(label));
  std::sort(keep_pos.begin(), keep_pos.end());

  std::vector<size_t> traced;
  for (size_t i = 0; i < rho.registers().size(); ++i) {
    if (!std::binary_search(keep_pos.begin(), keep_pos.end(), i)) traced.push_back(i);
  }

  const auto idx = make_subspace_index(rho.registers(), keep_pos);
  std::vector<Register> out_regs;
  for (size_t p : keep_pos) out_regs.push_back(rho.registers()[p]);

  const Eigen::Index dk = static_cast<Eigen::Index>(idx.sel_offsets.size());
  Mat out = Mat::Zero(dk, dk);
  for (Eigen::Index i = 0; i < dk; ++i) {
    for (Eigen::Index j = 0; j < dk; ++j) {
      cplx acc = 0;
      for (Eigen::Index t : idx.rest_offsets) {
        acc += rho.matrix()(idx.sel_offsets[i] + t, idx.sel_offsets[j] + t);
      }
      out(i, j) = acc;
    }
  }
  return DensityOperator(std::move(out_regs), std::move(out));
}

DensityOperator dephase(const DensityOperator& rho, std::string_view target) {
  const size_t pos = rho.position(target);
  const auto strides = strides_of(rho.registers());
  const Eigen::Index stride = strides[pos];
  const Eigen::Index d = rho.registers()[pos].dim;

  Mat out = rho.matrix();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Eigen::Index di = (i / stride) % d;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      if (di != (j / stride) % d) out(i, j) = 0;
    }
  }
  std::vector<Register> regs = rho.registers();
  regs[pos].classical = true;
  return DensityOperator(std::move(regs), std::move(out));
}

DensityOperator permuted(const DensityOperator& rho, const std::vector<std::string>& order) {
  if (order.size() != rho.registers().size()) {
    throw std::invalid_argument("permutation must list every register exactly once");
  }
  std::vector<size_t> perm;
  for (const auto& label : order) perm.push_back(rho.position(label));
  std::vector<bool> seen(perm.size(), false);
  for (size_t p : perm) {
    if (seen[p]) throw std::invalid_argument("permutation lists a register twice");
    seen[p] = true;
  }

  std::vector<Register> out_regs;
  for (size_t p : perm) out_regs.push_back(rho.registers()[p]);
  const auto old_strides = strides_of(rho.registers());
  const auto new_strides = strides_of(out_regs);

  const Eigen::Index d = rho.dim();
  std::vector<Eigen::Index> remap(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index j = 0;
    for (size_t k = 0; k < perm.size(); ++k) {
      const Eigen::Index digit = (i / old_strides[perm[k]]) % rho.registers()[perm[k]].dim;
      j += digit * new_strides[k];
    }
    remap[i] = j;
  }
  Mat out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out(remap[i], remap[j]) = rho.matrix()(i, j);
    }
  }
  return DensityOperator(std::move(out_regs), std::move(out));
}

PureState maximally_entangled_state(Eigen::Index d, std::string label_a, std::string label_b) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  Vec v = Vec::Zero(d * d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < d; ++i) v(i * d + i) = amp;
  return PureState({{std::move(label_a), d, false}, {std::move(label_b), d, false}}, std::move(v));
}

double trace_distance(const Mat& a, const Mat& b) {
  Mat diff = a - b;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

std::vector<Register> erase_positions(const std::vector<Register>& regs,
                                      const std::vector<size_t>& targets) {
  std::vector<bool> drop(regs.size(), false);
  for (size_t t : targets) drop[t] = true;
  std::vector<Register> out;
  for (size_t i = 0; i < regs.size(); ++i) {
    if (!drop[i]) out.push_back(regs[i]);
  }
  return out;
}

std::pair<Mat, std::vector<Register>> embed_operator(const std::vector<Register>& regs,
                                                     const std::vector<size_t>& targets,
                                                     const std::vector<Register>& out_regs,
                                                     const Mat& op) {
  if (targets.empty()) throw std::invalid_argument("embed_operator needs at least one target");
  Eigen::Index din_t = 1;
  for (size_t t : targets) din_t *= regs[t].dim;
  const Eigen::Index dout_t = total_dim(out_regs);
  if (op.rows() != dout_t || op.cols() != din_t) {
    throw std::invalid_argument(fmt::format("operator is {}x{}, expected {}x{}", op.rows(),
                                            op.cols(), dout_t, din_t));
  }

  // Output layout: out_regs inserted where the first target slot was.
  const size_t insert_at = *std::min_element(targets.begin(), targets.end());
  std::vector<Register> new_regs;
  std::vector<bool> is_target(regs.size(), false);
  for (size_t t : targets) is_target[t] = true;
  std::vector<size_t> out_positions;
  for (size_t i = 0; i < regs.size(); ++i) {
    if (i == insert_at) {
      for (const auto& r : out_regs) {
        out_positions.push_back(new_regs.size());
        new_regs.push_back(r);
      }
    }
    if (!is_target[i]) new_regs.push_back(regs[i]);
  }
  check_unique_labels(new_regs);

  const auto in_idx = make_subspace_index(regs, targets);
  const auto out_idx = make_subspace_index(new_regs, out_positions);
  if (in_idx.rest_offsets.size() != out_idx.rest_offsets.size()) {
    throw std::logic_error("embed_operator: rest spaces out of sync");
  }

  Mat L = Mat::Zero(total_dim(new_regs), total_dim(regs));
  for (size_t r = 0; r < in_idx.rest_offsets.size(); ++r) {
    for (Eigen::Index a = 0; a < dout_t; ++a) {
      for (Eigen::Index b = 0; b < din_t; ++b) {
        if (op(a, b) == cplx(0)) continue;
        L(out_idx.sel_offsets[a] + out_idx.rest_offsets[r],
          in_idx.sel_offsets[b] + in_idx.rest_offsets[r]) = op(a, b);
      }
    }
  }
  return {std::move(L), std::move(new_regs)};
}

Mat op_trace(const std::vector<Register>& regs, const Mat& m,
             const std::vector<size_t>& targets, const Mat& op) {
  const auto idx = make_subspace_index(regs, targets);
  const Eigen::Index dt = static_cast<Eigen::Index>(idx.sel_offsets.size());
  const Eigen::Index dr = static_cast<Eigen::Index>(idx.rest_offsets.size());
  if (op.rows() != dt || op.cols() != dt) {
    throw std::invalid_argument(
        fmt::format("op_trace operator is {}x{}, expected {}x{}", op.rows(), op.cols(), dt, dt));
  }
  Mat out = Mat::Zero(dr, dr);
  for (Eigen::Index a = 0; a < dt; ++a) {
    for (Eigen::Index b = 0; b < dt; ++b) {
      const cplx w = op(a, b);
      if (w == cplx(0)) continue;
      for (Eigen::Index i = 0; i < dr; ++i) {
        for (Eigen::Index j = 0; j < dr; ++j) {
          out(i, j) += w * m(idx.sel_offsets[b] + idx.rest_offsets[i],
                             idx.sel_offsets[a] + idx.rest_offsets[j]);
        }
      }
    }
  }
  return out;
}

}  // namespace qrand
