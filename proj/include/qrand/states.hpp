#pragma once

#include "qrand/registers.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace qrand {

// Positive unit-trace operator on a list of labeled registers. Validated on
// construction; immutable afterwards.
class DensityOperator {
 public:
  // Scalar state on no registers.
  DensityOperator();
  DensityOperator(std::vector<Register> regs, Mat matrix);

  // Clips eigenvalues in [-tol::psd, 0) to zero and renormalizes; throws for
  // anything more negative. Used after channel application and branching.
  static DensityOperator clipped(std::vector<Register> regs, const Mat& matrix);

  const std::vector<Register>& registers() const { return regs_; }
  const Mat& matrix() const { return mat_; }
  Eigen::Index dim() const { return mat_.rows(); }

  bool has(std::string_view label) const;
  size_t position(std::string_view label) const;  // throws on unknown label
  const Register& reg(std::string_view label) const { return regs_[position(label)]; }

 private:
  struct unchecked_t {};
  DensityOperator(unchecked_t, std::vector<Register> regs, Mat matrix);

  std::vector<Register> regs_;
  Mat mat_;
};

// Unit vector on labeled registers.
class PureState {
 public:
  PureState(std::vector<Register> regs, Vec vector);

  const std::vector<Register>& registers() const { return regs_; }
  const Vec& vector() const { return vec_; }
  Eigen::Index dim() const { return vec_.size(); }

  DensityOperator to_density() const;

 private:
  std::vector<Register> regs_;
  Vec vec_;
};

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);
PureState tensor(const PureState& a, const PureState& b);

// Reduced state on the kept registers (original relative order preserved).
DensityOperator partial_trace(const DensityOperator& rho,
                              const std::vector<std::string>& keep);

// Projects the target register onto its computational-basis diagonal and
// flags it classical.
DensityOperator dephase(const DensityOperator& rho, std::string_view target);

// Explicit reordering of tensor factors; no operation reorders implicitly.
DensityOperator permuted(const DensityOperator& rho,
                         const std::vector<std::string>& order);

// (1/sqrt(d)) sum_i |ii>, invariant under U (x) conj(U) for any unitary U.
PureState maximally_entangled_state(Eigen::Index d, std::string label_a = "R",
                                    std::string label_b = "X");

double trace_distance(const Mat& a, const Mat& b);

// --- low-level helpers shared by channels / measurement / the protocol engine

// Full-space matrix for `op` acting on the registers at `targets` (row-major
// in the listed order), identity elsewhere. The target slots are replaced by
// `out_regs` (inserted at the first target's position); remaining registers
// keep their relative order. Returns the lifted matrix and the output layout.
std::pair<Mat, std::vector<Register>> embed_operator(
    const std::vector<Register>& regs, const std::vector<size_t>& targets,
    const std::vector<Register>& out_regs, const Mat& op);

// Tr_targets[(op (x) I) m]: the remaining-register block sum_{a,b} op(a,b) *
// m((b,rest_i),(a,rest_j)). `op` acts on the targets in the listed order.
Mat op_trace(const std::vector<Register>& regs, const Mat& m,
             const std::vector<size_t>& targets, const Mat& op);

std::vector<Register> erase_positions(const std::vector<Register>& regs,
                                      const std::vector<size_t>& targets);

}  // namespace qrand
