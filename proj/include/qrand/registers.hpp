#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <string_view>
#include <vector>

namespace qrand {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Numerical tolerances shared by the whole library.
namespace tol {
inline constexpr double herm = 1e-9;   // Hermiticity residual
inline constexpr double psd = 1e-9;    // eigenvalue negativity budget
inline constexpr double trace = 1e-9;  // unit-trace / unit-norm residual
inline constexpr double povm = 1e-9;   // completeness residual
inline constexpr double prob = 1e-12;  // smallest probability with a defined post-state
inline constexpr double chan = 1e-9;   // channel compositional identities
inline constexpr double mi = 1e-9;     // mutual-information nonnegativity slack
inline constexpr double entropy_floor = 1e-15;  // eigenvalues below this contribute 0
inline constexpr double eig_broadening = 1e-12; // log-argument broadening in solver gradients
}  // namespace tol

// A labeled tensor factor. Classical registers hold computational-basis
// diagonal states; operations that require classical data assert the flag.
struct Register {
  std::string label;
  Eigen::Index dim = 1;
  bool classical = false;

  friend bool operator==(const Register& a, const Register& b) {
    return a.label == b.label && a.dim == b.dim && a.classical == b.classical;
  }
};

inline Eigen::Index total_dim(const std::vector<Register>& regs) {
  Eigen::Index d = 1;
  for (const auto& r : regs) d *= r.dim;
  return d;
}

// Row-major strides: the first register is the most significant factor,
// matching kron(a, b) with `a` listed first.
std::vector<Eigen::Index> strides_of(const std::vector<Register>& regs);

// Precomputed index offsets for a subset of tensor slots. `sel_offsets[s]`
// is the full-space offset of packed sub-index s (row-major over the selected
// slots, in the order given), `rest_offsets[r]` the offset of the r-th
// configuration of the remaining slots (ascending slot order). A full index
// is the sum of one offset from each table.
struct SubspaceIndex {
  std::vector<Eigen::Index> sel_offsets;
  std::vector<Eigen::Index> rest_offsets;
};

SubspaceIndex make_subspace_index(const std::vector<Register>& regs,
                                  const std::vector<size_t>& sel);

void check_unique_labels(const std::vector<Register>& regs);

}  // namespace qrand
