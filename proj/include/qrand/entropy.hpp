#pragma once

#include "qrand/channels.hpp"
#include "qrand/states.hpp"

#include <vector>

namespace qrand {

// All entropies are in bits. Eigenvalues below tol::entropy_floor
// contribute zero (0 log 0 := 0).

double shannon_entropy(const Eigen::VectorXd& p);
double shannon_entropy(const std::vector<double>& p);

// Assumes a Hermitian matrix; negative eigenvalues within -tol::psd are
// treated as zero.
double von_neumann_entropy_matrix(const Mat& m);
double von_neumann_entropy(const DensityOperator& rho);

// H(A|B) = H(AB) - H(B) with B = `given`. May be negative on entangled
// joints; classical-flagged registers never drive it negative.
double conditional_entropy(const DensityOperator& joint,
                           const std::vector<std::string>& given);

// H(A) + H(B) - H(AB); `part_a` and `part_b` must partition the registers.
double mutual_information(const DensityOperator& rho,
                          const std::vector<std::string>& part_a,
                          const std::vector<std::string>& part_b);

// Finite list of (probability, state) pairs on one register layout.
class Ensemble {
 public:
  explicit Ensemble(std::vector<std::pair<double, DensityOperator>> entries);

  const std::vector<std::pair<double, DensityOperator>>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  Eigen::Index dim() const { return entries_[0].second.dim(); }
  // Probability-weighted average state.
  DensityOperator average() const;

 private:
  std::vector<std::pair<double, DensityOperator>> entries_;
};

// S(ch(avg)) - sum_w p(w) S(ch(psi_w)).
double holevo_quantity(const Ensemble& ens, const Channel& ch);

// (1/2)[H(M|G=0) + H(M|G=1)] for rank-one basis measurements basis0/basis1 on
// a pure state; bounded below by (1/2) log2 d when the bases are mutually
// unbiased.
double uncertainty_average(const PureState& psi, const Povm& basis0, const Povm& basis1);

// Outcome distribution of a POVM on a pure state.
Eigen::VectorXd outcome_distribution(const Povm& p, const PureState& psi);

double binary_entropy(double p);

}  // namespace qrand
