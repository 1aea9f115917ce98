#pragma once

#include "qrand/states.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qrand {

// Positive operator-valued measure: one labeled element per outcome,
// elements Hermitian PSD and summing to the identity within tol::povm.
class Povm {
 public:
  Povm(std::vector<std::string> outcomes, std::vector<Mat> elements);

  const std::vector<std::string>& outcomes() const { return outcomes_; }
  const std::vector<Mat>& elements() const { return elements_; }
  size_t size() const { return elements_.size(); }
  Eigen::Index dim() const { return elements_.empty() ? 0 : elements_[0].rows(); }

  // True when every element is a rank-one projector and there are dim() of
  // them (an orthonormal-basis measurement).
  bool is_rank_one_basis() const;

 private:
  std::vector<std::string> outcomes_;
  std::vector<Mat> elements_;
};

Povm computational_basis(Eigen::Index d);

// Rank-one projectors onto (1/sqrt(d)) sum_k w^{jk} |k>, w = exp(2*pi*i/d).
// Mutually unbiased with the computational basis: all overlaps are 1/d.
Povm fourier_basis(Eigen::Index d);

struct MeasureOutcome {
  std::string outcome;
  double probability = 0;
  // Post-state on the remaining registers; absent when probability <= tol::prob.
  std::optional<DensityOperator> post;
};

// Applies `p` to the listed registers (consumed by the measurement); the
// post-states live on what remains. Probabilities are Tr[(E (x) I) rho].
std::vector<MeasureOutcome> measure(const Povm& p, const DensityOperator& rho,
                                    const std::vector<std::string>& targets);

}  // namespace qrand
