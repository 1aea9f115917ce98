#include "qrand/povm.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qrand {

Povm::Povm(std::vector<std::string> outcomes, std::vector<Mat> elements)
    : outcomes_(std::move(outcomes)), elements_(std::move(elements)) {
  if (outcomes_.size() != elements_.size()) {
    throw std::invalid_argument(fmt::format("{} outcome labels for {} POVM elements",
                                            outcomes_.size(), elements_.size()));
  }
  if (elements_.empty()) throw std::invalid_argument("POVM needs at least one element");
  const Eigen::Index d = elements_[0].rows();
  Mat sum = Mat::Zero(d, d);
  for (size_t k = 0; k < elements_.size(); ++k) {
    const Mat& e = elements_[k];
    if (e.rows() != d || e.cols() != d) {
      throw std::invalid_argument(fmt::format("POVM element '{}' is {}x{}, expected {}x{}",
                                              outcomes_[k], e.rows(), e.cols(), d, d));
    }
    const double herm_res = (e - e.adjoint()).cwiseAbs().maxCoeff();
    if (herm_res > tol::herm) {
      throw std::invalid_argument(fmt::format(
          "POVM element '{}' is not Hermitian (residual {:.3e})", outcomes_[k], herm_res));
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(e, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol::psd) {
      throw std::invalid_argument(fmt::format("POVM element '{}' has eigenvalue {:.3e}",
                                              outcomes_[k], es.eigenvalues().minCoeff()));
    }
    sum += e;
  }
  const double comp_res = (sum - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  if (comp_res > tol::povm) {
    throw std::invalid_argument(fmt::format(
        "POVM elements sum to identity with residual {:.3e} (> {:.1e})", comp_res, tol::povm));
  }
}

bool Povm::is_rank_one_basis() const {
  if (static_cast<Eigen::Index>(size()) != dim()) return false;
  for (const Mat& e : elements_) {
    Eigen::SelfAdjointEigenSolver<Mat> es(e, Eigen::EigenvaluesOnly);
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const double target = (i == ev.size() - 1) ? 1.0 : 0.0;
      if (std::abs(ev(i) - target) > 1e-7) return false;
    }
  }
  return true;
}

Povm computational_basis(Eigen::Index d) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  std::vector<std::string> outcomes;
  std::vector<Mat> elements;
  for (Eigen::Index j = 0; j < d; ++j) {
    outcomes.push_back(std::to_string(j));
    Mat e = Mat::Zero(d, d);
    e(j, j) = 1;
    elements.push_back(std::move(e));
  }
  return Povm(std::move(outcomes), std::move(elements));
}

Povm fourier_basis(Eigen::Index d) {
  if (d < 2) throw std::invalid_argument("fourier_basis needs dimension >= 2");
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<std::string> outcomes;
  std::vector<Mat> elements;
  for (Eigen::Index j = 0; j < d; ++j) {
    Vec v(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(j * k) / d;
      v(k) = amp * cplx(std::cos(phase), std::sin(phase));
    }
    outcomes.push_back(std::to_string(j));
    elements.push_back(v * v.adjoint());
  }
  return Povm(std::move(outcomes), std::move(elements));
}

std::vector<MeasureOutcome> measure(const Povm& p, const DensityOperator& rho,
                                    const std::vector<std::string>& targets) {
  std::vector<size_t> pos;
  for (const auto& label : targets) pos.push_back(rho.position(label));
  Eigen::Index dt = 1;
  for (size_t t : pos) dt *= rho.registers()[t].dim;
  if (dt != p.dim()) {
    throw std::invalid_argument(
        fmt::format("POVM dimension {} does not match target dimension {}", p.dim(), dt));
  }
  const std::vector<Register> remaining = erase_positions(rho.registers(), pos);

  std::vector<MeasureOutcome> out;
  double total = 0;
  for (size_t k = 0; k < p.size(); ++k) {
    Mat block = op_trace(rho.registers(), rho.matrix(), pos, p.elements()[k]);
    double prob = block.trace().real();
    if (prob < -tol::prob) {
      throw std::runtime_error(
          fmt::format("outcome '{}' has probability {:.3e}", p.outcomes()[k], prob));
    }
    prob = std::max(prob, 0.0);
    total += prob;
    MeasureOutcome mo{p.outcomes()[k], prob, std::nullopt};
    if (prob > tol::prob) {
      mo.post = DensityOperator::clipped(remaining, block / prob);
    }
    out.push_back(std::move(mo));
  }
  if (std::abs(total - 1.0) > tol::trace) {
    throw std::runtime_error(
        fmt::format("measurement probabilities sum to {} (off by {:.3e})", total, total - 1.0));
  }
  return out;
}

}  // namespace qrand
