#include "qrand/entropy.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace qrand {

namespace {

double entropy_term(double lambda) {
  if (lambda < tol::entropy_floor) return 0;
  return -lambda * std::log2(lambda);
}

}  // namespace

double shannon_entropy(const Eigen::VectorXd& p) {
  double total = 0;
  double h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) < -tol::prob) {
      throw std::invalid_argument(fmt::format("negative probability {:.3e}", p(i)));
    }
    total += p(i);
    h += entropy_term(std::max(p(i), 0.0));
  }
  if (std::abs(total - 1.0) > tol::trace) {
    throw std::invalid_argument(fmt::format("probabilities sum to {} (not 1)", total));
  }
  return h;
}

double shannon_entropy(const std::vector<double>& p) {
  return shannon_entropy(Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
}

double von_neumann_entropy_matrix(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  double h = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam < -tol::psd) {
      throw std::invalid_argument(fmt::format("entropy of a matrix with eigenvalue {:.3e}", lam));
    }
    h += entropy_term(std::max(lam, 0.0));
  }
  return h;
}

double von_neumann_entropy(const DensityOperator& rho) {
  return von_neumann_entropy_matrix(rho.matrix());
}

double conditional_entropy(const DensityOperator& joint, const std::vector<std::string>& given) {
  const double h_joint = von_neumann_entropy(joint);
  if (given.empty()) return h_joint;
  const double h_given = von_neumann_entropy(partial_trace(joint, given));
  return h_joint - h_given;
}

double mutual_information(const DensityOperator& rho, const std::vector<std::string>& part_a,
                          const std::vector<std::string>& part_b) {
  std::set<std::string> seen;
  for (const auto& l : part_a) seen.insert(l);
  for (const auto& l : part_b) {
    if (!seen.insert(l).second) {
      throw std::invalid_argument(fmt::format("register '{}' appears in both parts", l));
    }
  }
  if (seen.size() != rho.registers().size()) {
    throw std::invalid_argument("parts must partition the registers");
  }
  for (const auto& l : seen) rho.position(l);

  const double mi = von_neumann_entropy(partial_trace(rho, part_a)) +
                    von_neumann_entropy(partial_trace(rho, part_b)) - von_neumann_entropy(rho);
  if (mi < -tol::mi) {
    throw std::runtime_error(fmt::format("mutual information came out {:.3e}", mi));
  }
  return std::max(mi, 0.0);
}

Ensemble::Ensemble(std::vector<std::pair<double, DensityOperator>> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw std::invalid_argument("ensemble needs at least one entry");
  double total = 0;
  const Eigen::Index d = entries_[0].second.dim();
  for (const auto& [p, state] : entries_) {
    if (p < -tol::prob) {
      throw std::invalid_argument(fmt::format("ensemble probability {:.3e} is negative", p));
    }
    if (state.dim() != d) {
      throw std::invalid_argument("ensemble states must share one dimension");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > tol::trace) {
    throw std::invalid_argument(fmt::format("ensemble probabilities sum to {}", total));
  }
}

DensityOperator Ensemble::average() const {
  Mat avg = Mat::Zero(dim(), dim());
  for (const auto& [p, state] : entries_) avg += p * state.matrix();
  return DensityOperator(entries_[0].second.registers(), std::move(avg));
}

double holevo_quantity(const Ensemble& ens, const Channel& ch) {
  if (ens.dim() != ch.dim_in()) {
    throw std::invalid_argument(fmt::format("ensemble dimension {} does not match channel input {}",
                                            ens.dim(), ch.dim_in()));
  }
  Mat avg_out = Mat::Zero(ch.dim_out(), ch.dim_out());
  double avg_entropy = 0;
  for (const auto& [p, state] : ens.entries()) {
    const Mat out = ch.apply_matrix(state.matrix());
    avg_out += p * out;
    if (p > tol::prob) avg_entropy += p * von_neumann_entropy_matrix(out);
  }
  const double chi = von_neumann_entropy_matrix(avg_out) - avg_entropy;
  if (chi < -tol::mi) {
    throw std::runtime_error(fmt::format("Holevo quantity came out {:.3e}", chi));
  }
  return std::max(chi, 0.0);
}

Eigen::VectorXd outcome_distribution(const Povm& p, const PureState& psi) {
  if (p.dim() != psi.dim()) {
    throw std::invalid_argument(fmt::format("POVM dimension {} does not match state dimension {}",
                                            p.dim(), psi.dim()));
  }
  Eigen::VectorXd probs(static_cast<Eigen::Index>(p.size()));
  for (size_t k = 0; k < p.size(); ++k) {
    const double v = (psi.vector().adjoint() * p.elements()[k] * psi.vector()).value().real();
    probs(static_cast<Eigen::Index>(k)) = std::max(v, 0.0);
  }
  return probs;
}

double uncertainty_average(const PureState& psi, const Povm& basis0, const Povm& basis1) {
  if (!basis0.is_rank_one_basis() || !basis1.is_rank_one_basis()) {
    throw std::invalid_argument("uncertainty_average needs two rank-one basis measurements");
  }
  const double h0 = shannon_entropy(outcome_distribution(basis0, psi));
  const double h1 = shannon_entropy(outcome_distribution(basis1, psi));
  return 0.5 * (h0 + h1);
}

double binary_entropy(double p) {
  Eigen::VectorXd v(2);
  v << p, 1 - p;
  return shannon_entropy(v);
}

}  // namespace qrand
