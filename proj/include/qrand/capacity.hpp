#pragma once

#include "qrand/channels.hpp"
#include "qrand/entropy.hpp"

#include <variant>

namespace qrand {

struct SolverOptions {
  double tol = 1e-7;        // gradient-norm / improvement threshold
  int max_iters = 5000;
  int restarts = 8;         // only the Holevo solver is restarted
  uint64_t seed = 0;
  Eigen::Index max_dim = 16;
};

struct CapacityReport {
  double value_bits = 0;
  std::variant<DensityOperator, Ensemble> witness{DensityOperator{}};
  int iterations = 0;
  double final_step_norm = 0;
  bool converged = false;

  const DensityOperator& state_witness() const { return std::get<DensityOperator>(witness); }
  const Ensemble& ensemble_witness() const { return std::get<Ensemble>(witness); }
};

// Channel mutual information I(E) = max_rho S(rho) + S(E(rho)) - S((E(x)id)phi),
// phi a purification of rho; equals the entanglement-assisted classical
// capacity. The objective is concave, so `converged` means the gradient norm
// dropped below opts.tol. A reference system of dimension dim_in suffices:
// every input state has a purification of that size.
CapacityReport channel_mutual_information(const Channel& ch, const SolverOptions& opts = {});

// Holevo information chi(E) via alternating maximization over an ensemble of
// dim_in^2 pure states: Blahut-Arimoto reweighting for the probabilities,
// projected gradient ascent on the sphere for the states, multi-restart.
// The returned value is a certified lower bound (the objective re-evaluated
// at the witness).
CapacityReport holevo_information(const Channel& ch, const SolverOptions& opts = {});

// Classical Blahut-Arimoto with a duality-gap stopping rule; the objective
// sequence is nondecreasing and convergence is guaranteed. When given,
// `objective_trace` receives the objective value of every iteration.
CapacityReport blahut_arimoto(const Eigen::MatrixXd& transition, double tol = 1e-9,
                              int max_iters = 200000,
                              std::vector<double>* objective_trace = nullptr);

// Independent oracle for qubit channels: scans rho = (I + r n.sigma)/2 over a
// Bloch-ball grid with `grid` steps per axis and returns the best objective.
double brute_force_qubit_mi(const Channel& ch, int grid);

// The mutual-information objective f(rho) evaluated exactly (purification via
// eigendecomposition). Used for witness re-evaluation and by the grid oracle.
double channel_mi_objective(const Channel& ch, const Mat& rho);

// Parameterized objective f(A) with rho = A A^dag / tr and purification
// vec(A)/||A||, plus its exact Wirtinger gradient (ascent direction dA).
// Entropy logs are broadened by tol::eig_broadening so the gradient stays
// finite at rank-deficient points; both functions use the same broadening so
// finite differences of the objective match the gradient.
double mi_ascent_objective(const Channel& ch, const Mat& a);
Mat mi_ascent_gradient(const Channel& ch, const Mat& a);

}  // namespace qrand
