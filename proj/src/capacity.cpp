#include "qrand/capacity.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qrand/random.hpp"

namespace qrand {

namespace {

constexpr double kLn2 = std::numbers::ln2;

// Broadened spectral functions; the same broadening in the objective and the
// gradient keeps finite differences consistent.
double entropy_broadened(const Eigen::VectorXd& ev) {
  double s = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double lam = std::max(ev(i), 0.0);
    s -= lam * std::log2(lam + tol::eig_broadening);
  }
  return s;
}

// d/d(sigma) of -tr[sigma log2(sigma + delta)] as a Hermitian matrix.
Mat entropy_derivative(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  Eigen::VectorXd g(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double lam = std::max(es.eigenvalues()(i), 0.0);
    g(i) = -std::log2(lam + tol::eig_broadening) - lam / ((lam + tol::eig_broadening) * kLn2);
  }
  return es.eigenvectors() * g.asDiagonal() * es.eigenvectors().adjoint();
}

double entropy_of(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma, Eigen::EigenvaluesOnly);
  return entropy_broadened(es.eigenvalues());
}

// log2(sigma + delta) on the full space; delta keeps unused directions finite.
Mat log2_broadened(const Mat& sigma, double delta) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  Eigen::VectorXd g(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g(i) = std::log2(std::max(es.eigenvalues()(i), 0.0) + delta);
  }
  return es.eigenvectors() * g.asDiagonal() * es.eigenvectors().adjoint();
}

struct LiftedChannel {
  std::vector<Mat> kraus;         // channel itself
  std::vector<Mat> kraus_lifted;  // K (x) I_R with dim(R) = dim_in

  explicit LiftedChannel(const Channel& ch) : kraus(ch.kraus_operators()) {
    const Eigen::Index dr = ch.dim_in();
    for (const Mat& k : kraus) {
      Mat lifted = Mat::Zero(k.rows() * dr, k.cols() * dr);
      for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
          if (k(i, j) != cplx(0)) {
            lifted.block(i * dr, j * dr, dr, dr) = k(i, j) * Mat::Identity(dr, dr);
          }
        }
      }
      kraus_lifted.push_back(std::move(lifted));
    }
  }

  Mat forward(const Mat& m) const {
    Mat out = Mat::Zero(kraus[0].rows(), kraus[0].rows());
    for (const Mat& k : kraus) out += k * m * k.adjoint();
    return out;
  }
  Mat adjoint(const Mat& m) const {
    Mat out = Mat::Zero(kraus[0].cols(), kraus[0].cols());
    for (const Mat& k : kraus) out += k.adjoint() * m * k;
    return out;
  }
  Mat forward_lifted(const Mat& m) const {
    Mat out = Mat::Zero(kraus_lifted[0].rows(), kraus_lifted[0].rows());
    for (const Mat& k : kraus_lifted) out += k * m * k.adjoint();
    return out;
  }
  Mat adjoint_lifted(const Mat& m) const {
    Mat out = Mat::Zero(kraus_lifted[0].cols(), kraus_lifted[0].cols());
    for (const Mat& k : kraus_lifted) out += k.adjoint() * m * k;
    return out;
  }
};

// vec with the X index major: v(i*d + j) = a(i, j), so tr_R[v v^dag] = a a^dag.
Vec vec_row_major(const Mat& a) {
  const Eigen::Index d = a.rows();
  Vec v(d * a.cols());
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) v(i * a.cols() + j) = a(i, j);
  }
  return v;
}

Mat unvec_row_major(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
  Mat a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = v(i * cols + j);
  }
  return a;
}

Mat ginibre(Eigen::Index d, Rng& rng) {
  Mat g(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.complex_normal();
  }
  return g;
}

double objective_impl(const LiftedChannel& lc, const Mat& a) {
  const double t = a.squaredNorm();
  const Mat rho = a * a.adjoint() / t;
  const Vec v = vec_row_major(a);
  const Mat omega = lc.forward_lifted(v * v.adjoint()) / t;
  return entropy_of(rho) + entropy_of(lc.forward(rho)) - entropy_of(omega);
}

Mat gradient_impl(const LiftedChannel& lc, const Mat& a) {
  const double t = a.squaredNorm();
  const Mat rho = a * a.adjoint() / t;
  const Vec v = vec_row_major(a);
  const Mat omega = lc.forward_lifted(v * v.adjoint()) / t;

  // d(S1 + S2)/d(rho) pulled back through rho = A A^dag / t.
  const Mat d12 = entropy_derivative(rho) + lc.adjoint(entropy_derivative(lc.forward(rho)));
  const double c12 = (d12 * rho).trace().real();
  const Mat g12 = (d12 * a - c12 * a) / t;

  // -S3 through omega = (E (x) id)[v v^dag] / t.
  const Mat d3 = entropy_derivative(omega);
  const double c3 = (d3 * omega).trace().real();
  const Vec gv = (lc.adjoint_lifted(d3) * v - c3 * v) / t;

  // Ascent direction in the real coordinates is twice the conjugate
  // Wirtinger derivative.
  return 2.0 * (g12 - unvec_row_major(gv, a.rows(), a.cols()));
}

}  // namespace

double mi_ascent_objective(const Channel& ch, const Mat& a) {
  return objective_impl(LiftedChannel(ch), a);
}

Mat mi_ascent_gradient(const Channel& ch, const Mat& a) {
  return gradient_impl(LiftedChannel(ch), a);
}

double channel_mi_objective(const Channel& ch, const Mat& rho) {
  // Purify through the eigendecomposition; the objective does not depend on
  // which purification is used.
  Eigen::SelfAdjointEigenSolver<Mat> es(rho);
  const Eigen::Index d = rho.rows();
  Mat a = Mat::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double lam = std::max(es.eigenvalues()(i), 0.0);
    a += std::sqrt(lam) * es.eigenvectors().col(i) * Eigen::RowVectorXcd::Unit(d, i);
  }
  return mi_ascent_objective(ch, a);
}

CapacityReport channel_mutual_information(const Channel& ch, const SolverOptions& opts) {
  if (ch.dim_in() > opts.max_dim) {
    throw std::invalid_argument(fmt::format("channel input dimension {} exceeds solver cap {}",
                                            ch.dim_in(), opts.max_dim));
  }
  const LiftedChannel lc(ch);
  const Eigen::Index d = ch.dim_in();

  Rng rng(opts.seed);
  Mat a = Mat::Identity(d, d) + 0.1 * ginibre(d, rng);
  a /= a.norm();

  double f = objective_impl(lc, a);
  double eta = 0.5;
  double grad_norm = 0;
  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iters; ++iter) {
    const Mat g = gradient_impl(lc, a);
    grad_norm = g.norm();
    if (grad_norm <= opts.tol) {
      converged = true;
      break;
    }
    // Armijo backtracking on the concave objective.
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Mat trial = a + eta * g;
      trial /= trial.norm();
      const double ft = objective_impl(lc, trial);
      if (ft >= f + 1e-4 * eta * grad_norm * grad_norm) {
        a = std::move(trial);
        f = ft;
        eta = std::min(eta * 1.5, 1e3);
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;  // step underflow: gradient norm reported as-is
  }

  const double t = a.squaredNorm();
  Mat rho_mat = a * a.adjoint() / t;
  rho_mat = 0.5 * (rho_mat + rho_mat.adjoint());
  DensityOperator witness = DensityOperator::clipped({{ch.input().label, d, false}}, rho_mat);

  CapacityReport report;
  report.value_bits = channel_mi_objective(ch, witness.matrix());
  report.witness = witness;
  report.iterations = iter;
  report.final_step_norm = grad_norm;
  report.converged = converged;
  const double cap = std::log2(static_cast<double>(ch.dim_in() * ch.dim_out()));
  if (report.value_bits < -tol::mi || report.value_bits > cap + tol::mi) {
    throw std::runtime_error(
        fmt::format("mutual-information value {} outside [0, {}]", report.value_bits, cap));
  }
  return report;
}

namespace {

struct ChiVariables {
  std::vector<Vec> states;  // pure states on the input space
  Eigen::VectorXd probs;
};

double chi_value(const Channel& ch, const ChiVariables& v) {
  const Eigen::Index dout = ch.dim_out();
  Mat avg = Mat::Zero(dout, dout);
  double avg_s = 0;
  for (size_t w = 0; w < v.states.size(); ++w) {
    const double p = v.probs(static_cast<Eigen::Index>(w));
    if (p <= 0) continue;
    const Mat out = ch.apply_matrix(v.states[w] * v.states[w].adjoint());
    avg += p * out;
    avg_s += p * von_neumann_entropy_matrix(out);
  }
  return von_neumann_entropy_matrix(avg) - avg_s;
}

// Blahut-Arimoto reweighting for fixed states; returns the duality gap.
double ba_probability_step(const Channel& ch, ChiVariables& v, double inner_tol, int max_iters) {
  const Eigen::Index k = v.probs.size();
  const Eigen::Index dout = ch.dim_out();
  std::vector<Mat> outputs;
  std::vector<double> out_entropy;
  for (const Vec& psi : v.states) {
    Mat o = ch.apply_matrix(psi * psi.adjoint());
    out_entropy.push_back(von_neumann_entropy_matrix(o));
    outputs.push_back(std::move(o));
  }
  double gap = 1e300;
  for (int it = 0; it < max_iters; ++it) {
    Mat avg = Mat::Zero(dout, dout);
    for (Eigen::Index w = 0; w < k; ++w) avg += v.probs(w) * outputs[w];
    const Mat log_avg = log2_broadened(avg, 1e-30);
    Eigen::VectorXd d(k);
    for (Eigen::Index w = 0; w < k; ++w) {
      // D(sigma_w || sigma_bar) = -S(sigma_w) - tr[sigma_w log2 sigma_bar].
      d(w) = -out_entropy[w] - (outputs[w] * log_avg).trace().real();
    }
    const double lower = v.probs.dot(d);
    const double upper = d.maxCoeff();
    gap = upper - lower;
    if (gap < inner_tol) break;
    Eigen::VectorXd next(k);
    for (Eigen::Index w = 0; w < k; ++w) {
      next(w) = v.probs(w) * std::exp2(d(w) - upper);
    }
    const double z = next.sum();
    if (z <= 0) break;
    v.probs = next / z;
  }
  return gap;
}

// One gradient sweep over the states; only improving steps are kept.
double state_sweep(const Channel& ch, ChiVariables& v, double chi_now) {
  const Eigen::Index dout = ch.dim_out();
  const std::vector<Mat> kraus = ch.kraus_operators();
  for (size_t w = 0; w < v.states.size(); ++w) {
    const double p = v.probs(static_cast<Eigen::Index>(w));
    if (p < 1e-12) continue;
    Mat avg = Mat::Zero(dout, dout);
    for (size_t u = 0; u < v.states.size(); ++u) {
      const double pu = v.probs(static_cast<Eigen::Index>(u));
      if (pu > 0) avg += pu * ch.apply_matrix(v.states[u] * v.states[u].adjoint());
    }
    const Mat out_w = ch.apply_matrix(v.states[w] * v.states[w].adjoint());
    const Mat delta =
        log2_broadened(out_w, tol::eig_broadening) - log2_broadened(avg, tol::eig_broadening);

    // Riemannian ascent direction on the sphere.
    Mat pullback = Mat::Zero(ch.dim_in(), ch.dim_in());
    for (const Mat& kop : kraus) pullback += kop.adjoint() * delta * kop;
    Vec grad = p * (pullback * v.states[w]);
    const cplx radial = (v.states[w].adjoint() * grad).value();
    grad -= radial * v.states[w];
    if (grad.norm() < 1e-14) continue;

    double eta = 0.5;
    for (int bt = 0; bt < 20; ++bt) {
      Vec trial = v.states[w] + eta * grad;
      trial /= trial.norm();
      ChiVariables probe = v;
      probe.states[w] = trial;
      const double chi_trial = chi_value(ch, probe);
      if (chi_trial > chi_now + 1e-15) {
        v.states[w] = std::move(trial);
        chi_now = chi_trial;
        break;
      }
      eta *= 0.5;
    }
  }
  return chi_now;
}

ChiVariables chi_init(const Channel& ch, int restart, Rng& rng) {
  const Eigen::Index d = ch.dim_in();
  const Eigen::Index k = d * d;
  ChiVariables v;
  v.probs = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  for (Eigen::Index w = 0; w < k; ++w) {
    if (restart == 0 && w < d) {
      // Structured start: the computational-basis letters.
      v.states.push_back(Vec::Unit(d, w));
    } else {
      Vec psi(d);
      for (Eigen::Index i = 0; i < d; ++i) psi(i) = rng.complex_normal();
      psi /= psi.norm();
      v.states.push_back(std::move(psi));
    }
  }
  return v;
}

Ensemble chi_witness(const Channel& ch, const ChiVariables& v) {
  std::vector<std::pair<double, DensityOperator>> entries;
  double total = 0;
  for (size_t w = 0; w < v.states.size(); ++w) {
    const double p = v.probs(static_cast<Eigen::Index>(w));
    if (p < 1e-12) continue;
    total += p;
    entries.emplace_back(p, DensityOperator({{ch.input().label, ch.dim_in(), false}},
                                            v.states[w] * v.states[w].adjoint()));
  }
  for (auto& [p, st] : entries) p /= total;
  return Ensemble(std::move(entries));
}

}  // namespace

CapacityReport holevo_information(const Channel& ch, const SolverOptions& opts) {
  if (ch.dim_in() > opts.max_dim) {
    throw std::invalid_argument(fmt::format("channel input dimension {} exceeds solver cap {}",
                                            ch.dim_in(), opts.max_dim));
  }
  Rng rng(opts.seed);

  CapacityReport best;
  best.value_bits = -1;
  const int restarts = std::max(opts.restarts, 1);
  for (int r = 0; r < restarts; ++r) {
    ChiVariables v = chi_init(ch, r, rng);
    double chi = chi_value(ch, v);
    double gap = 1e300;
    int rounds = 0;
    bool converged = false;
    const int max_rounds = std::max(opts.max_iters / 50, 20);
    for (; rounds < max_rounds; ++rounds) {
      gap = ba_probability_step(ch, v, opts.tol * 1e-2, 2000);
      const double after_ba = chi_value(ch, v);
      const double after_sweep = state_sweep(ch, v, after_ba);
      if (after_sweep - chi < opts.tol) {
        chi = after_sweep;
        converged = true;
        break;
      }
      chi = after_sweep;
    }
    if (chi > best.value_bits) {
      const Ensemble witness = chi_witness(ch, v);
      best.value_bits = holevo_quantity(witness, ch);
      best.witness = witness;
      best.iterations = rounds;
      best.final_step_norm = gap;
      best.converged = converged;
    }
  }
  const double cap = std::log2(static_cast<double>(ch.dim_in() * ch.dim_out()));
  if (best.value_bits < -tol::mi || best.value_bits > cap + tol::mi) {
    throw std::runtime_error(fmt::format("Holevo value {} outside [0, {}]", best.value_bits, cap));
  }
  best.value_bits = std::max(best.value_bits, 0.0);
  return best;
}

CapacityReport blahut_arimoto(const Eigen::MatrixXd& transition, double tol_gap, int max_iters,
                              std::vector<double>* objective_trace) {
  const Eigen::Index dout = transition.rows();
  const Eigen::Index din = transition.cols();
  for (Eigen::Index x = 0; x < din; ++x) {
    if (std::abs(transition.col(x).sum() - 1.0) > tol::trace ||
        transition.col(x).minCoeff() < -tol::prob) {
      throw std::invalid_argument(fmt::format("column {} is not a distribution", x));
    }
  }

  Eigen::VectorXd p = Eigen::VectorXd::Constant(din, 1.0 / static_cast<double>(din));
  double lower = 0;
  double gap = 1e300;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    const Eigen::VectorXd q = transition * p;
    Eigen::VectorXd d(din);
    for (Eigen::Index x = 0; x < din; ++x) {
      double acc = 0;
      for (Eigen::Index y = 0; y < dout; ++y) {
        const double w = transition(y, x);
        if (w > 0) acc += w * std::log2(w / q(y));
      }
      d(x) = acc;
    }
    lower = p.dot(d);
    if (objective_trace) objective_trace->push_back(lower);
    const double upper = d.maxCoeff();
    gap = upper - lower;
    if (gap < tol_gap) break;
    for (Eigen::Index x = 0; x < din; ++x) p(x) *= std::exp2(d(x) - upper);
    p /= p.sum();
  }

  std::vector<std::pair<double, DensityOperator>> entries;
  for (Eigen::Index x = 0; x < din; ++x) {
    Mat m = Mat::Zero(din, din);
    m(x, x) = 1;
    entries.emplace_back(p(x), DensityOperator({{"X", din, true}}, std::move(m)));
  }
  CapacityReport report;
  report.value_bits = std::max(lower, 0.0);
  report.witness = Ensemble(std::move(entries));
  report.iterations = iter;
  report.final_step_norm = gap;
  report.converged = gap < tol_gap;
  return report;
}

double brute_force_qubit_mi(const Channel& ch, int grid) {
  if (ch.dim_in() != 2) {
    throw std::invalid_argument(
        fmt::format("brute_force_qubit_mi needs a qubit input, got dim {}", ch.dim_in()));
  }
  if (grid < 2) throw std::invalid_argument("grid resolution must be >= 2");

  Mat sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0, 1, 1, 0;
  sy << 0, cplx(0, -1), cplx(0, 1), 0;
  sz << 1, 0, 0, -1;

  const LiftedChannel lc(ch);
  double best = -1e300;
  for (int ri = 0; ri <= grid; ++ri) {
    const double r = static_cast<double>(ri) / grid;
    const int n_theta = (ri == 0) ? 0 : grid;  // the center needs one point
    for (int ti = 0; ti <= n_theta; ++ti) {
      const double theta =
          (n_theta == 0) ? 0.0 : std::numbers::pi * static_cast<double>(ti) / n_theta;
      const int n_phi = (ri == 0 || ti == 0 || ti == n_theta) ? 1 : grid;
      for (int pk = 0; pk < n_phi; ++pk) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(pk) / n_phi;
        const double nx = std::sin(theta) * std::cos(phi);
        const double ny = std::sin(theta) * std::sin(phi);
        const double nz = std::cos(theta);
        Mat rho = 0.5 * (Mat::Identity(2, 2) + r * (nx * sx + ny * sy + nz * sz));

        Eigen::SelfAdjointEigenSolver<Mat> es(rho);
        Mat a = Mat::Zero(2, 2);
        for (Eigen::Index i = 0; i < 2; ++i) {
          a += std::sqrt(std::max(es.eigenvalues()(i), 0.0)) * es.eigenvectors().col(i) *
               Eigen::RowVectorXcd::Unit(2, i);
        }
        best = std::max(best, objective_impl(lc, a));
      }
    }
  }
  return best;
}

}  // namespace qrand
