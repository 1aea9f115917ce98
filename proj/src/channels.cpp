#include "qrand/channels.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace qrand {

namespace {

void check_kraus(const std::vector<Mat>& ops, Eigen::Index din, Eigen::Index dout) {
  if (ops.empty()) throw std::invalid_argument("Kraus channel needs at least one operator");
  Mat sum = Mat::Zero(din, din);
  for (size_t k = 0; k < ops.size(); ++k) {
    if (ops[k].rows() != dout || ops[k].cols() != din) {
      throw std::invalid_argument(fmt::format("Kraus operator {} is {}x{}, expected {}x{}", k,
                                              ops[k].rows(), ops[k].cols(), dout, din));
    }
    sum += ops[k].adjoint() * ops[k];
  }
  const double res = (sum - Mat::Identity(din, din)).cwiseAbs().maxCoeff();
  if (res > tol::povm) {
    throw std::invalid_argument(
        fmt::format("Kraus completeness residual {:.3e} exceeds {:.1e}", res, tol::povm));
  }
}

void check_cq(const std::vector<Mat>& outputs, Eigen::Index din, Eigen::Index dout) {
  if (static_cast<Eigen::Index>(outputs.size()) != din) {
    throw std::invalid_argument(fmt::format("cq channel has {} output states for {} input letters",
                                            outputs.size(), din));
  }
  for (size_t x = 0; x < outputs.size(); ++x) {
    // Constructor runs the full state validation.
    DensityOperator probe({{"out", dout, false}}, outputs[x]);
    (void)probe;
  }
}

void check_classical(const Eigen::MatrixXd& t, Eigen::Index din, Eigen::Index dout) {
  if (t.rows() != dout || t.cols() != din) {
    throw std::invalid_argument(fmt::format("transition matrix is {}x{}, expected {}x{}", t.rows(),
                                            t.cols(), dout, din));
  }
  for (Eigen::Index x = 0; x < din; ++x) {
    if (t.col(x).minCoeff() < -tol::prob) {
      throw std::invalid_argument(
          fmt::format("transition column {} has negative entry {:.3e}", x, t.col(x).minCoeff()));
    }
    if (std::abs(t.col(x).sum() - 1.0) > tol::trace) {
      throw std::invalid_argument(
          fmt::format("transition column {} sums to {} (not 1)", x, t.col(x).sum()));
    }
  }
}

std::vector<Mat> rank_one_factors(const Mat& psd) {
  Eigen::SelfAdjointEigenSolver<Mat> es(psd);
  std::vector<Mat> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam > 1e-14) {
      out.push_back(std::sqrt(lam) * es.eigenvectors().col(i));
    }
  }
  return out;
}

}  // namespace

Channel::Channel(Form f, Register in, Register out)
    : form_(std::move(f)), input_(std::move(in)), output_(std::move(out)) {
  if (input_.dim < 1 || output_.dim < 1) {
    throw std::invalid_argument("channel registers need dim >= 1");
  }
}

Channel Channel::kraus(std::vector<Mat> operators, Register input, Register output) {
  check_kraus(operators, input.dim, output.dim);
  return Channel(KrausForm{std::move(operators)}, std::move(input), std::move(output));
}

Channel Channel::qc(Povm povm, Register input, Register output) {
  if (povm.dim() != input.dim) {
    throw std::invalid_argument(fmt::format("POVM dimension {} does not match input dim {}",
                                            povm.dim(), input.dim));
  }
  if (static_cast<Eigen::Index>(povm.size()) != output.dim) {
    throw std::invalid_argument(fmt::format("POVM has {} outcomes but output dim is {}",
                                            povm.size(), output.dim));
  }
  output.classical = true;
  return Channel(QcForm{std::move(povm)}, std::move(input), std::move(output));
}

Channel Channel::cq(std::vector<Mat> outputs, Register input, Register output) {
  check_cq(outputs, input.dim, output.dim);
  input.classical = true;
  return Channel(CqForm{std::move(outputs)}, std::move(input), std::move(output));
}

Channel Channel::classical(Eigen::MatrixXd transition, Register input, Register output) {
  check_classical(transition, input.dim, output.dim);
  input.classical = true;
  output.classical = true;
  return Channel(ClassicalForm{std::move(transition)}, std::move(input), std::move(output));
}

bool Channel::classical_output() const {
  return std::holds_alternative<QcForm>(form_) || std::holds_alternative<ClassicalForm>(form_);
}

bool Channel::classical_input() const {
  return std::holds_alternative<CqForm>(form_) || std::holds_alternative<ClassicalForm>(form_);
}

Mat Channel::apply_matrix(const Mat& m) const {
  if (m.rows() != dim_in() || m.cols() != dim_in()) {
    throw std::invalid_argument(fmt::format("input matrix is {}x{}, channel input dim is {}",
                                            m.rows(), m.cols(), dim_in()));
  }
  const Eigen::Index dout = dim_out();
  return std::visit(
      [&](const auto& f) -> Mat {
        using T = std::decay_t<decltype(f)>;
        Mat out = Mat::Zero(dout, dout);
        if constexpr (std::is_same_v<T, KrausForm>) {
          for (const Mat& k : f.operators) out += k * m * k.adjoint();
        } else if constexpr (std::is_same_v<T, QcForm>) {
          for (size_t y = 0; y < f.povm.size(); ++y) {
            const Eigen::Index yy = static_cast<Eigen::Index>(y);
            out(yy, yy) = (f.povm.elements()[y].transpose().cwiseProduct(m)).sum();
          }
        } else if constexpr (std::is_same_v<T, CqForm>) {
          for (Eigen::Index x = 0; x < dim_in(); ++x) out += m(x, x) * f.outputs[x];
        } else {
          for (Eigen::Index y = 0; y < dout; ++y) {
            for (Eigen::Index x = 0; x < dim_in(); ++x) {
              out(y, y) += f.transition(y, x) * m(x, x);
            }
          }
        }
        return out;
      },
      form_);
}

std::vector<Mat> Channel::kraus_operators() const {
  const Eigen::Index din = dim_in();
  const Eigen::Index dout = dim_out();
  return std::visit(
      [&](const auto& f) -> std::vector<Mat> {
        using T = std::decay_t<decltype(f)>;
        std::vector<Mat> ops;
        if constexpr (std::is_same_v<T, KrausForm>) {
          ops = f.operators;
        } else if constexpr (std::is_same_v<T, QcForm>) {
          for (size_t y = 0; y < f.povm.size(); ++y) {
            Vec ey = Vec::Zero(dout);
            ey(static_cast<Eigen::Index>(y)) = 1;
            for (const Mat& v : rank_one_factors(f.povm.elements()[y])) {
              ops.push_back(ey * v.adjoint());
            }
          }
        } else if constexpr (std::is_same_v<T, CqForm>) {
          for (Eigen::Index x = 0; x < din; ++x) {
            Vec ex = Vec::Zero(din);
            ex(x) = 1;
            for (const Mat& v : rank_one_factors(f.outputs[x])) {
              ops.push_back(v * ex.adjoint());
            }
          }
        } else {
          for (Eigen::Index y = 0; y < dout; ++y) {
            for (Eigen::Index x = 0; x < din; ++x) {
              if (f.transition(y, x) <= 0) continue;
              Mat k = Mat::Zero(dout, din);
              k(y, x) = std::sqrt(f.transition(y, x));
              ops.push_back(std::move(k));
            }
          }
        }
        return ops;
      },
      form_);
}

DensityOperator apply(const Channel& ch, const DensityOperator& rho,
                      const std::string& in_label, const std::string& out_label) {
  const size_t pos = rho.position(in_label);
  if (rho.registers()[pos].dim != ch.dim_in()) {
    throw std::invalid_argument(fmt::format("register '{}' has dim {} but channel expects {}",
                                            in_label, rho.registers()[pos].dim, ch.dim_in()));
  }
  Register out_reg = ch.output();
  out_reg.label = out_label;

  Mat acc;
  std::vector<Register> new_regs;
  bool first = true;
  for (const Mat& k : ch.kraus_operators()) {
    auto [lifted, regs] = embed_operator(rho.registers(), {pos}, {out_reg}, k);
    Mat term = lifted * rho.matrix() * lifted.adjoint();
    if (first) {
      acc = std::move(term);
      new_regs = std::move(regs);
      first = false;
    } else {
      acc += term;
    }
  }
  // Classical-label outputs come out exactly diagonal: every lifted Kraus
  // term carries a single |y><y| factor on the output slot.
  return DensityOperator::clipped(new_regs, acc);
}

DensityOperator apply(const Channel& ch, const DensityOperator& rho) {
  return apply(ch, rho, ch.input().label, ch.output().label);
}

namespace {

Mat dephase_full(const Mat& m) {
  return m.diagonal().asDiagonal();
}

}  // namespace

bool is_qc(const Channel& ch) {
  const Eigen::Index d = ch.dim_in();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Mat unit = Mat::Zero(d, d);
      unit(i, j) = 1;
      const Mat image = ch.apply_matrix(unit);
      if ((dephase_full(image) - image).cwiseAbs().maxCoeff() > tol::chan) return false;
    }
  }
  return true;
}

bool is_cq(const Channel& ch) {
  const Eigen::Index d = ch.dim_in();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Mat unit = Mat::Zero(d, d);
      unit(i, j) = 1;
      const Mat diff = ch.apply_matrix(dephase_full(unit)) - ch.apply_matrix(unit);
      if (diff.cwiseAbs().maxCoeff() > tol::chan) return false;
    }
  }
  return true;
}

Channel example_channel_F(Eigen::Index d) {
  if (d < 2) throw std::invalid_argument("example_channel_F needs dimension >= 2");
  const Povm comp = computational_basis(d);
  const Povm four = fourier_basis(d);
  std::vector<std::string> outcomes;
  std::vector<Mat> elements;
  for (Eigen::Index g = 0; g < 2; ++g) {
    const Povm& basis = (g == 0) ? comp : four;
    for (Eigen::Index m = 0; m < d; ++m) {
      outcomes.push_back(fmt::format("{}:{}", g, m));
      elements.push_back(0.5 * basis.elements()[m]);
    }
  }
  return Channel::qc(Povm(std::move(outcomes), std::move(elements)), {"X", d, false},
                     {"Y", 2 * d, true});
}

Channel identity_channel(Eigen::Index d) {
  return Channel::kraus({Mat::Identity(d, d)}, {"X", d, false}, {"Y", d, false});
}

Channel classical_identity_channel(Eigen::Index m) {
  return Channel::classical(Eigen::MatrixXd::Identity(m, m), {"X", m, true}, {"Y", m, true});
}

Channel binary_symmetric_channel(double flip) {
  if (flip < 0 || flip > 1) throw std::invalid_argument("flip probability must be in [0,1]");
  Eigen::MatrixXd t(2, 2);
  t << 1 - flip, flip, flip, 1 - flip;
  return Channel::classical(std::move(t), {"X", 2, true}, {"Y", 2, true});
}

Channel depolarizing_qubit_channel(double p) {
  if (p < 0 || p > 4.0 / 3.0) throw std::invalid_argument("depolarizing strength out of range");
  Mat id = Mat::Identity(2, 2);
  Mat x(2, 2), y(2, 2), z(2, 2);
  x << 0, 1, 1, 0;
  y << 0, cplx(0, -1), cplx(0, 1), 0;
  z << 1, 0, 0, -1;
  std::vector<Mat> ops = {std::sqrt(1 - 3 * p / 4) * id, std::sqrt(p / 4) * x,
                          std::sqrt(p / 4) * y, std::sqrt(p / 4) * z};
  return Channel::kraus(std::move(ops), {"X", 2, false}, {"Y", 2, false});
}

}  // namespace qrand
