#pragma once

#include "qrand/povm.hpp"
#include "qrand/states.hpp"

#include <variant>
#include <vector>

namespace qrand {

// The four concrete channel forms.
struct KrausForm {
  std::vector<Mat> operators;  // dim_out x dim_in each; sum K^dag K = I
};
struct QcForm {
  Povm povm;  // outcome y emitted as a classical label
};
struct CqForm {
  std::vector<Mat> outputs;  // one output state per input letter
};
struct ClassicalForm {
  Eigen::MatrixXd transition;  // dim_out x dim_in; columns are distributions
};

class Channel {
 public:
  using Form = std::variant<KrausForm, QcForm, CqForm, ClassicalForm>;

  static Channel kraus(std::vector<Mat> operators, Register input, Register output);
  static Channel qc(Povm povm, Register input, Register output);
  static Channel cq(std::vector<Mat> outputs, Register input, Register output);
  static Channel classical(Eigen::MatrixXd transition, Register input, Register output);

  const Form& form() const { return form_; }
  const Register& input() const { return input_; }
  const Register& output() const { return output_; }
  Eigen::Index dim_in() const { return input_.dim; }
  Eigen::Index dim_out() const { return output_.dim; }

  // True when the output register is a classical label (qc or classical form).
  bool classical_output() const;
  bool classical_input() const;

  // Action on an arbitrary matrix of the input space (no state validation);
  // the channel is linear, so this defines it completely.
  Mat apply_matrix(const Mat& m) const;

  // A Kraus representation of whichever form is stored.
  std::vector<Mat> kraus_operators() const;

 private:
  Channel(Form f, Register in, Register out);

  Form form_;
  Register input_, output_;
};

// Applies the channel to the register of `rho` matching `in_label` (identity
// on everything else); the slot is replaced by a register named `out_label`.
DensityOperator apply(const Channel& ch, const DensityOperator& rho,
                      const std::string& in_label, const std::string& out_label);

// Uses the channel's own register labels.
DensityOperator apply(const Channel& ch, const DensityOperator& rho);

// Compositional identities checked on the matrix-unit spanning set:
// qc iff dephasing after the channel changes nothing, cq iff dephasing the
// input first changes nothing.
bool is_qc(const Channel& ch);
bool is_cq(const Channel& ch);

// The two-basis measurement channel: a fair bit G selects the computational
// (G=0) or Fourier (G=1) basis, M is the measurement result, and the output
// label is y = G*d + M. POVM elements are (1/2) E^(G)(M).
Channel example_channel_F(Eigen::Index d);

Channel identity_channel(Eigen::Index d);
Channel classical_identity_channel(Eigen::Index m);
Channel binary_symmetric_channel(double flip);
// rho -> (1-p) rho + p I/2 on a qubit.
Channel depolarizing_qubit_channel(double p);

}  // namespace qrand
