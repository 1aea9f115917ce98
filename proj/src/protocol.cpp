#include "qrand/protocol.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <stdexcept>

#include "qrand/entropy.hpp"

namespace qrand {

const char* party_name(Party p) { return p == Party::alice ? "alice" : "bob"; }

Eigen::Index default_max_dim(Eigen::Index fallback) {
  if (const char* env = std::getenv("QRAND_MAX_DIM")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<Eigen::Index>(v);
  }
  return fallback;
}

int Protocol::noisy_uses() const {
  int n = 0;
  for (const auto& s : steps) n += std::holds_alternative<NoisyUse>(s) ? 1 : 0;
  return n;
}

int Protocol::back_steps() const {
  int n = 0;
  for (const auto& s : steps) n += std::holds_alternative<AuxBack>(s) ? 1 : 0;
  return n;
}

double Protocol::c_value() const {
  if (c) return *c;
  const int n = noisy_uses();
  return std::ceil(std::log2(static_cast<double>(alphabet_k))) / std::max(n, 1);
}

void Protocol::validate() const {
  const int n = noisy_uses();
  if (n < 1) {
    throw std::invalid_argument(
        fmt::format("protocol '{}' has no noisy channel use; auxiliary communication alone "
                    "is not a valid protocol",
                    name));
  }
  if (alphabet_k < 1) throw std::invalid_argument("alphabet_k must be >= 1");
  const double cv = c_value();
  if (std::log2(static_cast<double>(alphabet_k)) > cv * n + 1e-12) {
    throw std::invalid_argument(
        fmt::format("randomness alphabet bound violated: |A_K| = {} exceeds 2^(c n) = 2^({} * {})",
                    alphabet_k, cv, n));
  }
  std::set<std::string> sent;
  for (const auto& s : steps) {
    const std::string* reg = nullptr;
    if (const auto* f = std::get_if<AuxForward>(&s)) reg = &f->reg;
    if (const auto* b = std::get_if<AuxBack>(&s)) reg = &b->reg;
    if (reg && !sent.insert(*reg).second) {
      throw std::invalid_argument(
          fmt::format("auxiliary register '{}' is communicated twice", *reg));
    }
  }
}

namespace {

struct ClassicalInfo {
  std::string label;
  Eigen::Index dim = 1;
  bool alice_has = false;
  bool bob_has = false;
  int aux_order = -1;  // order among communicated registers, -1 if local
  bool aux_forward = false;
};

struct Branch {
  double prob = 0;
  std::vector<int> values;
  Mat state;
};

// Hermitizes and normalizes in place; returns the trace.
double clipped_renorm(Mat& m) {
  m = (0.5 * (m + m.adjoint())).eval();
  const double tr = m.trace().real();
  if (tr > 0) m /= tr;
  return tr;
}

Mat ptrace_positions(const std::vector<Register>& regs, const Mat& m,
                     const std::vector<size_t>& keep) {
  const auto idx = make_subspace_index(regs, keep);
  const Eigen::Index dk = static_cast<Eigen::Index>(idx.sel_offsets.size());
  Mat out = Mat::Zero(dk, dk);
  for (Eigen::Index i = 0; i < dk; ++i) {
    for (Eigen::Index j = 0; j < dk; ++j) {
      cplx acc = 0;
      for (Eigen::Index t : idx.rest_offsets) {
        acc += m(idx.sel_offsets[i] + t, idx.sel_offsets[j] + t);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

class Engine {
 public:
  Engine(const Protocol& p, Eigen::Index max_dim) : p_(p), max_dim_(max_dim) {}

  TraceReport run();

 private:
  const Protocol& p_;
  Eigen::Index max_dim_;

  std::vector<ClassicalInfo> cinfo_;
  std::map<std::string, size_t> cindex_;
  std::vector<Register> qregs_;
  std::map<std::string, Party> qowner_;
  std::vector<Branch> branches_;
  int n_done_ = 0;
  int aux_count_ = 0;

  TraceReport report_;

  bool is_classical(const std::string& label) const { return cindex_.count(label) > 0; }

  size_t classical_at(const std::string& label) const {
    auto it = cindex_.find(label);
    if (it == cindex_.end()) {
      throw std::invalid_argument(fmt::format("unknown classical register '{}'", label));
    }
    return it->second;
  }

  size_t quantum_at(const std::string& label) const {
    for (size_t i = 0; i < qregs_.size(); ++i) {
      if (qregs_[i].label == label) return i;
    }
    throw std::invalid_argument(fmt::format("unknown quantum register '{}'", label));
  }

  void assert_fresh(const std::string& label, int step) const {
    if (is_classical(label) || qowner_.count(label)) {
      throw std::invalid_argument(
          fmt::format("step {}: register label '{}' already exists", step, label));
    }
  }

  size_t register_classical(const std::string& label, Eigen::Index dim, Party owner, int step) {
    assert_fresh(label, step);
    ClassicalInfo info;
    info.label = label;
    info.dim = dim;
    info.alice_has = owner == Party::alice;
    info.bob_has = owner == Party::bob;
    cindex_[label] = cinfo_.size();
    cinfo_.push_back(std::move(info));
    return cinfo_.size() - 1;
  }

  void check_dim(Eigen::Index dim, int step, const std::string& what) const {
    if (dim > max_dim_) {
      throw std::runtime_error(
          fmt::format("step {} ({}) needs quantum dimension {} which exceeds the cap {}", step,
                      what, dim, max_dim_));
    }
  }

  void init();
  void enumerate_initial_classical(const DensityOperator& joint);

  void run_step(const ProtocolStep& s, int step);
  void do_noisy(const NoisyUse& s, int step);
  void do_aux(const std::string& reg, bool forward, int step);
  void do_instrument(Party party, const QuantumInstrument& ins, int step);
  void do_compute(Party party, const ClassicalCompute& cc, int step);

  void merge_branches();
  void assert_probability_sum(int step) const;
  void drop_dead_registers(int step);

  double bipartite_mi() const;
  double aux_conditional_entropy(int upto_order) const;

  int apply_extractor_povm(const Extractor& ex, Party party, const std::string& tmp_label,
                           int step);
  Eigen::Index extract_value(const Extractor& ex, const Branch& b,
                             std::optional<size_t> povm_slot) const;
  void finish_report();
};

void Engine::init() {
  DensityOperator joint = tensor(p_.initial_alice, p_.initial_bob);
  for (const Register& r : p_.initial_alice.registers()) {
    if (!r.classical) qowner_[r.label] = Party::alice;
  }
  for (const Register& r : p_.initial_bob.registers()) {
    if (!r.classical) qowner_[r.label] = Party::bob;
  }
  enumerate_initial_classical(joint);
}

void Engine::enumerate_initial_classical(const DensityOperator& joint) {
  std::vector<size_t> classical_pos;
  for (size_t i = 0; i < joint.registers().size(); ++i) {
    const Register& r = joint.registers()[i];
    if (!r.classical) continue;
    const auto dp = dephase(joint, r.label);
    if ((dp.matrix() - joint.matrix()).cwiseAbs().maxCoeff() > tol::herm) {
      throw std::invalid_argument(fmt::format(
          "initial register '{}' is flagged classical but carries coherences", r.label));
    }
    classical_pos.push_back(i);
  }

  for (size_t pos : classical_pos) {
    const Register& r = joint.registers()[pos];
    const Party owner = p_.initial_alice.has(r.label) ? Party::alice : Party::bob;
    register_classical(r.label, r.dim, owner, -1);
  }
  qregs_ = erase_positions(joint.registers(), classical_pos);
  check_dim(total_dim(qregs_), -1, "initial state");

  const auto idx = make_subspace_index(joint.registers(), classical_pos);
  const Eigen::Index n_assign = static_cast<Eigen::Index>(idx.sel_offsets.size());
  const Eigen::Index dq = static_cast<Eigen::Index>(idx.rest_offsets.size());
  std::vector<Eigen::Index> dims;
  for (size_t pos : classical_pos) dims.push_back(joint.registers()[pos].dim);

  for (Eigen::Index a = 0; a < n_assign; ++a) {
    Mat block(dq, dq);
    for (Eigen::Index i = 0; i < dq; ++i) {
      for (Eigen::Index j = 0; j < dq; ++j) {
        block(i, j) = joint.matrix()(idx.sel_offsets[a] + idx.rest_offsets[i],
                                     idx.sel_offsets[a] + idx.rest_offsets[j]);
      }
    }
    const double prob = block.trace().real();
    if (prob <= tol::prob) continue;
    block /= prob;
    Branch b;
    b.prob = prob;
    b.state = std::move(block);
    b.values.assign(dims.size(), 0);
    Eigen::Index rem = a;
    for (size_t k = dims.size(); k-- > 0;) {
      b.values[k] = static_cast<int>(rem % dims[k]);
      rem /= dims[k];
    }
    branches_.push_back(std::move(b));
  }
}

void Engine::do_noisy(const NoisyUse& s, int step) {
  const Channel& ch = s.channel;
  assert_fresh(s.output, step);

  const bool quantum_input = qowner_.count(s.input) > 0;
  if (quantum_input) {
    if (qowner_.at(s.input) != Party::alice) {
      throw std::invalid_argument(
          fmt::format("step {}: noisy-channel input '{}' is not held by Alice", step, s.input));
    }
    if (qregs_[quantum_at(s.input)].dim != ch.dim_in()) {
      throw std::invalid_argument(
          fmt::format("step {}: input '{}' has dim {}, channel expects {}", step, s.input,
                      qregs_[quantum_at(s.input)].dim, ch.dim_in()));
    }
  } else {
    const ClassicalInfo& info = cinfo_[classical_at(s.input)];
    if (!info.alice_has) {
      throw std::invalid_argument(
          fmt::format("step {}: classical input '{}' is not held by Alice", step, s.input));
    }
    if (info.dim != ch.dim_in()) {
      throw std::invalid_argument(fmt::format("step {}: input '{}' has dim {}, channel expects {}",
                                              step, s.input, info.dim, ch.dim_in()));
    }
  }

  if (ch.classical_output()) {
    std::vector<Mat> povm_elements;
    if (const auto* qc = std::get_if<QcForm>(&ch.form())) {
      povm_elements = qc->povm.elements();
    } else {
      const auto& t = std::get<ClassicalForm>(ch.form()).transition;
      for (Eigen::Index y = 0; y < ch.dim_out(); ++y) {
        Mat e = Mat::Zero(ch.dim_in(), ch.dim_in());
        for (Eigen::Index x = 0; x < ch.dim_in(); ++x) e(x, x) = t(y, x);
        povm_elements.push_back(std::move(e));
      }
    }

    std::vector<Branch> next;
    if (quantum_input) {
      const size_t pos = quantum_at(s.input);
      for (const Branch& b : branches_) {
        for (Eigen::Index y = 0; y < ch.dim_out(); ++y) {
          Mat block = op_trace(qregs_, b.state, {pos}, povm_elements[y]);
          const double py = clipped_renorm(block);
          if (py <= tol::prob) continue;
          Branch nb;
          nb.prob = b.prob * py;
          nb.values = b.values;
          nb.values.push_back(static_cast<int>(y));
          nb.state = std::move(block);
          next.push_back(std::move(nb));
        }
      }
      qregs_ = erase_positions(qregs_, {pos});
      qowner_.erase(s.input);
    } else {
      const size_t ci = classical_at(s.input);
      for (const Branch& b : branches_) {
        const int v = b.values[ci];
        for (Eigen::Index y = 0; y < ch.dim_out(); ++y) {
          const double py = povm_elements[y](v, v).real();
          if (py <= tol::prob) continue;
          Branch nb = b;
          nb.prob = b.prob * py;
          nb.values.push_back(static_cast<int>(y));
          next.push_back(std::move(nb));
        }
      }
    }
    register_classical(s.output, ch.dim_out(), Party::bob, step);
    branches_ = std::move(next);
  } else {
    Register out_reg = ch.output();
    out_reg.label = s.output;
    if (quantum_input) {
      const size_t pos = quantum_at(s.input);
      check_dim(total_dim(qregs_) / qregs_[pos].dim * out_reg.dim, step, "noisy use");
      std::vector<Mat> lifted;
      std::vector<Register> new_regs = qregs_;
      for (const Mat& k : ch.kraus_operators()) {
        auto [l, regs] = embed_operator(qregs_, {pos}, {out_reg}, k);
        lifted.push_back(std::move(l));
        new_regs = std::move(regs);
      }
      for (Branch& b : branches_) {
        Mat acc = Mat::Zero(lifted[0].rows(), lifted[0].rows());
        for (const Mat& l : lifted) acc += l * b.state * l.adjoint();
        clipped_renorm(acc);
        b.state = std::move(acc);
      }
      qregs_ = std::move(new_regs);
      qowner_.erase(s.input);
    } else {
      const size_t ci = classical_at(s.input);
      check_dim(total_dim(qregs_) * out_reg.dim, step, "noisy use");
      std::vector<Mat> images;
      for (Eigen::Index v = 0; v < ch.dim_in(); ++v) {
        Mat unit = Mat::Zero(ch.dim_in(), ch.dim_in());
        unit(v, v) = 1;
        images.push_back(ch.apply_matrix(unit));
      }
      for (Branch& b : branches_) {
        const Mat& img = images[static_cast<size_t>(b.values[ci])];
        const Eigen::Index dq = b.state.rows();
        const Eigen::Index di = img.rows();
        Mat acc(dq * di, dq * di);
        for (Eigen::Index i = 0; i < dq; ++i) {
          for (Eigen::Index j = 0; j < dq; ++j) {
            acc.block(i * di, j * di, di, di) = b.state(i, j) * img;
          }
        }
        clipped_renorm(acc);
        b.state = std::move(acc);
      }
      qregs_.push_back(out_reg);
    }
    qowner_[s.output] = Party::bob;
  }
  ++n_done_;
}

void Engine::do_aux(const std::string& reg, bool forward, int step) {
  ClassicalInfo& info = cinfo_[classical_at(reg)];
  if (info.aux_order >= 0) {
    throw std::invalid_argument(
        fmt::format("step {}: auxiliary register '{}' was already communicated", step, reg));
  }
  const bool sender_has = forward ? info.alice_has : info.bob_has;
  if (!sender_has) {
    throw std::invalid_argument(fmt::format("step {}: '{}' is not held by the {} sender", step,
                                            reg, forward ? "forward" : "back"));
  }
  info.alice_has = true;
  info.bob_has = true;
  info.aux_order = aux_count_++;
  info.aux_forward = forward;

  report_.aux_cond_entropy.push_back(aux_conditional_entropy(info.aux_order));
}

void Engine::do_instrument(Party party, const QuantumInstrument& ins, int step) {
  std::vector<size_t> control_idx;
  for (const auto& label : ins.controls) {
    const size_t ci = classical_at(label);
    const ClassicalInfo& info = cinfo_[ci];
    if (!(party == Party::alice ? info.alice_has : info.bob_has)) {
      throw std::invalid_argument(fmt::format("step {}: control '{}' is not held by {}", step,
                                              label, party_name(party)));
    }
    control_idx.push_back(ci);
  }
  std::vector<size_t> in_pos;
  Eigen::Index din = 1;
  for (const auto& label : ins.quantum_in) {
    const size_t pos = quantum_at(label);
    if (qowner_.at(label) != party) {
      throw std::invalid_argument(fmt::format("step {}: quantum register '{}' is not held by {}",
                                              step, label, party_name(party)));
    }
    in_pos.push_back(pos);
    din *= qregs_[pos].dim;
  }
  if (in_pos.empty()) {
    throw std::invalid_argument(
        fmt::format("step {}: instrument needs at least one quantum input", step));
  }
  Eigen::Index dout = 1;
  for (const Register& r : ins.quantum_out) dout *= r.dim;
  const size_t n_outcomes = ins.outcome ? static_cast<size_t>(ins.outcome->dim) : 1;

  std::map<std::vector<int>, const KrausCase*> case_map;
  for (const KrausCase& kc : ins.cases) {
    if (kc.when.size() != ins.controls.size()) {
      throw std::invalid_argument(
          fmt::format("step {}: case selector has {} values for {} controls", step,
                      kc.when.size(), ins.controls.size()));
    }
    if (!case_map.emplace(kc.when, &kc).second) {
      throw std::invalid_argument(fmt::format("step {}: duplicate instrument case", step));
    }
    if (kc.kraus_by_outcome.size() != n_outcomes) {
      throw std::invalid_argument(fmt::format("step {}: case provides {} outcomes, expected {}",
                                              step, kc.kraus_by_outcome.size(), n_outcomes));
    }
    Mat sum = Mat::Zero(din, din);
    for (const auto& ops : kc.kraus_by_outcome) {
      for (const Mat& k : ops) {
        if (k.rows() != dout || k.cols() != din) {
          throw std::invalid_argument(fmt::format("step {}: Kraus block is {}x{}, expected {}x{}",
                                                  step, k.rows(), k.cols(), dout, din));
        }
        sum += k.adjoint() * k;
      }
    }
    if ((sum - Mat::Identity(din, din)).cwiseAbs().maxCoeff() > tol::povm) {
      throw std::invalid_argument(
          fmt::format("step {}: instrument case is not trace preserving", step));
    }
  }

  check_dim(total_dim(qregs_) / din * std::max<Eigen::Index>(dout, 1), step, "local instrument");

  // Lift each Kraus operator once; the geometry is shared across branches.
  std::vector<Register> new_regs;
  std::map<const Mat*, Mat> lifted;
  for (const KrausCase& kc : ins.cases) {
    for (const auto& ops : kc.kraus_by_outcome) {
      for (const Mat& k : ops) {
        auto [l, regs] = embed_operator(qregs_, in_pos, ins.quantum_out, k);
        lifted.emplace(&k, std::move(l));
        new_regs = std::move(regs);
      }
    }
  }

  std::vector<Branch> next;
  for (const Branch& b : branches_) {
    std::vector<int> key;
    for (size_t ci : control_idx) key.push_back(b.values[ci]);
    const auto it = case_map.find(key);
    if (it == case_map.end()) {
      throw std::invalid_argument(
          fmt::format("step {}: no instrument case for control assignment", step));
    }
    const KrausCase& kc = *it->second;
    for (size_t z = 0; z < n_outcomes; ++z) {
      const Eigen::Index dnew = total_dim(new_regs);
      Mat acc = Mat::Zero(dnew, dnew);
      for (const Mat& k : kc.kraus_by_outcome[z]) {
        const Mat& l = lifted.at(&k);
        acc += l * b.state * l.adjoint();
      }
      const double pz = acc.trace().real();
      if (pz <= tol::prob) continue;
      clipped_renorm(acc);
      Branch nb;
      nb.prob = b.prob * pz;
      nb.values = b.values;
      if (ins.outcome) nb.values.push_back(static_cast<int>(z));
      nb.state = std::move(acc);
      next.push_back(std::move(nb));
    }
  }

  for (const auto& label : ins.quantum_in) qowner_.erase(label);
  for (const Register& r : ins.quantum_out) {
    assert_fresh(r.label, step);
    qowner_[r.label] = party;
  }
  qregs_ = std::move(new_regs);
  branches_ = std::move(next);
  if (ins.outcome) {
    register_classical(ins.outcome->label, ins.outcome->dim, party, step);
  }
}

void Engine::do_compute(Party party, const ClassicalCompute& cc, int step) {
  std::vector<size_t> idxs;
  Eigen::Index span = 1;
  for (const auto& label : cc.inputs) {
    const size_t ci = classical_at(label);
    const ClassicalInfo& info = cinfo_[ci];
    if (!(party == Party::alice ? info.alice_has : info.bob_has)) {
      throw std::invalid_argument(fmt::format("step {}: compute input '{}' is not held by {}",
                                              step, label, party_name(party)));
    }
    idxs.push_back(ci);
    span *= info.dim;
  }
  if (static_cast<Eigen::Index>(cc.table.size()) != span) {
    throw std::invalid_argument(fmt::format("step {}: compute table has {} entries, expected {}",
                                            step, cc.table.size(), span));
  }
  for (int v : cc.table) {
    if (v < 0 || v >= cc.output.dim) {
      throw std::invalid_argument(
          fmt::format("step {}: compute table value {} outside [0, {})", step, v, cc.output.dim));
    }
  }
  register_classical(cc.output.label, cc.output.dim, party, step);
  for (Branch& b : branches_) {
    Eigen::Index key = 0;
    for (size_t ci : idxs) key = key * cinfo_[ci].dim + b.values[ci];
    b.values.push_back(cc.table[static_cast<size_t>(key)]);
  }
}

void Engine::run_step(const ProtocolStep& s, int step) {
  if (const auto* noisy = std::get_if<NoisyUse>(&s)) {
    do_noisy(*noisy, step);
  } else if (const auto* fwd = std::get_if<AuxForward>(&s)) {
    do_aux(fwd->reg, true, step);
  } else if (const auto* back = std::get_if<AuxBack>(&s)) {
    do_aux(back->reg, false, step);
  } else {
    const LocalOp& op = std::get<LocalOp>(s);
    if (const auto* ins = std::get_if<QuantumInstrument>(&op.op)) {
      do_instrument(op.party, *ins, step);
    } else {
      do_compute(op.party, std::get<ClassicalCompute>(op.op), step);
    }
  }
}

void Engine::merge_branches() {
  std::sort(branches_.begin(), branches_.end(),
            [](const Branch& a, const Branch& b) { return a.values < b.values; });
  std::vector<Branch> merged;
  for (Branch& b : branches_) {
    if (!merged.empty() && merged.back().values == b.values) {
      Branch& m = merged.back();
      const double total = m.prob + b.prob;
      m.state = ((m.prob / total) * m.state + (b.prob / total) * b.state).eval();
      m.prob = total;
    } else {
      merged.push_back(std::move(b));
    }
  }
  branches_ = std::move(merged);
}

void Engine::assert_probability_sum(int step) const {
  double total = 0;
  for (const Branch& b : branches_) total += b.prob;
  if (std::abs(total - 1.0) > tol::trace) {
    throw std::runtime_error(fmt::format("step {}: branch probabilities sum to {} (off by {:.3e})",
                                         step, total, total - 1.0));
  }
}

void Engine::drop_dead_registers(int step) {
  std::set<std::string> needed;
  for (size_t j = static_cast<size_t>(step) + 1; j < p_.steps.size(); ++j) {
    const ProtocolStep& s = p_.steps[j];
    if (const auto* noisy = std::get_if<NoisyUse>(&s)) {
      needed.insert(noisy->input);
    } else if (const auto* op = std::get_if<LocalOp>(&s)) {
      if (const auto* ins = std::get_if<QuantumInstrument>(&op->op)) {
        for (const auto& l : ins->quantum_in) needed.insert(l);
      }
    }
  }
  for (const auto& l : p_.j_extractor.quantum_inputs) needed.insert(l);
  for (const auto& l : p_.k_extractor.quantum_inputs) needed.insert(l);

  std::vector<size_t> keep;
  std::vector<std::string> dropped;
  for (size_t i = 0; i < qregs_.size(); ++i) {
    if (needed.count(qregs_[i].label)) {
      keep.push_back(i);
    } else {
      dropped.push_back(qregs_[i].label);
    }
  }
  if (dropped.empty()) return;
  for (Branch& b : branches_) b.state = ptrace_positions(qregs_, b.state, keep);
  std::vector<Register> reduced;
  for (size_t i : keep) reduced.push_back(qregs_[i]);
  qregs_ = std::move(reduced);
  for (const auto& l : dropped) qowner_.erase(l);
}

double Engine::bipartite_mi() const {
  // The global state is block diagonal over classical assignments, so each
  // cut entropy is a Shannon term over value groups plus the average block
  // entropy.
  auto side_entropy = [&](bool alice, bool both) {
    std::vector<size_t> visible;
    for (size_t i = 0; i < cinfo_.size(); ++i) {
      if (both || (alice ? cinfo_[i].alice_has : cinfo_[i].bob_has)) visible.push_back(i);
    }
    std::vector<size_t> qkeep;
    for (size_t i = 0; i < qregs_.size(); ++i) {
      const Party owner = qowner_.at(qregs_[i].label);
      if (both || (alice ? owner == Party::alice : owner == Party::bob)) qkeep.push_back(i);
    }
    Eigen::Index dq = 1;
    for (size_t i : qkeep) dq *= qregs_[i].dim;

    std::map<std::vector<int>, std::pair<double, Mat>> groups;
    for (const Branch& b : branches_) {
      std::vector<int> key;
      for (size_t ci : visible) key.push_back(b.values[ci]);
      auto [it, fresh] = groups.emplace(std::move(key), std::make_pair(0.0, Mat::Zero(dq, dq)));
      it->second.first += b.prob;
      it->second.second += b.prob * (qkeep.size() == qregs_.size()
                                         ? b.state
                                         : ptrace_positions(qregs_, b.state, qkeep));
    }
    double h = 0;
    for (const auto& [key, acc] : groups) {
      const double q = acc.first;
      if (q <= tol::prob) continue;
      h += -q * std::log2(q);
      h += q * von_neumann_entropy_matrix(acc.second / q);
    }
    return h;
  };

  const double ha = side_entropy(true, false);
  const double hb = side_entropy(false, false);
  const double hab = side_entropy(false, true);
  return ha + hb - hab;
}

double Engine::aux_conditional_entropy(int upto_order) const {
  auto joint_entropy = [&](int max_order) {
    std::map<std::vector<int>, double> dist;
    for (const Branch& b : branches_) {
      std::vector<int> key;
      for (size_t i = 0; i < cinfo_.size(); ++i) {
        if (cinfo_[i].aux_order >= 0 && cinfo_[i].aux_order <= max_order) {
          key.push_back(b.values[i]);
        }
      }
      dist[key] += b.prob;
    }
    double h = 0;
    for (const auto& [key, q] : dist) {
      if (q > tol::prob) h += -q * std::log2(q);
    }
    return h;
  };
  return joint_entropy(upto_order) - joint_entropy(upto_order - 1);
}

int Engine::apply_extractor_povm(const Extractor& ex, Party party, const std::string& tmp_label,
                                 int step) {
  if (!ex.povm) {
    if (!ex.quantum_inputs.empty()) {
      throw std::invalid_argument("extractor lists quantum inputs but no POVM");
    }
    return -1;
  }
  std::vector<size_t> pos;
  Eigen::Index dt = 1;
  for (const auto& label : ex.quantum_inputs) {
    const size_t i = quantum_at(label);
    if (qowner_.at(label) != party) {
      throw std::invalid_argument(
          fmt::format("extractor register '{}' is not held by {}", label, party_name(party)));
    }
    pos.push_back(i);
    dt *= qregs_[i].dim;
  }
  if (dt != ex.povm->dim()) {
    throw std::invalid_argument(fmt::format(
        "extractor POVM dimension {} does not match register dimension {}", ex.povm->dim(), dt));
  }

  std::vector<Branch> next;
  for (const Branch& b : branches_) {
    for (size_t y = 0; y < ex.povm->size(); ++y) {
      Mat block = op_trace(qregs_, b.state, pos, ex.povm->elements()[y]);
      const double py = clipped_renorm(block);
      if (py <= tol::prob) continue;
      Branch nb;
      nb.prob = b.prob * py;
      nb.values = b.values;
      nb.values.push_back(static_cast<int>(y));
      nb.state = std::move(block);
      next.push_back(std::move(nb));
    }
  }
  for (const auto& label : ex.quantum_inputs) qowner_.erase(label);
  qregs_ = erase_positions(qregs_, pos);
  const size_t slot =
      register_classical(tmp_label, static_cast<Eigen::Index>(ex.povm->size()), party, step);
  branches_ = std::move(next);
  return static_cast<int>(slot);
}

Eigen::Index Engine::extract_value(const Extractor& ex, const Branch& b,
                                   std::optional<size_t> povm_slot) const {
  Eigen::Index key = 0;
  Eigen::Index span = 1;
  for (const auto& label : ex.classical_inputs) {
    const size_t ci = classical_at(label);
    key = key * cinfo_[ci].dim + b.values[ci];
    span *= cinfo_[ci].dim;
  }
  if (povm_slot) {
    key = key * cinfo_[*povm_slot].dim + b.values[*povm_slot];
    span *= cinfo_[*povm_slot].dim;
  }
  if (ex.table.empty()) {
    if (span != p_.alphabet_k) {
      throw std::invalid_argument(fmt::format(
          "extractor without table spans {} values, alphabet is {}", span, p_.alphabet_k));
    }
    return key;
  }
  if (static_cast<Eigen::Index>(ex.table.size()) != span) {
    throw std::invalid_argument(fmt::format("extractor table has {} entries, expected {}",
                                            ex.table.size(), span));
  }
  const int out = ex.table[static_cast<size_t>(key)];
  if (out < 0 || out >= p_.alphabet_k) {
    throw std::invalid_argument(
        fmt::format("extractor value {} outside the alphabet [0, {})", out, p_.alphabet_k));
  }
  return out;
}

void Engine::finish_report() {
  for (const auto& label : p_.j_extractor.classical_inputs) {
    if (!cinfo_[classical_at(label)].alice_has) {
      throw std::invalid_argument(
          fmt::format("J extractor reads '{}' which Alice does not hold", label));
    }
  }
  for (const auto& label : p_.k_extractor.classical_inputs) {
    if (!cinfo_[classical_at(label)].bob_has) {
      throw std::invalid_argument(
          fmt::format("K extractor reads '{}' which Bob does not hold", label));
    }
  }

  const int n_steps = static_cast<int>(p_.steps.size());
  const int j_slot = apply_extractor_povm(p_.j_extractor, Party::alice, "__j_povm", n_steps + 1);
  const int k_slot = apply_extractor_povm(p_.k_extractor, Party::bob, "__k_povm", n_steps + 2);

  report_.nj = p_.alphabet_k;
  report_.nk = p_.alphabet_k;
  Eigen::Index nz = 1;
  double log_az = 0;
  double log_af = 0;
  std::vector<size_t> aux_by_order(static_cast<size_t>(aux_count_));
  for (size_t i = 0; i < cinfo_.size(); ++i) {
    if (cinfo_[i].aux_order >= 0) {
      aux_by_order[static_cast<size_t>(cinfo_[i].aux_order)] = i;
      nz *= cinfo_[i].dim;
      log_az += std::log2(static_cast<double>(cinfo_[i].dim));
      if (cinfo_[i].aux_forward) log_af += std::log2(static_cast<double>(cinfo_[i].dim));
    }
  }
  report_.nz = nz;
  report_.log_az = log_az;
  report_.log_af = log_af;

  report_.joint.assign(static_cast<size_t>(report_.nj * report_.nk * report_.nz), 0.0);
  const std::optional<size_t> jp =
      j_slot >= 0 ? std::optional<size_t>(static_cast<size_t>(j_slot)) : std::nullopt;
  const std::optional<size_t> kp =
      k_slot >= 0 ? std::optional<size_t>(static_cast<size_t>(k_slot)) : std::nullopt;
  for (const Branch& b : branches_) {
    const Eigen::Index j = extract_value(p_.j_extractor, b, jp);
    const Eigen::Index k = extract_value(p_.k_extractor, b, kp);
    Eigen::Index z = 0;
    for (size_t ai : aux_by_order) z = z * cinfo_[ai].dim + b.values[ai];
    report_.joint[static_cast<size_t>((j * report_.nk + k) * report_.nz + z)] += b.prob;
  }

  Eigen::VectorXd pj = Eigen::VectorXd::Zero(report_.nj);
  Eigen::VectorXd pk = Eigen::VectorXd::Zero(report_.nk);
  Eigen::VectorXd pjk = Eigen::VectorXd::Zero(report_.nj * report_.nk);
  double pr_err = 0;
  for (Eigen::Index j = 0; j < report_.nj; ++j) {
    for (Eigen::Index k = 0; k < report_.nk; ++k) {
      double q = 0;
      for (Eigen::Index z = 0; z < report_.nz; ++z) q += report_.p(j, k, z);
      pj(j) += q;
      pk(k) += q;
      pjk(j * report_.nk + k) += q;
      if (j != k) pr_err += q;
    }
  }
  report_.pr_err = pr_err;
  report_.h_k = shannon_entropy(pk);
  report_.h_k_given_j = shannon_entropy(pjk) - shannon_entropy(pj);
  const int n = std::max(report_.n_uses, 1);
  report_.net_rate = (report_.h_k - report_.log_az) / n;
  report_.net_rate_fwd_sub = (report_.h_k - report_.log_af) / n;
}

TraceReport Engine::run() {
  p_.validate();
  init();
  merge_branches();
  assert_probability_sum(-1);

  report_.protocol_name = p_.name;
  report_.c = p_.c_value();
  report_.back_steps = p_.back_steps();
  report_.per_step_mi.push_back({-1, "initial", bipartite_mi()});

  for (size_t j = 0; j < p_.steps.size(); ++j) {
    run_step(p_.steps[j], static_cast<int>(j));
    merge_branches();
    assert_probability_sum(static_cast<int>(j));
    const char* kind = std::visit(
        [](const auto& s) -> const char* {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, NoisyUse>) return "noisy_use";
          else if constexpr (std::is_same_v<T, AuxForward>) return "aux_forward";
          else if constexpr (std::is_same_v<T, AuxBack>) return "aux_back";
          else return "local";
        },
        p_.steps[j]);
    report_.per_step_mi.push_back({static_cast<int>(j), kind, bipartite_mi()});
    drop_dead_registers(static_cast<int>(j));
  }
  report_.n_uses = n_done_;
  finish_report();
  return report_;
}

}  // namespace

double TraceReport::mutual_information_jk() const {
  Eigen::VectorXd pj = Eigen::VectorXd::Zero(nj);
  Eigen::VectorXd pk = Eigen::VectorXd::Zero(nk);
  Eigen::VectorXd pjk = Eigen::VectorXd::Zero(nj * nk);
  for (Eigen::Index j = 0; j < nj; ++j) {
    for (Eigen::Index k = 0; k < nk; ++k) {
      double q = 0;
      for (Eigen::Index z = 0; z < nz; ++z) q += p(j, k, z);
      pj(j) += q;
      pk(k) += q;
      pjk(j * nk + k) = q;
    }
  }
  return shannon_entropy(pj) + shannon_entropy(pk) - shannon_entropy(pjk);
}

TraceReport run_exact(const Protocol& p, Eigen::Index max_dim) {
  return Engine(p, max_dim).run();
}

std::vector<AuditRecord> mi_audit(const TraceReport& report,
                                  const std::vector<double>& channel_mi_bits, double slack) {
  std::vector<AuditRecord> records;
  size_t noisy_seen = 0;
  size_t aux_seen = 0;
  for (size_t i = 1; i < report.per_step_mi.size(); ++i) {
    const StepMi& now = report.per_step_mi[i];
    const StepMi& before = report.per_step_mi[i - 1];
    AuditRecord rec;
    rec.step = now.step;
    rec.kind = now.kind;
    rec.mi_before = before.mi_bits;
    rec.mi_after = now.mi_bits;
    if (now.kind == "noisy_use") {
      if (noisy_seen >= channel_mi_bits.size()) {
        throw std::invalid_argument("mi_audit: missing channel mutual-information bound");
      }
      rec.bound = channel_mi_bits[noisy_seen++];
    } else if (now.kind == "aux_forward" || now.kind == "aux_back") {
      rec.bound = report.aux_cond_entropy.at(aux_seen++);
    } else {
      rec.bound = 0;  // local processing cannot create correlation
    }
    rec.margin = rec.bound - (rec.mi_after - rec.mi_before);
    rec.ok = rec.margin >= -slack;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<AuditRecord> mi_audit(const Protocol& p, const std::vector<double>& channel_mi_bits,
                                  double slack) {
  return mi_audit(run_exact(p), channel_mi_bits, slack);
}

ChiConverseRecord chi_converse_check(const TraceReport& report, double chi_n_bits, double slack) {
  if (report.back_steps > 0) {
    throw std::invalid_argument(
        "chi_converse_check applies to forward-assisted protocols only (found back steps)");
  }
  ChiConverseRecord rec;
  rec.i_jk = report.mutual_information_jk();
  rec.chi_n = chi_n_bits;
  rec.log_az = report.log_az;
  rec.margin = chi_n_bits + report.log_az - rec.i_jk;
  rec.ok = rec.margin >= -slack;
  return rec;
}

GoodnessRecord goodness(const TraceReport& report, double c, int n, double slack) {
  GoodnessRecord rec;
  rec.epsilon = report.pr_err;
  rec.fano_bound = rec.epsilon * c * n + 1.0;
  rec.fano_holds = report.h_k_given_j <= rec.fano_bound + slack;
  return rec;
}

GoodnessRecord goodness(const TraceReport& report, double slack) {
  return goodness(report, report.c, report.n_uses, slack);
}

}  // namespace qrand
