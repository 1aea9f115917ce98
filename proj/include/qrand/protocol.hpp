#pragma once

#include "qrand/channels.hpp"
#include "qrand/povm.hpp"
#include "qrand/states.hpp"

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace qrand {

enum class Party { alice, bob };
const char* party_name(Party p);

struct ClassicalSpec {
  std::string label;
  Eigen::Index dim = 2;
};

// One use of the noisy channel. `input` names either a quantum register held
// by Alice or a classical value she holds (prepared as a basis state).
struct NoisyUse {
  Channel channel;
  std::string input;
  std::string output;
};

// Noiseless auxiliary classical communication of an existing classical
// register; the receiver keeps a copy and the sender retains hers.
struct AuxForward {
  std::string reg;
};
struct AuxBack {
  std::string reg;
};

// Kraus sets keyed by classical outcome, selected by control values.
struct KrausCase {
  std::vector<int> when;  // one value per control register; empty if none
  std::vector<std::vector<Mat>> kraus_by_outcome;
};

// Local processing as an instrument: completely positive by construction,
// trace preserving across outcomes (checked), classically controlled.
struct QuantumInstrument {
  std::vector<std::string> controls;
  std::vector<std::string> quantum_in;
  std::vector<Register> quantum_out;
  std::optional<ClassicalSpec> outcome;
  std::vector<KrausCase> cases;
};

// Deterministic classical function of classical values.
struct ClassicalCompute {
  std::vector<std::string> inputs;
  ClassicalSpec output;
  std::vector<int> table;  // mixed-radix over inputs, first input most significant
};

struct LocalOp {
  Party party = Party::alice;
  std::variant<QuantumInstrument, ClassicalCompute> op;
};

using ProtocolStep = std::variant<NoisyUse, AuxForward, AuxBack, LocalOp>;

// Final readout: a deterministic table over classical values, optionally
// preceded by a POVM on remaining quantum registers (its outcome is the last
// table coordinate).
struct Extractor {
  std::vector<std::string> classical_inputs;
  std::vector<std::string> quantum_inputs;
  std::optional<Povm> povm;
  std::vector<int> table;  // empty means identity
};

struct Protocol {
  std::string name;
  DensityOperator initial_alice{};
  DensityOperator initial_bob{};
  std::vector<ProtocolStep> steps;
  Extractor j_extractor;  // Alice's share
  Extractor k_extractor;  // Bob's share
  Eigen::Index alphabet_k = 2;
  std::optional<double> c;  // defaults to ceil(log2 |A_K|) / n

  int noisy_uses() const;
  int back_steps() const;
  double c_value() const;
  // Static structural checks: at least one noisy use, the alphabet bound
  // |A_K| <= 2^(c n), and aux registers sent at most once.
  void validate() const;
};

struct StepMi {
  int step = -1;  // -1 for the initial cut
  std::string kind;
  double mi_bits = 0;
};

struct TraceReport {
  std::string protocol_name;
  int n_uses = 0;
  double c = 0;
  Eigen::Index nj = 0, nk = 0, nz = 0;
  std::vector<double> joint;  // P(j, k, z), z fastest

  double pr_err = 0;
  double h_k = 0;
  double h_k_given_j = 0;
  double log_az = 0;           // all auxiliary communication
  double log_af = 0;           // forward auxiliary communication only
  double net_rate = 0;         // (h_k - log_az) / n: randomness-distribution accounting
  double net_rate_fwd_sub = 0; // (h_k - log_af) / n: forward-only subtraction
  int back_steps = 0;

  std::vector<StepMi> per_step_mi;         // initial cut first, then one per step
  std::vector<double> aux_cond_entropy;    // H(Z_k | Z^(k-1)) per aux step, in order

  double p(Eigen::Index j, Eigen::Index k, Eigen::Index z) const {
    return joint[static_cast<size_t>((j * nk + k) * nz + z)];
  }
  double mutual_information_jk() const;
};

Eigen::Index default_max_dim(Eigen::Index fallback);  // honors QRAND_MAX_DIM

// Exact execution: classical values are enumerated branch by branch, quantum
// registers evolve as conditional density operators.
TraceReport run_exact(const Protocol& p, Eigen::Index max_dim = default_max_dim(4096));

struct AuditRecord {
  int step = 0;
  std::string kind;
  double mi_before = 0;
  double mi_after = 0;
  double bound = 0;   // allowed increase for this step
  double margin = 0;  // bound - (mi_after - mi_before)
  bool ok = true;
};

// Per-step information-flow audit: auxiliary steps may raise I(A:B) by at
// most H(Z_k | Z^(k-1)), noisy uses by at most the channel mutual information
// (supplied per noisy step, in order), local steps not at all.
std::vector<AuditRecord> mi_audit(const TraceReport& report,
                                  const std::vector<double>& channel_mi_bits,
                                  double slack = tol::mi);
std::vector<AuditRecord> mi_audit(const Protocol& p, const std::vector<double>& channel_mi_bits,
                                  double slack = tol::mi);

struct ChiConverseRecord {
  double i_jk = 0;
  double chi_n = 0;
  double log_az = 0;
  double margin = 0;
  bool ok = true;
};

// For forward-assisted protocols: I(J:K) <= chi(E tensor n) + log |A_Z|.
ChiConverseRecord chi_converse_check(const TraceReport& report, double chi_n_bits,
                                     double slack = tol::mi);

struct GoodnessRecord {
  double epsilon = 0;
  double fano_bound = 0;  // epsilon * c * n + 1
  bool fano_holds = true;
};

GoodnessRecord goodness(const TraceReport& report, double c, int n, double slack = tol::mi);
GoodnessRecord goodness(const TraceReport& report, double slack = tol::mi);

}  // namespace qrand
