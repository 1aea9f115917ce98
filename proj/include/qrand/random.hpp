#pragma once

#include "qrand/states.hpp"

#include <cstdint>
#include <string>

namespace qrand {

// splitmix64 step; also used as the keyed binning hash.
uint64_t splitmix64(uint64_t& state);
uint64_t keyed_hash(uint64_t seed, uint64_t x);

// Small deterministic generator. Built directly on splitmix64 so identical
// seeds give bit-identical streams on any platform, which the reproducibility
// contracts rely on.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t bits() { return splitmix64(state_); }
  // Uniform in [0, 1).
  double uniform();
  // Standard normal via Box-Muller.
  double normal();
  cplx complex_normal();
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);

 private:
  uint64_t state_;
  double spare_ = 0;
  bool has_spare_ = false;
};

// Haar-distributed unitary, deterministic per seed (Ginibre + QR with the
// R-diagonal phase fix).
Mat haar_random_unitary(Eigen::Index d, uint64_t seed);

PureState random_pure_state(Eigen::Index d, uint64_t seed, std::string label = "X");

}  // namespace qrand
