#include "qrand/random.hpp"

#include <Eigen/QR>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qrand {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t keyed_hash(uint64_t seed, uint64_t x) {
  uint64_t s = seed ^ (x * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  return splitmix64(s);
}

double Rng::uniform() {
  return static_cast<double>(bits() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

cplx Rng::complex_normal() {
  const double re = normal();
  const double im = normal();
  return {re, im};
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("below(0)");
  // Rejection sampling keeps the draw unbiased.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = bits();
  while (x >= limit) x = bits();
  return x % n;
}

Mat haar_random_unitary(Eigen::Index d, uint64_t seed) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  Rng rng(seed);
  Mat g(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      g(i, j) = rng.complex_normal();
    }
  }
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < d; ++i) {
    cplx rii = r(i, i);
    const double mag = std::abs(rii);
    q.col(i) *= (mag > 0) ? rii / mag : cplx(1.0);
  }
  return q;
}

PureState random_pure_state(Eigen::Index d, uint64_t seed, std::string label) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
  Rng rng(seed);
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.complex_normal();
  v /= v.norm();
  return PureState({{std::move(label), d, false}}, std::move(v));
}

}  // namespace qrand
