#include "doctest.h"

#include "qrand/channels.hpp"
#include "qrand/entropy.hpp"
#include "qrand/random.hpp"

#include <cmath>

using namespace qrand;

namespace {

DensityOperator random_state(Eigen::Index d, uint64_t seed, const std::string& label) {
  Rng rng(seed);
  Mat a(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rng.complex_normal();
  }
  Mat m = a * a.adjoint();
  m /= m.trace().real();
  return DensityOperator({{label, d, false}}, std::move(m));
}

// Classical joint over two labeled registers from a probability table.
DensityOperator classical_joint(const Eigen::MatrixXd& p, const std::string& a,
                                const std::string& b) {
  const Eigen::Index da = p.rows(), db = p.cols();
  Mat m = Mat::Zero(da * db, da * db);
  for (Eigen::Index i = 0; i < da; ++i) {
    for (Eigen::Index j = 0; j < db; ++j) m(i * db + j, i * db + j) = p(i, j);
  }
  return DensityOperator({{a, da, true}, {b, db, true}}, std::move(m));
}

}  // namespace

TEST_SUITE_BEGIN("entropy");

TEST_CASE("von Neumann entropy: pure states give 0, I/d gives log2 d") {
  for (Eigen::Index d : {2, 3, 4}) {
    const auto psi = random_pure_state(d, 40 + static_cast<uint64_t>(d));
    CHECK(von_neumann_entropy(psi.to_density()) == doctest::Approx(0).epsilon(1e-12));
    const DensityOperator mixed({{"X", d, false}}, Mat::Identity(d, d) / static_cast<double>(d));
    CHECK(von_neumann_entropy(mixed) == doctest::Approx(std::log2(d)).epsilon(1e-12));
  }
}

TEST_CASE("von Neumann entropy: invariant under unitary conjugation") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto rho = random_state(3, 900 + seed, "X");
    const Mat u = haar_random_unitary(3, 950 + seed);
    const DensityOperator rotated({{"X", 3, false}}, u * rho.matrix() * u.adjoint());
    CHECK(std::abs(von_neumann_entropy(rho) - von_neumann_entropy(rotated)) <= 1e-9);
    CHECK(von_neumann_entropy(rho) >= 0);
    CHECK(von_neumann_entropy(rho) <= std::log2(3.0) + 1e-12);
  }
}

TEST_CASE("shannon_entropy: uniform pair gives one bit") {
  CHECK(shannon_entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0));
  CHECK(shannon_entropy(std::vector<double>{1.0, 0.0}) == doctest::Approx(0.0));
  CHECK(binary_entropy(0.11) == doctest::Approx(0.499915958164528).epsilon(1e-12));
}

TEST_CASE("conditional entropy: zero for perfectly correlated classical joints") {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 0) = p(1, 1) = p(2, 2) = 1.0 / 3;
  const auto joint = classical_joint(p, "A", "B");
  CHECK(conditional_entropy(joint, {"B"}) == doctest::Approx(0).epsilon(1e-12));
  CHECK(conditional_entropy(joint, {"A"}) == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("conditional entropy: chain rule on random classical joints") {
  // H(Z1) + H(Z2|Z1) + H(Z3|Z1 Z2) = H(Z1 Z2 Z3) for random diagonal joints.
  Rng rng(4242);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index d1 = 2, d2 = 3, d3 = 2;
    Eigen::VectorXd p(d1 * d2 * d3);
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rng.uniform() + 1e-4;
    p /= p.sum();
    Mat m = Mat::Zero(p.size(), p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) m(i, i) = p(i);
    const DensityOperator joint({{"Z1", d1, true}, {"Z2", d2, true}, {"Z3", d3, true}},
                                std::move(m));
    const double h1 = von_neumann_entropy(partial_trace(joint, {"Z1"}));
    const double h2g1 = von_neumann_entropy(partial_trace(joint, {"Z1", "Z2"})) - h1;
    const double h3g12 = conditional_entropy(joint, {"Z1", "Z2"});
    const double total = von_neumann_entropy(joint);
    CHECK(std::abs(h1 + h2g1 + h3g12 - total) <= 1e-9);
  }
}

TEST_CASE("conditional entropy: negative on entangled joints") {
  const auto phi = maximally_entangled_state(2).to_density();
  CHECK(conditional_entropy(phi, {"X"}) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("mutual information: product states carry none") {
  const auto a = random_state(2, 61, "A");
  const auto b = random_state(3, 62, "B");
  CHECK(mutual_information(tensor(a, b), {"A"}, {"B"}) == doctest::Approx(0).epsilon(1e-10));
}

TEST_CASE("mutual information: maximally entangled qubits carry two bits") {
  const auto phi = maximally_entangled_state(2).to_density();
  CHECK(mutual_information(phi, {"R"}, {"X"}) == doctest::Approx(2.0).epsilon(1e-12));
  // Symmetry in the two parts.
  CHECK(mutual_information(phi, {"X"}, {"R"}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("mutual information: dimension bound on random joint states") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(7100 + seed);
    Mat a(6, 6);
    for (Eigen::Index i = 0; i < 6; ++i) {
      for (Eigen::Index j = 0; j < 6; ++j) a(i, j) = rng.complex_normal();
    }
    Mat m = a * a.adjoint();
    m /= m.trace().real();
    const DensityOperator joint({{"A", 2, false}, {"B", 3, false}}, std::move(m));
    const double mi = mutual_information(joint, {"A"}, {"B"});
    CHECK(mi >= 0);
    CHECK(mi <= 2 * std::min(std::log2(2.0), std::log2(3.0)) + 1e-9);
  }
  const auto phi = maximally_entangled_state(2).to_density();
  CHECK_THROWS_AS(mutual_information(phi, {"R"}, {"R"}), std::invalid_argument);
  CHECK_THROWS_AS(mutual_information(phi, {"R"}, {}), std::invalid_argument);
}

TEST_CASE("holevo_quantity: single-element ensembles carry nothing") {
  const Ensemble ens({{1.0, random_state(2, 70, "X")}});
  CHECK(holevo_quantity(ens, example_channel_F(2)) == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("holevo_quantity: uniform basis ensemble through F_d gives half log d") {
  for (Eigen::Index d : {2, 3, 4}) {
    std::vector<std::pair<double, DensityOperator>> entries;
    for (Eigen::Index w = 0; w < d; ++w) {
      Mat m = Mat::Zero(d, d);
      m(w, w) = 1;
      entries.emplace_back(1.0 / d, DensityOperator({{"X", d, false}}, std::move(m)));
    }
    const double chi = holevo_quantity(Ensemble(std::move(entries)), example_channel_F(d));
    CHECK(std::abs(chi - 0.5 * std::log2(static_cast<double>(d))) <= 1e-9);
  }
}

TEST_CASE("holevo_quantity: equals mutual information of the induced cq joint") {
  // Oracle: build the classical-quantum joint sum_w p_w |w><w| (x) ch(rho_w)
  // explicitly and compare I(W:Y).
  Rng rng(808);
  const Channel ch = example_channel_F(2);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::pair<double, DensityOperator>> entries;
    Eigen::VectorXd p(3);
    for (int w = 0; w < 3; ++w) p(w) = rng.uniform() + 0.05;
    p /= p.sum();
    for (int w = 0; w < 3; ++w) {
      entries.emplace_back(p(w), random_state(2, 5000 + 10 * rep + w, "X"));
    }
    const Ensemble ens(std::move(entries));

    const Eigen::Index dy = ch.dim_out();
    Mat joint = Mat::Zero(3 * dy, 3 * dy);
    for (int w = 0; w < 3; ++w) {
      joint.block(w * dy, w * dy, dy, dy) =
          ens.entries()[w].first * ch.apply_matrix(ens.entries()[w].second.matrix());
    }
    const DensityOperator cq({{"W", 3, true}, {"Y", dy, true}}, std::move(joint));
    const double mi = mutual_information(cq, {"W"}, {"Y"});
    CHECK(std::abs(holevo_quantity(ens, ch) - mi) <= 1e-9);
  }
}

TEST_CASE("holevo_quantity: never exceeds the average-output entropy") {
  Rng rng(909);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<std::pair<double, DensityOperator>> entries;
    Eigen::VectorXd p(4);
    for (int w = 0; w < 4; ++w) p(w) = rng.uniform() + 0.05;
    p /= p.sum();
    for (int w = 0; w < 4; ++w) {
      entries.emplace_back(p(w), random_state(2, 6000 + 10 * rep + w, "X"));
    }
    const Ensemble ens(std::move(entries));
    const Channel ch = example_channel_F(2);
    const double chi = holevo_quantity(ens, ch);
    Mat avg = Mat::Zero(4, 4);
    for (const auto& [pw, st] : ens.entries()) avg += pw * ch.apply_matrix(st.matrix());
    CHECK(chi <= von_neumann_entropy_matrix(avg) + 1e-12);
  }
}

TEST_CASE("uncertainty_average: qubit equality cases") {
  const Povm comp = computational_basis(2);
  const Povm four = fourier_basis(2);
  Vec v0(2);
  v0 << 1, 0;
  const PureState ket0({{"X", 2, false}}, v0);
  // H(M|G=0) = 0, H(M|G=1) = 1.
  CHECK(uncertainty_average(ket0, comp, four) == doctest::Approx(0.5).epsilon(1e-12));

  Vec vp(2);
  vp << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  const PureState plus({{"X", 2, false}}, vp);
  CHECK(uncertainty_average(plus, comp, four) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("uncertainty_average: MUB lower bound over random pure states") {
  for (Eigen::Index d : {2, 3, 4}) {
    const Povm comp = computational_basis(d);
    const Povm four = fourier_basis(d);
    double min_avg = 1e300;
    for (uint64_t seed = 0; seed < 10000; ++seed) {
      const auto psi = random_pure_state(d, 31000 + 100000 * static_cast<uint64_t>(d) + seed);
      min_avg = std::min(min_avg, uncertainty_average(psi, comp, four));
    }
    CHECK(min_avg >= 0.5 * std::log2(static_cast<double>(d)) - 1e-9);
  }
}

TEST_CASE("output entropy of F_d decomposes through the measured-basis bit") {
  // H(Y) = 1 + (1/2)[H(M|G=0) + H(M|G=1)] for every pure input.
  for (Eigen::Index d : {2, 3}) {
    const Channel f = example_channel_F(d);
    const Povm comp = computational_basis(d);
    const Povm four = fourier_basis(d);
    for (uint64_t seed = 0; seed < 50; ++seed) {
      const auto psi = random_pure_state(d, 77000 + 1000 * static_cast<uint64_t>(d) + seed);
      const double h_out = von_neumann_entropy_matrix(f.apply_matrix(psi.to_density().matrix()));
      const double avg = uncertainty_average(psi, comp, four);
      CHECK(std::abs(h_out - 1.0 - avg) <= 1e-9);
    }
  }
}

TEST_CASE("ensemble validation") {
  CHECK_THROWS_AS(Ensemble({}), std::invalid_argument);
  CHECK_THROWS_AS(Ensemble({{0.5, random_state(2, 1, "X")}}), std::invalid_argument);
  CHECK_THROWS_AS(holevo_quantity(Ensemble({{1.0, random_state(3, 2, "X")}}),
                                  example_channel_F(2)),
                  std::invalid_argument);
}

TEST_SUITE_END();
