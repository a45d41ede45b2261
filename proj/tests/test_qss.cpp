#include "peal/qss.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace peal;

namespace {

Eigen::VectorXd staggered(int L, double amp) {
  Eigen::VectorXd Q(L);
  for (int i = 0; i < L; ++i) Q(i) = (i % 2 == 0) ? amp : -amp;
  return Q;
}

// Two-band solution for a staggered potential -Delta (-1)^i at half filling:
// n_even - 1/2 = (1/L) sum over the reduced zone of Delta / sqrt(Delta^2 + 4 cos^2 k).
double band_density_even(int L, double delta) {
  double s = 0;
  for (int j = 0; j < L / 2; ++j) {
    const double c = std::cos(2 * std::numbers::pi * j / L);
    s += delta / std::sqrt(delta * delta + 4 * c * c);
  }
  return 0.5 + s / L;
}

}  // namespace

TEST_CASE("uniform chain spectrum") {
  const auto H = build_hamiltonian(Eigen::VectorXd::Zero(6), 1.4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.matrix);
  Eigen::VectorXd want(6);
  want << -2, -1, -1, 1, 1, 2;
  CHECK((es.eigenvalues() - want).cwiseAbs().maxCoeff() < 1e-12);

  const auto gs = ground_state(H, 3);
  CHECK(gs.band_energy() == doctest::Approx(-4).epsilon(1e-12));
  CHECK(gs.gap == doctest::Approx(2).epsilon(1e-12));
  CHECK_FALSE(gs.degenerate_fermi);
  const Eigen::VectorXd n = density(gs);
  CHECK((n.array() - 0.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("hamiltonian construction") {
  Eigen::VectorXd Q = Eigen::VectorXd::Zero(4);
  Q(0) = 1;
  const auto H = build_hamiltonian(Q, 2.0);
  Eigen::MatrixXd want(4, 4);
  want << -2, -1, 0, -1,
          -1, 0, -1, 0,
          0, -1, 0, -1,
          -1, 0, -1, 0;
  CHECK(H.matrix == want);

  const Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(6, -0.3, 0.4);
  CHECK(build_hamiltonian(q, 1.4).matrix.isApprox(build_hamiltonian(Eigen::VectorXd(2.0 * q), 0.7).matrix, 1e-15));
}

TEST_CASE("complete filling and charge conservation") {
  const Eigen::VectorXd Q = Eigen::VectorXd::LinSpaced(10, -0.5, 0.7);
  CHECK((density(ground_state(build_hamiltonian(Q, 1.3), 10)).array() - 1).abs().maxCoeff() < 1e-12);
  for (int f : {1, 3, 5, 9}) CHECK(std::abs(density(ground_state(build_hamiltonian(Q, 1.3), f)).sum() - f) < 1e-10);
  CHECK_THROWS_AS(ground_state(build_hamiltonian(Q, 1.3), 0), ParameterError);
  CHECK_THROWS_AS(ground_state(build_hamiltonian(Q, 1.3), 11), ParameterError);
}

TEST_CASE("staggered densities follow the two-band formula") {
  for (double gq : {0.5, 1.0, 2.0}) {
    const Eigen::VectorXd n = solve_density(staggered(50, gq), 1.0, 25);
    const double ne = band_density_even(50, gq);
    for (int i = 0; i < 50; ++i) CHECK(std::abs(n(i) - (i % 2 == 0 ? ne : 1 - ne)) < 1e-10);
  }
}

TEST_CASE("degenerate Fermi shell is filled uniformly") {
  // L = 4: levels -2, 0, 0, 2, so half filling puts one electron in a two-fold shell.
  const auto gs = ground_state(build_hamiltonian(Eigen::VectorXd::Zero(4), 1.0), 2);
  CHECK(gs.degenerate_fermi);
  CHECK(gs.occupations.sum() == doctest::Approx(2));
  CHECK((density(gs).array() - 0.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("correlations") {
  const auto gs = ground_state(build_hamiltonian(Eigen::VectorXd::Zero(6), 1.0), 3);
  const Eigen::VectorXd n = density(gs);
  for (int i = 0; i < 6; ++i) CHECK(correlation(gs, i, i) == doctest::Approx(n(i)).epsilon(1e-14));
  // (1/L) sum over filled k in {0, +-pi/3} of cos(k) = (1 + 2 cos(pi/3)) / 6.
  CHECK(correlation(gs, 0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // |i - j| = 2: (1 + 2 cos(2 pi/3)) / 6 = 0.
  CHECK(std::abs(correlation(gs, 0, 2)) < 1e-12);

  const Eigen::VectorXd Q = Eigen::VectorXd::LinSpaced(8, -0.4, 0.3);
  const auto g2 = ground_state(build_hamiltonian(Q, 1.4), 4);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) CHECK(correlation(g2, i, j) == correlation(g2, j, i));
}

TEST_CASE("cdw order parameter") {
  CHECK(cdw_of(Eigen::VectorXd::Constant(50, 0.5)) == 0);
  Eigen::VectorXd n(50);
  for (int i = 0; i < 50; ++i) n(i) = 0.5 + (i % 2 == 0 ? 0.1 : -0.1);
  CHECK(cdw_of(n) == doctest::Approx(5.0));
  for (int i = 0; i < 50; ++i) n(i) = i % 2 == 0 ? 1 : 0;
  CHECK(cdw_of(n) == 25);
  CHECK(cdw_of(Eigen::VectorXd(Eigen::VectorXd::Ones(50) - n)) == -25);
}

TEST_CASE("density response") {
  const Eigen::VectorXd Q = Eigen::VectorXd::LinSpaced(10, -0.3, 0.2);
  CHECK(std::abs(response(Q, 0.0, 3, 5).value) < 1e-12);

  // Richardson check: successive halvings shrink the difference by ~4.
  const Eigen::VectorXd S = staggered(10, 0.3) + 0.05 * Q;
  const double r1 = response(S, 1.4, 2, 5, 1e-2).value;
  const double r2 = response(S, 1.4, 2, 5, 5e-3).value;
  const double r3 = response(S, 1.4, 2, 5, 2.5e-3).value;
  const double ratio = (r1 - r2) / (r2 - r3);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("exact observables") {
  const Eigen::VectorXd Q = staggered(10, 0.4);
  const ObservableRecord r = exact_observables(Q, 1.4, 5);
  const auto gs = ground_state(build_hamiltonian(Q, 1.4), 5);
  CHECK(r.n == density(gs));
  CHECK(r.cdw == doctest::Approx(cdw_of(r.n)));
  CHECK(r.hop == correlation(gs, 0, 1));
  CHECK(r.nnn == correlation(gs, 0, 2));
  CHECK(r.gs_energy == doctest::Approx(gs.band_energy() + 0.7 * Q.sum()));
}
