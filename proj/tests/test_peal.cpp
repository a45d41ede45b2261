#include "peal/peal.hpp"
#include "peal/qss.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace peal;

namespace {

SurrogateModel random_model(int L, std::uint64_t seed) {
  const FeatureMap map = make_feature_map(L, 1, 6, 2.0, GMode::Scaled, seed);
  LassoFit fit;
  fit.weights = Eigen::VectorXd::Zero(map.feature_count());
  Rng rng = make_stream(seed, "test-weights");
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (Eigen::Index j = 0; j < fit.weights.size(); j += 3) fit.weights(j) = u(rng);
  fit.intercept = 0.5;
  return make_model(map, fit, ObservableKind::Density, "test");
}

}  // namespace

TEST_CASE("u1 correction") {
  Eigen::VectorXd a(4);
  a << 0.6, 0.6, 0.4, 0.4;
  CHECK(u1_correct(a, 2) == a);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(4, 0.7);
  CHECK((u1_correct(b, 2).array() - 0.5).abs().maxCoeff() < 1e-15);

  Rng rng = make_stream(1, "u1");
  std::uniform_real_distribution<double> u(-1, 2);
  std::uniform_real_distribution<double> e(-0.1, 0.1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int L = 4 + 2 * (trial % 20);
    Eigen::VectorXd n(L);
    for (int i = 0; i < L; ++i) n(i) = u(rng);
    const Eigen::VectorXd c = u1_correct(n, L / 2);
    CHECK(std::abs(c.sum() - L / 2) < 1e-12);

    // Reference summing to the filling, and a perturbed prediction of it.
    Eigen::VectorXd ref(L);
    for (int i = 0; i < L; ++i) ref(i) = u(rng);
    ref = u1_correct(ref, L / 2);
    Eigen::VectorXd pred(L);
    for (int i = 0; i < L; ++i) pred(i) = ref(i) + e(rng);
    const double before = (pred - ref).cwiseAbs().maxCoeff();
    const double after = (u1_correct(pred, L / 2) - ref).cwiseAbs().maxCoeff();
    CHECK(after <= 2 * before + 1e-15);
  }
}

TEST_CASE("density field equivariance") {
  const SurrogateModel m = random_model(12, 3);
  const Eigen::VectorXd Q = Eigen::VectorXd::LinSpaced(12, -0.4, 0.35).array().sin();
  const Eigen::VectorXd n = predict_density_field(m, 1.4, Q);
  for (int s = 0; s < 12; ++s) CHECK(predict_density_field(m, 1.4, roll(Q, s)) == roll(n, s));
  for (int i = 0; i < 12; ++i) CHECK(n(i) == doctest::Approx(predict_site(m, 1.4, roll(Q, i))).epsilon(1e-13));

  LassoFit zero;
  zero.weights = Eigen::VectorXd::Zero(m.map.feature_count());
  zero.intercept = 0.3;
  const SurrogateModel flat = make_model(m.map, zero, ObservableKind::Density, "flat");
  CHECK(predict_density_field(flat, 1.4, Q) == Eigen::VectorXd::Constant(12, 0.3));
}

TEST_CASE("peal field") {
  PealConfig pc;
  pc.density = random_model(10, 2);
  const PealField f(pc, 10);
  CHECK(f.kind() == ForceKind::Surrogate);
  const Eigen::VectorXd Q = Eigen::VectorXd::LinSpaced(10, -0.2, 0.3);
  const ObservableRecord r = f.evaluate(1.4, Q);
  CHECK(std::abs(r.n.sum() - 5) < 1e-12);
  CHECK(r.cdw == doctest::Approx(cdw_of(r.n)));
  CHECK(std::isnan(r.hop));
  CHECK(std::isnan(r.gs_energy));

  PealConfig clamp = pc;
  clamp.u1_correction = false;
  clamp.clamp = true;
  clamp.density->intercept = 1.5;
  const ObservableRecord c = PealField(clamp, 10).evaluate(1.4, Q);
  CHECK(c.n.maxCoeff() <= 1);

  CHECK_THROWS_AS(PealField(pc, 12), ParameterError);
  PealConfig wrong = pc;
  wrong.density->kind = ObservableKind::Hop;
  CHECK_THROWS_AS(PealField(wrong, 10), ParameterError);
}

TEST_CASE("oracle PEAL reproduces exact evolution bitwise") {
  HolsteinParams p;
  p.L = 10;
  p.g = 1.4;
  const State init = sample_initial_state(p, 0.2, 6);
  PealConfig oracle;
  oracle.u1_correction = false;
  const Trajectory a = peal_evolve(init, p, 400, oracle);
  const Trajectory b = evolve(init, p, 400, ExactField(0));
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].state.Q == b.samples[i].state.Q);
    CHECK(a.samples[i].state.P == b.samples[i].state.P);
    CHECK(a.samples[i].obs.n == b.samples[i].obs.n);
  }
  const ComparisonReport r = compare(b, a);
  CHECK(r.density_rmse == 0);
  CHECK(r.max_cdw_dev == 0);
  CHECK(r.max_q_dev == 0);
  CHECK(r.max_p_dev == 0);
  CHECK(r.max_hop_dev == 0);
  CHECK(r.max_nnn_dev == 0);
  CHECK(r.times.size() == a.samples.size());

  std::ostringstream os;
  write_comparison_csv(os, r);
  CHECK(os.str().find("cdw_exact") != std::string::npos);
  CHECK(comparison_json(r).find("density_rmse") != std::string::npos);
}

TEST_CASE("comparison alignment") {
  HolsteinParams p;
  p.L = 6;
  const State init = sample_initial_state(p, 0.2, 1);
  const Trajectory a = evolve(init, p, 100, ExactField(0));
  const Trajectory shorter = evolve(init, p, 50, ExactField(0));
  CHECK_THROWS_AS(compare(a, shorter), AlignmentError);
  HolsteinParams q = p;
  q.L = 8;
  const Trajectory other = evolve(sample_initial_state(q, 0.2, 1), q, 100, ExactField(0));
  CHECK_THROWS_AS(compare(a, other), AlignmentError);

  PealConfig surrogate;
  surrogate.density = random_model(6, 1);
  const ComparisonReport r = compare(a, peal_evolve(init, p, 100, surrogate));
  CHECK(std::isnan(r.max_hop_dev));
  CHECK(r.density_rmse > 0);
}
