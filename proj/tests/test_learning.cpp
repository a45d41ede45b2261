#include "peal/dynamics.hpp"
#include "peal/learning.hpp"
#include "peal/qss.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace peal;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng = make_stream(seed, "test-matrix");
  std::normal_distribution<double> d;
  Eigen::MatrixXd X(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) X(i, j) = d(rng);
  return X;
}

std::vector<Trajectory> small_paths(int count, double g) {
  HolsteinParams p;
  p.L = 10;
  p.g = g;
  std::vector<Trajectory> out;
  for (int i = 0; i < count; ++i) out.push_back(evolve(sample_initial_state(p, 0.2, 100 + i), p, 300, ExactField(0)));
  return out;
}

}  // namespace

TEST_CASE("local regions") {
  Eigen::VectorXd Q(4);
  Q << 1, 2, 3, 4;
  Eigen::MatrixXd want(4, 3);
  want << 4, 1, 2,
          1, 2, 3,
          2, 3, 4,
          3, 4, 1;
  CHECK(extract_regions(Q, 1) == want);
  CHECK(extract_regions(Q, 0) == Eigen::MatrixXd(Q));
  const Eigen::MatrixXd rolled = extract_regions(roll(Q, 1), 1);
  for (int c = 0; c < 4; ++c) CHECK(rolled.row(c) == want.row((c + 1) % 4));
}

TEST_CASE("random Fourier features") {
  const FeatureMap map = make_feature_map(50, 1, 20, 6.0, GMode::Scaled, 7);
  CHECK(map.feature_count() == 2000);
  CHECK(map.frequencies.rows() == 20);
  CHECK(map.frequencies.cols() == 3);

  const Eigen::VectorXd f0 = featurize(1.4, Eigen::VectorXd::Zero(50), map);
  for (int c = 0; c < 50; ++c) {
    CHECK(f0.segment(c * 40, 20).isOnes(0));
    CHECK(f0.segment(c * 40 + 20, 20).isZero(0));
  }

  const Eigen::VectorXd Q = Eigen::VectorXd::LinSpaced(50, -0.4, 0.5);
  const Eigen::VectorXd a = featurize(1.4, Q, map);
  const Eigen::VectorXd b = featurize(0.7, Eigen::VectorXd(2.0 * Q), map);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);

  // Prefix nesting: the first R rows of a larger map are the smaller map.
  const FeatureMap big = make_feature_map(50, 1, 40, 6.0, GMode::Scaled, 7);
  CHECK(big.frequencies.topRows(20) == map.frequencies);

  const FeatureMap app = make_feature_map(50, 1, 5, 1.0, GMode::Appended, 7);
  CHECK(app.feature_count() == 501);
  CHECK(featurize(1.3, Q, app)(500) == 1.3);
}

TEST_CASE("datasets") {
  const auto paths = small_paths(3, 1.4);
  const TrainingSet set = build_dataset(paths, 20, 5);
  CHECK(set.size() == 60);
  CHECK(set.L == 10);
  for (const auto& r : set.records) {
    CHECK(r.target >= 0);
    CHECK(r.target <= 1);
  }
  CHECK(fingerprint(set) == fingerprint(build_dataset(paths, 20, 5)));
  CHECK(fingerprint(set) != fingerprint(build_dataset(paths, 20, 6)));
  CHECK(fingerprint(set).size() == 16);

  const TrainingSet one = build_dataset({paths.front()}, 1, 9);
  CHECK(one.size() == 1);
  CHECK(one.records[0].Q == build_dataset({paths.front()}, 1, 9).records[0].Q);

  // Density targets are the density at the site rolled to index 0.
  const ObservableRecord exact = exact_observables(set.records[3].Q, 1.4, 5);
  CHECK(set.records[3].target == doctest::Approx(exact.n(0)).epsilon(1e-9));

  const TrainingSet hop = build_dataset(paths, 5, 5, ObservableKind::Hop);
  CHECK(hop.records[2].target == doctest::Approx(exact_observables(hop.records[2].Q, 1.4, 5).hop));

  std::stringstream ss;
  write_dataset_csv(ss, set);
  const TrainingSet back = read_dataset_csv(ss);
  CHECK(fingerprint(back) == fingerprint(set));

  CHECK_THROWS_AS(build_dataset({}, 5, 1), DataError);
}

TEST_CASE("subsamples are nested") {
  const TrainingSet set = build_dataset(small_paths(2, 1.3), 50, 1);
  const TrainingSet a = subsample(set, 10, 3);
  const TrainingSet b = subsample(set, 40, 3);
  CHECK(a.size() == 10);
  for (const auto& r : a.records) {
    bool found = false;
    for (const auto& s : b.records) found = found || (s.Q == r.Q && s.target == r.target);
    CHECK(found);
  }
  CHECK(subsample(set, 1000, 3).size() == set.size());
}

TEST_CASE("lasso kill condition and least squares limit") {
  const Eigen::MatrixXd X = random_matrix(10, 3, 1);
  Eigen::VectorXd y = X * Eigen::Vector3d(1.5, -2, 0.25);
  y.array() += 0.3;
  y += 0.05 * random_matrix(10, 1, 2);

  const double amax = lasso_alpha_max(X, y);
  const LassoFit zero = lasso_fit(X, y, amax);
  CHECK(zero.weights.isZero(0));
  CHECK(zero.intercept == doctest::Approx(y.mean()));

  LassoOptions tight;
  tight.tol = 1e-14;
  const LassoFit ols = lasso_fit(X, y, 0.0, tight);
  Eigen::MatrixXd A(10, 4);
  A << X, Eigen::VectorXd::Ones(10);
  const Eigen::VectorXd beta = (A.transpose() * A).ldlt().solve(A.transpose() * y);
  CHECK((ols.weights - beta.head(3)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(ols.intercept - beta(3)) < 1e-8);
  CHECK(ols.converged);
}

TEST_CASE("lasso objective decreases monotonically") {
  const Eigen::MatrixXd X = random_matrix(60, 30, 3);
  const Eigen::VectorXd y = X.col(2) - 0.5 * X.col(7) + 0.1 * random_matrix(60, 1, 4);
  LassoOptions o;
  o.record_objective = true;
  const LassoFit f = lasso_fit(X, y, 0.01, o);
  REQUIRE(f.objective.size() >= 2);
  for (std::size_t i = 1; i < f.objective.size(); ++i) CHECK(f.objective[i] <= f.objective[i - 1] + 1e-15);
}

TEST_CASE("gram and design backends agree") {
  const Eigen::MatrixXd X = random_matrix(80, 12, 5);
  const Eigen::VectorXd y = X.col(0) + 0.2 * random_matrix(80, 1, 6);
  auto g = LassoProblem::from_gram(GramStats::from(X, y));
  auto d = LassoProblem::from_design(X, y);
  CHECK(g.alpha_max() == doctest::Approx(d.alpha_max()).epsilon(1e-12));
  LassoOptions o;
  o.tol = 1e-12;
  const LassoFit fg = g.solve(0.02, o);
  const LassoFit fd = d.solve(0.02, o);
  CHECK((fg.weights - fd.weights).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(fg.intercept == doctest::Approx(fd.intercept).epsilon(1e-9));

  GramStats a = GramStats::from(X.topRows(30), y.head(30));
  const GramStats b = GramStats::from(X.bottomRows(50), y.tail(50));
  a += b;
  const GramStats all = GramStats::from(X, y);
  CHECK((a.xtx - all.xtx).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(12, -1, 1);
  CHECK(all.sse(w, 0.3) == doctest::Approx(((y - X * w).array() - 0.3).matrix().squaredNorm()).epsilon(1e-10));
}

TEST_CASE("planted feature is recovered") {
  const FeatureMap map = make_feature_map(6, 1, 4, 1.0, GMode::Scaled, 11);
  TrainingSet set;
  set.L = 6;
  Rng rng = make_stream(2, "planted");
  std::normal_distribution<double> d(0, 0.3);
  for (int i = 0; i < 300; ++i) {
    TrainingRecord r{1.4, Eigen::VectorXd(6), 0};
    for (int j = 0; j < 6; ++j) r.Q(j) = d(rng);
    set.records.push_back(r);
  }
  const Eigen::MatrixXd X = feature_matrix(set, map);
  const Eigen::VectorXd y = 3.0 * X.col(0);
  const LassoFit f = lasso_fit(X, y, 1e-7);
  CHECK(f.weights(0) == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(std::sqrt((X * f.weights + Eigen::VectorXd::Constant(300, f.intercept) - y).squaredNorm() / 300) < 1e-3);

  const CVReport cv = lasso_cv(X, y, {}, 4);
  CHECK(cv.chosen_alpha < 1e-3 * cv.alpha_grid.front());
  CHECK(std::sqrt(cv.chosen_mse) < 1e-2);
}

TEST_CASE("cross-validation") {
  const Eigen::MatrixXd X = random_matrix(200, 20, 7);
  const Eigen::VectorXd noise = random_matrix(200, 1, 8);
  const CVReport r = lasso_cv(X, noise, {}, 3);
  CHECK(r.chosen_alpha > 0.1 * r.alpha_grid.front());
  const LassoFit f = lasso_fit(X, noise, r.chosen_alpha);
  CHECK(f.weights.cwiseAbs().maxCoeff() < 0.1);

  const CVReport again = lasso_cv(X, noise, {}, 3);
  CHECK(again.fold_mse == r.fold_mse);
  CHECK(again.chosen_index == r.chosen_index);

  const auto folds = cv_folds(10, 4, 1);
  REQUIRE(folds.size() == 4);
  std::vector<int> seen(10, 0);
  for (const auto& f2 : folds)
    for (auto i : f2) ++seen[static_cast<std::size_t>(i)];
  for (int s : seen) CHECK(s == 1);

  // Stats-based CV reproduces design-based CV on the same folds.
  const Eigen::VectorXd y = X.col(1) - X.col(4) + 0.3 * noise;
  std::vector<GramStats> stats;
  for (const auto& rows : cv_folds(200, 4, 9)) {
    Eigen::MatrixXd Xf(rows.size(), 20);
    Eigen::VectorXd yf(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Xf.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
      yf(static_cast<Eigen::Index>(i)) = y(rows[i]);
    }
    stats.push_back(GramStats::from(Xf, yf));
  }
  const auto grid = default_alpha_grid(lasso_alpha_max(X, y), 12, 1e-3);
  const CVReport via_stats = lasso_cv_stats(stats, grid);
  const CVReport via_design = lasso_cv(X, y, grid, 9);
  CHECK((via_stats.fold_mse - via_design.fold_mse).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(via_stats.chosen_index == via_design.chosen_index);
}

TEST_CASE("models") {
  const FeatureMap map = make_feature_map(10, 1, 3, 2.0, GMode::Scaled, 1);
  LassoFit fit;
  fit.weights = Eigen::VectorXd::Zero(map.feature_count());
  fit.intercept = 0.42;
  const SurrogateModel zero = make_model(map, fit, ObservableKind::Density, "abc");
  CHECK(zero.nnz() == 0);
  CHECK(predict_site(zero, 1.4, Eigen::VectorXd::LinSpaced(10, 0, 1)) == 0.42);

  fit.weights(3) = 0.5;
  fit.weights(17) = -0.25;
  const SurrogateModel m = make_model(map, fit, ObservableKind::Density, "abc");
  const Eigen::VectorXd Q = Eigen::VectorXd::LinSpaced(10, -0.3, 0.2);
  const double direct = featurize(1.4, Q, map).dot(fit.weights) + fit.intercept;
  CHECK(predict_site(m, 1.4, Q) == doctest::Approx(direct).epsilon(1e-14));

  const SurrogateModel back = model_from_json(model_to_json(m));
  CHECK(predict_site(back, 1.4, Q) == predict_site(m, 1.4, Q));
  CHECK(model_to_json(back) == model_to_json(m));
  CHECK_THROWS(model_from_json("{\"not\": \"a model\"}"));
}

TEST_CASE("grid search") {
  const TrainingSet set = build_dataset(small_paths(4, 1.4), 60, 2);
  GridOptions o;
  o.alpha_points = 8;
  const auto single = grid_search(set, {3}, {1.0}, 4, o);
  const auto fixed = train_fixed(set, 3, 1.0, 4, o);
  CHECK(single.alpha == fixed.alpha);
  CHECK(single.model.weights == fixed.model.weights);

  const auto grid = grid_search(set, {2, 4}, {0.5, 2.0}, 4, o);
  CHECK(grid.cells.size() == 4);
  double best = grid.cells.front().cv_mse;
  for (const auto& c : grid.cells) best = std::min(best, c.cv_mse);
  bool winner_is_best = false;
  for (const auto& c : grid.cells)
    winner_is_best = winner_is_best || (c.R == grid.R && c.gamma_omega == grid.gamma_omega && c.cv_mse == best);
  CHECK(winner_is_best);
  CHECK(grid.model.map.R == grid.R);

  TrainingSet tiny = subsample(set, 2, 1);
  const auto degenerate = train_fixed(tiny, 2, 1.0, 4, o);
  CHECK(degenerate.report.degenerate);
  CHECK(degenerate.alpha == degenerate.report.alpha_grid.back());

  CHECK_THROWS_AS(grid_search(set, {}, {1.0}, 1, o), ParameterError);
}
