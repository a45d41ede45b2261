#pragma once

#include "peal/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace peal {

enum class ObservableKind { Density, Hop, Nnn };
enum class GMode { Scaled, Appended };

std::string to_string(ObservableKind kind);
std::string to_string(GMode mode);
ObservableKind parse_observable_kind(const std::string& s);
GMode parse_g_mode(const std::string& s);

// Random Fourier feature map over periodic local windows. One frequency
// matrix (R x window) is shared by every window, so a model built on it can
// be applied at every site of a rolled configuration.
struct FeatureMap {
  int L = 0;
  int radius = 1;
  int R = 0;
  double gamma_omega = 1;
  GMode g_mode = GMode::Scaled;
  std::uint64_t seed = 0;
  Eigen::MatrixXd frequencies;  // R x (2 radius + 1)

  int window() const { return 2 * radius + 1; }
  Eigen::Index feature_count() const {
    return static_cast<Eigen::Index>(L) * 2 * R + (g_mode == GMode::Appended ? 1 : 0);
  }
};

FeatureMap make_feature_map(int L, int radius, int R, double gamma_omega, GMode mode,
                            std::uint64_t seed);

// Row c is the window centred at site c (periodic), ordered left to right.
Eigen::MatrixXd extract_regions(const Eigen::VectorXd& Q, int radius);

// Per window c: [cos(w_1 z_c) .. cos(w_R z_c), sin(w_1 z_c) .. sin(w_R z_c)],
// windows concatenated in site order; appended mode adds g as the last entry.
Eigen::VectorXd featurize(double g, const Eigen::VectorXd& Q, const FeatureMap& map);

// --- datasets --------------------------------------------------------------

struct TrainingRecord {
  double g;
  Eigen::VectorXd Q;  // rolled so the target site is index 0
  double target;
};

struct TrainingSet {
  ObservableKind kind = ObservableKind::Density;
  int L = 0;
  std::vector<TrainingRecord> records;

  std::size_t size() const { return records.size(); }
};

// Uniform (recorded step, site) draws per path from stream (seed, "dataset",
// path index). Bond targets are recomputed exactly on the rolled
// configuration, since trajectories store bonds only at the reference site.
TrainingSet build_dataset(const std::vector<Trajectory>& trajs, int pairs_per_path, std::uint64_t seed,
                          ObservableKind kind = ObservableKind::Density);

// Rows drawn without replacement from stream (seed, "subsample").
TrainingSet subsample(const TrainingSet& set, std::size_t rows, std::uint64_t seed);

// FNV-1a over kind, g, Q, and target bytes, as 16 hex digits.
std::string fingerprint(const TrainingSet& set);

// Instantiated for double and float.
template <typename Scalar = double>
MatrixX<Scalar> feature_matrix(const TrainingSet& set, const FeatureMap& map);
Eigen::VectorXd target_vector(const TrainingSet& set);

void write_dataset_csv(std::ostream& os, const TrainingSet& set);
TrainingSet read_dataset_csv(std::istream& is);

// --- LASSO -------------------------------------------------------------------

struct LassoOptions {
  double tol = 1e-8;        // max standardized coordinate update
  long max_sweeps = 100000;
  bool record_objective = false;
};

struct LassoFit {
  Eigen::VectorXd weights;  // in the caller's (unscaled) feature units
  double intercept = 0;
  double alpha = 0;
  long sweeps = 0;
  bool converged = false;
  double max_update = 0;
  std::vector<double> objective;  // after each sweep, when recorded
};

// Sufficient statistics of a design (X, y): enough to fit and to score.
struct GramStats {
  double n = 0;
  Eigen::VectorXd sum_x;
  double sum_y = 0;
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yty = 0;

  static GramStats from(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  GramStats& operator+=(const GramStats& o);
  GramStats& operator-=(const GramStats& o);
  // Sum of squared residuals of y - X w - b over the rows behind the stats.
  double sse(const Eigen::VectorXd& w, double b) const;
};

// Standardized LASSO problem, minimized by cyclic coordinate descent:
//   1/(2n) |y_c - X_s beta|^2 + alpha |beta|_1
// with y centred and the columns of X centred and scaled to unit (population)
// standard deviation. Zero-variance columns are frozen at zero. Two backends:
// covariance updates on a Gram matrix, or residual updates on the design.
// The design backend reads a shared raw design over a set of row ranges and
// standardizes on the fly, so cross-validation folds need no copies.
class LassoProblem {
 public:
  using RowRanges = std::vector<std::pair<Eigen::Index, Eigen::Index>>;  // [begin, end)

  static LassoProblem from_gram(const GramStats& stats);
  static LassoProblem from_design(Eigen::MatrixXd X, const Eigen::VectorXd& y);
  // Rows `ranges` of X; y spans all rows of X.
  static LassoProblem from_rows(std::shared_ptr<const Eigen::MatrixXd> X, const Eigen::VectorXd& y,
                                RowRanges ranges);
  static LassoProblem from_rows(std::shared_ptr<const Eigen::MatrixXf> X, const Eigen::VectorXd& y,
                                RowRanges ranges);

  double alpha_max() const;
  Eigen::Index features() const { return static_cast<Eigen::Index>(scale_.size()); }

  // Minimize at `alpha`, warm-started from the previous solution.
  LassoFit solve(double alpha, const LassoOptions& opts = {});
  void reset();

 private:
  LassoProblem() = default;
  template <typename Mat>
  static LassoProblem design(std::shared_ptr<const Mat> X, const Eigen::VectorXd& y, RowRanges ranges);
  double rho(Eigen::Index j) const;
  void apply(Eigen::Index j, double delta);
  double objective(double alpha) const;
  LassoFit unscaled(double alpha) const;
  // Exact minimizer on the current support and signs; kept only when it
  // preserves every sign and lowers the objective.
  bool polish(double alpha, const std::vector<Eigen::Index>& active);
  // Standardized columns A over the ranges: A^T A / n and A^T y_c / n.
  void support_system(const std::vector<Eigen::Index>& A, Eigen::MatrixXd& Gaa, Eigen::VectorXd& rhs) const;
  // resid = y_c - X_s beta on the current support.
  void sync_residual();

  bool gram_ = false;
  double n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;  // 0 marks a frozen column
  double y_mean_ = 0;
  double yy_ = 0;          // y_c . y_c / n
  Eigen::VectorXd beta_;
  Eigen::VectorXd b_;      // X_s^T y_c / n
  // Gram backend: G = X_s^T X_s / n, grad = b - G beta.
  Eigen::MatrixXd G_;
  Eigen::VectorXd grad_;
  // Design backend: exactly one of Xd_, Xf_ is set. yc_ and resid_ span all
  // rows of the design and are zero outside the ranges.
  std::shared_ptr<const Eigen::MatrixXd> Xd_;
  std::shared_ptr<const Eigen::MatrixXf> Xf_;
  RowRanges ranges_;
  Eigen::VectorXd yc_;
  Eigen::VectorXd resid_;
};

double lasso_alpha_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                   const LassoOptions& opts = {});

// Geometric grid from alpha_max down to alpha_max * ratio.
std::vector<double> default_alpha_grid(double alpha_max, int points = 30, double ratio = 1e-6);

struct CVReport {
  std::vector<double> alpha_grid;
  Eigen::MatrixXd fold_mse;       // folds x alphas
  std::vector<double> mean_mse;   // per alpha
  std::size_t chosen_index = 0;
  double chosen_alpha = 0;
  double chosen_mse = 0;
  int folds = 4;
  int R = 0;                      // set when produced by a grid search
  double gamma_omega = 0;
  bool degenerate = false;        // fewer rows than folds: no validation
};

struct CVOptions {
  int folds = 4;
  LassoOptions lasso{};
  // Above this feature count the design backend is used instead of Gram.
  Eigen::Index gram_max_features = 4096;
};

// Row indices (ascending) of each fold: a shuffle from stream
// (seed, "cv-folds") cut into contiguous pieces.
std::vector<std::vector<Eigen::Index>> cv_folds(Eigen::Index rows, int folds, std::uint64_t seed);

// An empty grid selects default_alpha_grid(alpha_max of the full data).
CVReport lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<double> alpha_grid,
                  std::uint64_t seed, const CVOptions& opts = {});

// Contiguous [begin, end) blocks for folds laid out one after another.
LassoProblem::RowRanges fold_blocks(const std::vector<std::vector<Eigen::Index>>& folds);

// Design-backend CV on a design whose folds are the contiguous `blocks`.
// Instantiated for double and float designs.
template <typename Mat>
CVReport lasso_cv_blocks(const std::shared_ptr<const Mat>& X, const Eigen::VectorXd& y,
                         const LassoProblem::RowRanges& blocks, std::vector<double> alpha_grid,
                         const CVOptions& opts = {});

// Same, from per-fold sufficient statistics (Gram backend).
CVReport lasso_cv_stats(const std::vector<GramStats>& folds, std::vector<double> alpha_grid,
                        const CVOptions& opts = {});

// --- surrogate models ------------------------------------------------------

struct SurrogateModel {
  FeatureMap map;
  std::vector<std::pair<Eigen::Index, double>> weights;  // sparse, ascending index
  double intercept = 0;
  double alpha = 0;
  ObservableKind kind = ObservableKind::Density;
  std::string fingerprint;

  Eigen::Index nnz() const { return static_cast<Eigen::Index>(weights.size()); }
};

SurrogateModel make_model(const FeatureMap& map, const LassoFit& fit, ObservableKind kind,
                          std::string fingerprint);

// Observable at site 0 of the given (rolled) frame.
double predict_site(const SurrogateModel& model, double g, const Eigen::VectorXd& Q);

std::string model_to_json(const SurrogateModel& model);
SurrogateModel model_from_json(const std::string& text);
void save_model(const std::string& path, const SurrogateModel& model);
SurrogateModel load_model(const std::string& path);

struct GridCell {
  int R;
  double gamma_omega;
  double alpha;
  double cv_mse;
};

struct GridOptions {
  int radius = 1;
  GMode g_mode = GMode::Scaled;
  CVOptions cv{.folds = 4, .lasso = {.tol = 1e-6}};
  // Rows used to score each grid cell (0 = all). The winning configuration
  // is re-cross-validated for alpha on all rows before the final refit.
  std::size_t search_rows = 0;
  int alpha_points = 30;
  // Grid cells are scored on a supplied, shorter alpha grid
  // (search_alpha_points from alpha_max down to alpha_max * search_alpha_ratio)
  // with a looser tolerance and a sweep cap; the final fit uses the default
  // grid and cv.lasso.
  int search_alpha_points = 16;
  double search_alpha_ratio = 1e-5;
  double search_tol = 1e-6;
  long search_max_sweeps = 100000;
};

struct GridSearchResult {
  int R = 0;
  double gamma_omega = 0;
  double alpha = 0;
  std::vector<GridCell> cells;
  CVReport report;  // alpha CV of the winning configuration on all rows
  SurrogateModel model;
};

GridSearchResult grid_search(const TrainingSet& data, const std::vector<int>& R_grid,
                             const std::vector<double>& gamma_grid, std::uint64_t seed,
                             const GridOptions& opts = {});

// Fixed (R, gamma_omega): alpha by cross-validation, then refit on all rows.
GridSearchResult train_fixed(const TrainingSet& data, int R, double gamma_omega, std::uint64_t seed,
                             const GridOptions& opts = {});

void write_cv_csv(std::ostream& os, const CVReport& report);

}  // namespace peal
