#include "peal/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <type_traits>

namespace peal {

namespace {

double soft_threshold(double x, double a) {
  if (x > a) return x - a;
  if (x < -a) return x + a;
  return 0.0;
}

// Relative variance floor below which a column counts as constant.
constexpr double kConstantColumn = 1e-12;

// Active-set sweeps before the first attempt to solve the support exactly.
constexpr long kPolishAfter = 20;
constexpr int kPolishIterations = 4;

}  // namespace

GramStats GramStats::from(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DataError("design rows and target length differ");
  if (!X.allFinite() || !y.allFinite()) throw DataError("non-finite values in design or target");
  GramStats s;
  s.n = static_cast<double>(X.rows());
  s.sum_x = X.colwise().sum().transpose();
  s.sum_y = y.sum();
  s.xtx = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  s.xtx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  s.xtx.triangularView<Eigen::StrictlyUpper>() = s.xtx.transpose();
  s.xty = X.transpose() * y;
  s.yty = y.squaredNorm();
  return s;
}

GramStats& GramStats::operator+=(const GramStats& o) {
  if (n == 0) return *this = o;
  n += o.n;
  sum_x += o.sum_x;
  sum_y += o.sum_y;
  xtx += o.xtx;
  xty += o.xty;
  yty += o.yty;
  return *this;
}

GramStats& GramStats::operator-=(const GramStats& o) {
  n -= o.n;
  sum_x -= o.sum_x;
  sum_y -= o.sum_y;
  xtx -= o.xtx;
  xty -= o.xty;
  yty -= o.yty;
  return *this;
}

double GramStats::sse(const Eigen::VectorXd& w, double b) const {
  const double v = yty - 2 * w.dot(xty) - 2 * b * sum_y + w.dot(xtx * w) + 2 * b * w.dot(sum_x) + n * b * b;
  return std::max(v, 0.0);
}

LassoProblem LassoProblem::from_gram(const GramStats& s) {
  if (!(s.n >= 1)) throw DataError("LASSO needs at least one row");
  LassoProblem p;
  p.gram_ = true;
  p.n_ = s.n;
  const Eigen::Index d = s.sum_x.size();
  p.mean_ = s.sum_x / s.n;
  p.y_mean_ = s.sum_y / s.n;
  p.yy_ = std::max(0.0, s.yty / s.n - p.y_mean_ * p.y_mean_);
  p.scale_ = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double second = s.xtx(j, j) / s.n;
    const double var = second - p.mean_(j) * p.mean_(j);
    if (var > kConstantColumn * std::max(second, 1e-300)) p.scale_(j) = std::sqrt(var);
  }
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j)
    if (p.scale_(j) > 0) inv(j) = 1.0 / p.scale_(j);
  p.G_ = s.xtx / s.n;
  p.G_.noalias() -= p.mean_ * p.mean_.transpose();
  p.G_ = inv.asDiagonal() * p.G_ * inv.asDiagonal();
  p.b_ = inv.cwiseProduct(s.xty / s.n - p.mean_ * p.y_mean_);
  p.beta_ = Eigen::VectorXd::Zero(d);
  p.grad_ = p.b_;
  return p;
}

namespace {

using RowRanges = LassoProblem::RowRanges;

// Mixed-precision kernels: Eigen's float-to-double cast does not vectorize
// here, so these are written as plain loops the compiler can.
double dot(const float* x, const double* v, Eigen::Index n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  Eigen::Index i = 0;
  for (; i + 8 <= n; i += 8)
    for (int k = 0; k < 8; ++k) acc[k] += static_cast<double>(x[i + k]) * v[i + k];
  double tail = 0;
  for (; i < n; ++i) tail += static_cast<double>(x[i]) * v[i];
  return tail + ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

double dot(const double* x, const double* v, Eigen::Index n) {
  return Eigen::Map<const Eigen::VectorXd>(x, n).dot(Eigen::Map<const Eigen::VectorXd>(v, n));
}

template <typename T>
void axpy(const T* x, double* v, Eigen::Index n, double a, double shift) {
  for (Eigen::Index i = 0; i < n; ++i) v[i] -= a * (static_cast<double>(x[i]) - shift);
}

template <typename Mat>
double range_dot(const Mat& X, Eigen::Index j, const RowRanges& rs, const Eigen::VectorXd& v) {
  double s = 0;
  for (const auto& [lo, hi] : rs) s += dot(X.col(j).data() + lo, v.data() + lo, hi - lo);
  return s;
}

// v -= a (x_j - shift) over the ranges.
template <typename Mat>
void range_axpy(const Mat& X, Eigen::Index j, const RowRanges& rs, double a, double shift, Eigen::VectorXd& v) {
  for (const auto& [lo, hi] : rs) axpy(X.col(j).data() + lo, v.data() + lo, hi - lo, a, shift);
}

}  // namespace

template <typename Mat>
LassoProblem LassoProblem::design(std::shared_ptr<const Mat> X, const Eigen::VectorXd& y, RowRanges ranges) {
  if (!X) throw DataError("design is missing");
  if (X->rows() != y.size()) throw DataError("design rows and target length differ");
  Eigen::Index n = 0;
  for (const auto& [lo, hi] : ranges) {
    if (lo < 0 || hi > X->rows() || lo > hi) throw DataError("row range outside the design");
    n += hi - lo;
  }
  if (n < 1) throw DataError("LASSO needs at least one row");
  for (const auto& [lo, hi] : ranges)
    if (!X->middleRows(lo, hi - lo).allFinite() || !y.segment(lo, hi - lo).allFinite())
      throw DataError("non-finite values in design or target");

  LassoProblem p;
  p.gram_ = false;
  p.n_ = static_cast<double>(n);
  p.ranges_ = std::move(ranges);
  const Eigen::Index d = X->cols();
  Eigen::VectorXd ones = Eigen::VectorXd::Zero(X->rows());
  for (const auto& [lo, hi] : p.ranges_) ones.segment(lo, hi - lo).setOnes();
  p.y_mean_ = y.dot(ones) / p.n_;
  p.yc_ = (y.array() - p.y_mean_).matrix().cwiseProduct(ones);
  p.yy_ = p.yc_.squaredNorm() / p.n_;
  p.mean_.resize(d);
  p.scale_ = Eigen::VectorXd::Zero(d);
  p.b_ = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    p.mean_(j) = range_dot(*X, j, p.ranges_, ones) / p.n_;
    double ss = 0;
    for (const auto& [lo, hi] : p.ranges_)
      ss += (X->col(j).segment(lo, hi - lo).template cast<double>().array() - p.mean_(j)).square().sum();
    const double var = ss / p.n_;
    const double second = var + p.mean_(j) * p.mean_(j);
    if (var > kConstantColumn * std::max(second, 1e-300)) {
      p.scale_(j) = std::sqrt(var);
      // y_c sums to zero over the ranges, so the column mean drops out.
      p.b_(j) = range_dot(*X, j, p.ranges_, p.yc_) / (p.scale_(j) * p.n_);
    }
  }
  p.resid_ = p.yc_;
  p.beta_ = Eigen::VectorXd::Zero(d);
  if constexpr (std::is_same_v<Mat, Eigen::MatrixXd>)
    p.Xd_ = std::move(X);
  else
    p.Xf_ = std::move(X);
  return p;
}

LassoProblem LassoProblem::from_design(Eigen::MatrixXd X, const Eigen::VectorXd& y) {
  const Eigen::Index rows = X.rows();
  return design(std::make_shared<const Eigen::MatrixXd>(std::move(X)), y, {{0, rows}});
}

LassoProblem LassoProblem::from_rows(std::shared_ptr<const Eigen::MatrixXd> X, const Eigen::VectorXd& y,
                                     RowRanges ranges) {
  return design(std::move(X), y, std::move(ranges));
}

LassoProblem LassoProblem::from_rows(std::shared_ptr<const Eigen::MatrixXf> X, const Eigen::VectorXd& y,
                                     RowRanges ranges) {
  return design(std::move(X), y, std::move(ranges));
}

double LassoProblem::alpha_max() const { return b_.size() ? b_.cwiseAbs().maxCoeff() : 0.0; }

void LassoProblem::reset() {
  if (gram_) {
    grad_ = b_;
  } else {
    resid_ = yc_;
  }
  beta_.setZero();
}

double LassoProblem::rho(Eigen::Index j) const {
  if (gram_) return grad_(j) + G_(j, j) * beta_(j);
  // The residual sums to zero over the ranges, so the column mean drops out.
  const double dot = Xd_ ? range_dot(*Xd_, j, ranges_, resid_) : range_dot(*Xf_, j, ranges_, resid_);
  return dot / (scale_(j) * n_) + beta_(j);
}

void LassoProblem::apply(Eigen::Index j, double delta) {
  if (gram_) {
    grad_.noalias() -= G_.col(j) * delta;
  } else if (Xd_) {
    range_axpy(*Xd_, j, ranges_, delta / scale_(j), mean_(j), resid_);
  } else {
    range_axpy(*Xf_, j, ranges_, delta / scale_(j), mean_(j), resid_);
  }
}

double LassoProblem::objective(double alpha) const {
  const double l1 = alpha * beta_.cwiseAbs().sum();
  if (gram_) return 0.5 * (yy_ - beta_.dot(b_) - beta_.dot(grad_)) + l1;
  return 0.5 * resid_.squaredNorm() / n_ + l1;
}

LassoFit LassoProblem::unscaled(double alpha) const {
  LassoFit fit;
  fit.alpha = alpha;
  fit.weights = Eigen::VectorXd::Zero(beta_.size());
  for (Eigen::Index j = 0; j < beta_.size(); ++j)
    if (scale_(j) > 0 && beta_(j) != 0) fit.weights(j) = beta_(j) / scale_(j);
  fit.intercept = y_mean_ - fit.weights.dot(mean_);
  return fit;
}

void LassoProblem::support_system(const std::vector<Eigen::Index>& A, Eigen::MatrixXd& Gaa,
                                  Eigen::VectorXd& rhs) const {
  const auto m = static_cast<Eigen::Index>(A.size());
  if (gram_) {
    Gaa = G_(A, A);
    rhs = b_(A);
    return;
  }
  Gaa = Eigen::MatrixXd::Zero(m, m);
  rhs = Eigen::VectorXd::Zero(m);
  constexpr Eigen::Index kChunk = 1024;
  Eigen::MatrixXd block;
  for (const auto& [lo, hi] : ranges_) {
    for (Eigen::Index r = lo; r < hi; r += kChunk) {
      const Eigen::Index len = std::min(kChunk, hi - r);
      block.resize(len, m);
      for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index j = A[k];
        if (Xd_)
          block.col(k) = Xd_->col(j).segment(r, len);
        else
          block.col(k) = Xf_->col(j).segment(r, len).cast<double>();
        block.col(k).array() = (block.col(k).array() - mean_(j)) / scale_(j);
      }
      Gaa.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
      rhs.noalias() += block.transpose() * yc_.segment(r, len);
    }
  }
  Gaa.triangularView<Eigen::StrictlyUpper>() = Gaa.transpose();
  Gaa /= n_;
  rhs /= n_;
}

void LassoProblem::sync_residual() {
  if (gram_) {
    grad_ = b_;
    for (Eigen::Index j = 0; j < beta_.size(); ++j)
      if (beta_(j) != 0) grad_.noalias() -= G_.col(j) * beta_(j);
    return;
  }
  resid_ = yc_;
  for (Eigen::Index j = 0; j < beta_.size(); ++j)
    if (beta_(j) != 0) apply(j, beta_(j));
}

bool LassoProblem::polish(double alpha, const std::vector<Eigen::Index>& active) {
  std::vector<Eigen::Index> A;
  for (Eigen::Index j : active)
    if (beta_(j) != 0) A.push_back(j);
  if (A.empty()) return false;

  // Active-set iterations: step toward the minimizer on the current signed
  // support, stopping at the first coordinate that would cross zero.
  const double start = objective(alpha);
  const Eigen::VectorXd saved = beta_;
  Eigen::MatrixXd G_all;
  Eigen::VectorXd b_all;
  support_system(A, G_all, b_all);
  std::vector<Eigen::Index> pos(A.size());  // positions of A inside the first support
  std::iota(pos.begin(), pos.end(), Eigen::Index{0});
  bool exact = false;
  for (int it = 0; it < kPolishIterations && !A.empty(); ++it) {
    const auto m = static_cast<Eigen::Index>(A.size());
    Eigen::VectorXd old = beta_(A);
    Eigen::VectorXd sgn = old.unaryExpr([](double v) { return v > 0 ? 1.0 : -1.0; });
    const Eigen::MatrixXd Gaa = G_all(pos, pos);
    const Eigen::VectorXd rhs = b_all(pos) - alpha * sgn;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(Gaa);
    if (ldlt.info() != Eigen::Success) break;
    const Eigen::VectorXd x = ldlt.solve(rhs);
    if (!x.allFinite()) break;
    double t = 1;
    Eigen::Index block = -1;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (x(k) * sgn(k) > 0) continue;
      const double tk = old(k) / (old(k) - x(k));
      if (tk < t) {
        t = tk;
        block = k;
      }
    }
    const Eigen::VectorXd next = old + t * (x - old);
    for (Eigen::Index k = 0; k < m; ++k) beta_(A[k]) = next(k);
    if (block < 0) {
      exact = true;
      break;
    }
    beta_(A[block]) = 0;
    A.erase(A.begin() + block);
    pos.erase(pos.begin() + block);
  }
  sync_residual();
  if (!(objective(alpha) <= start)) {
    beta_ = saved;
    sync_residual();
    return false;
  }
  return exact;
}

LassoFit LassoProblem::solve(double alpha, const LassoOptions& opts) {
  if (!(alpha >= 0)) throw ParameterError("alpha must be >= 0");
  const Eigen::Index d = beta_.size();
  std::vector<double> diag(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (scale_(j) == 0) continue;
    diag[j] = gram_ ? G_(j, j) : 1.0;
  }
  auto update = [&](Eigen::Index j) {
    if (diag[j] <= 0) return 0.0;
    const double r = rho(j);
    const double nb = soft_threshold(r, alpha) / diag[j];
    const double delta = nb - beta_(j);
    if (delta != 0) {
      beta_(j) = nb;
      apply(j, delta);
    }
    return std::abs(delta);
  };

  std::vector<double> trace;
  long sweeps = 0;
  bool converged = false;
  bool full = true;
  double max_delta = 0;
  std::vector<Eigen::Index> active;
  long phase_sweeps = 0;
  long polish_at = kPolishAfter;
  while (sweeps < opts.max_sweeps) {
    max_delta = 0;
    if (full) {
      for (Eigen::Index j = 0; j < d; ++j) max_delta = std::max(max_delta, update(j));
    } else {
      for (Eigen::Index j : active) max_delta = std::max(max_delta, update(j));
    }
    ++sweeps;
    if (opts.record_objective) trace.push_back(objective(alpha));
    if (max_delta < opts.tol) {
      if (full) {
        converged = true;
        break;
      }
      full = true;
      continue;
    }
    if (full) {
      active.clear();
      for (Eigen::Index j = 0; j < d; ++j)
        if (beta_(j) != 0) active.push_back(j);
      phase_sweeps = 0;
      polish_at = kPolishAfter;
    } else if (++phase_sweeps == polish_at) {
      // Slow progress on a fixed support: try the exact solution on it.
      if (!polish(alpha, active)) polish_at *= 2;
    }
    full = false;
  }
  LassoFit fit = unscaled(alpha);
  fit.sweeps = sweeps;
  fit.converged = converged;
  fit.max_update = max_delta;
  fit.objective = std::move(trace);
  return fit;
}

double lasso_alpha_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return LassoProblem::from_design(X, y).alpha_max();
}

LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                   const LassoOptions& opts) {
  auto problem = LassoProblem::from_design(X, y);
  return problem.solve(alpha, opts);
}

std::vector<double> default_alpha_grid(double alpha_max, int points, double ratio) {
  if (points < 1) throw ParameterError("alpha grid needs at least one point");
  std::vector<double> grid;
  if (!(alpha_max > 0)) {
    grid.assign(1, 0.0);
    return grid;
  }
  for (int i = 0; i < points; ++i) {
    const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    grid.push_back(alpha_max * std::pow(ratio, f));
  }
  return grid;
}

std::vector<std::vector<Eigen::Index>> cv_folds(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ParameterError("folds must be >= 2");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_stream(seed, "cv-folds");
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index lo = n * f / folds;
    const Eigen::Index hi = n * (f + 1) / folds;
    out[f].assign(order.begin() + lo, order.begin() + hi);
    std::sort(out[f].begin(), out[f].end());
  }
  return out;
}

namespace {

std::vector<double> prepare_grid(std::vector<double> grid, double alpha_max) {
  if (grid.empty()) grid = default_alpha_grid(alpha_max);
  std::sort(grid.begin(), grid.end(), std::greater<>());
  return grid;
}

void choose(CVReport& rep) {
  const std::size_t na = rep.alpha_grid.size();
  rep.mean_mse.resize(na);
  for (std::size_t a = 0; a < na; ++a) rep.mean_mse[a] = rep.fold_mse.col(static_cast<Eigen::Index>(a)).mean();
  // First minimum, so ties go to the larger alpha.
  rep.chosen_index = static_cast<std::size_t>(
      std::min_element(rep.mean_mse.begin(), rep.mean_mse.end()) - rep.mean_mse.begin());
  rep.chosen_alpha = rep.alpha_grid[rep.chosen_index];
  rep.chosen_mse = rep.mean_mse[rep.chosen_index];
}

CVReport degenerate_report(std::vector<double> grid, int folds) {
  CVReport rep;
  rep.folds = folds;
  rep.degenerate = true;
  rep.alpha_grid = std::move(grid);
  rep.chosen_index = rep.alpha_grid.size() - 1;
  rep.chosen_alpha = rep.alpha_grid.back();
  return rep;
}

}  // namespace

LassoProblem::RowRanges fold_blocks(const std::vector<std::vector<Eigen::Index>>& folds) {
  LassoProblem::RowRanges out;
  Eigen::Index at = 0;
  for (const auto& rows : folds) {
    const auto len = static_cast<Eigen::Index>(rows.size());
    out.emplace_back(at, at + len);
    at += len;
  }
  return out;
}

template <typename Mat>
CVReport lasso_cv_blocks(const std::shared_ptr<const Mat>& X, const Eigen::VectorXd& y,
                         const LassoProblem::RowRanges& blocks, std::vector<double> alpha_grid,
                         const CVOptions& opts) {
  const auto nf = static_cast<int>(blocks.size());
  if (nf < 2) throw ParameterError("folds must be >= 2");
  const Eigen::Index n = blocks.back().second;
  alpha_grid = prepare_grid(std::move(alpha_grid), LassoProblem::from_rows(X, y, {{0, n}}).alpha_max());
  for (const auto& [lo, hi] : blocks)
    if (hi == lo) return degenerate_report(std::move(alpha_grid), nf);
  CVReport rep;
  rep.folds = nf;
  rep.alpha_grid = alpha_grid;
  rep.fold_mse = Eigen::MatrixXd::Zero(nf, static_cast<Eigen::Index>(alpha_grid.size()));
  for (int f = 0; f < nf; ++f) {
    LassoProblem::RowRanges train;
    for (int h = 0; h < nf; ++h)
      if (h != f) train.push_back(blocks[h]);
    auto problem = LassoProblem::from_rows(X, y, train);
    const auto [lo, hi] = blocks[f];
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
      const LassoFit fit = problem.solve(alpha_grid[a], opts.lasso);
      Eigen::VectorXd r = y.segment(lo, hi - lo).array() - fit.intercept;
      for (Eigen::Index j = 0; j < fit.weights.size(); ++j)
        if (fit.weights(j) != 0)
          r -= fit.weights(j) * X->col(j).segment(lo, hi - lo).template cast<double>();
      rep.fold_mse(f, static_cast<Eigen::Index>(a)) = r.squaredNorm() / static_cast<double>(hi - lo);
    }
  }
  choose(rep);
  return rep;
}

template CVReport lasso_cv_blocks(const std::shared_ptr<const Eigen::MatrixXd>&, const Eigen::VectorXd&,
                                  const LassoProblem::RowRanges&, std::vector<double>, const CVOptions&);
template CVReport lasso_cv_blocks(const std::shared_ptr<const Eigen::MatrixXf>&, const Eigen::VectorXd&,
                                  const LassoProblem::RowRanges&, std::vector<double>, const CVOptions&);

CVReport lasso_cv_stats(const std::vector<GramStats>& folds, std::vector<double> alpha_grid,
                        const CVOptions& opts) {
  if (folds.size() < 2) throw ParameterError("folds must be >= 2");
  GramStats total;
  for (const auto& f : folds) total += f;
  alpha_grid = prepare_grid(std::move(alpha_grid), LassoProblem::from_gram(total).alpha_max());
  const auto nf = static_cast<int>(folds.size());
  for (const auto& f : folds)
    if (f.n < 1) return degenerate_report(std::move(alpha_grid), nf);

  CVReport rep;
  rep.folds = nf;
  rep.alpha_grid = alpha_grid;
  rep.fold_mse = Eigen::MatrixXd::Zero(nf, static_cast<Eigen::Index>(alpha_grid.size()));
  for (int f = 0; f < nf; ++f) {
    auto problem = [&] {
      GramStats train = total;
      train -= folds[f];
      return LassoProblem::from_gram(train);
    }();
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
      const LassoFit fit = problem.solve(alpha_grid[a], opts.lasso);
      rep.fold_mse(f, static_cast<Eigen::Index>(a)) = folds[f].sse(fit.weights, fit.intercept) / folds[f].n;
    }
  }
  choose(rep);
  return rep;
}

CVReport lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<double> alpha_grid,
                  std::uint64_t seed, const CVOptions& opts) {
  if (X.rows() != y.size()) throw DataError("design rows and target length differ");
  if (opts.folds < 2) throw ParameterError("folds must be >= 2");
  const Eigen::Index n = X.rows();
  const bool use_gram = X.cols() <= opts.gram_max_features;

  if (n < opts.folds) {
    const double amax = n > 0 ? lasso_alpha_max(X, y) : 0.0;
    return degenerate_report(prepare_grid(std::move(alpha_grid), amax), opts.folds);
  }
  const auto fold_rows = cv_folds(n, opts.folds, seed);

  if (use_gram) {
    std::vector<GramStats> stats;
    for (const auto& rows : fold_rows) stats.push_back(GramStats::from(X(rows, Eigen::all), y(rows)));
    return lasso_cv_stats(stats, std::move(alpha_grid), opts);
  }

  // Rows regrouped so that each fold is one contiguous block.
  std::vector<Eigen::Index> order;
  for (const auto& rows : fold_rows) order.insert(order.end(), rows.begin(), rows.end());
  const auto Xr = std::make_shared<const Eigen::MatrixXd>(X(order, Eigen::all));
  const Eigen::VectorXd yr = y(order);
  return lasso_cv_blocks(Xr, yr, fold_blocks(fold_rows), std::move(alpha_grid), opts);
}

void write_cv_csv(std::ostream& os, const CVReport& rep) {
  os << "# folds=" << rep.folds << " R=" << rep.R << " gamma_omega=" << format_double(rep.gamma_omega)
     << " chosen_alpha=" << format_double(rep.chosen_alpha) << " degenerate=" << rep.degenerate << '\n';
  os << "alpha,mean_mse";
  for (int f = 0; f < rep.fold_mse.rows(); ++f) os << ",fold" << f << "_mse";
  os << '\n';
  for (std::size_t a = 0; a < rep.alpha_grid.size(); ++a) {
    os << format_double(rep.alpha_grid[a]) << ','
       << (rep.mean_mse.empty() ? std::string("nan") : format_double(rep.mean_mse[a]));
    for (int f = 0; f < rep.fold_mse.rows(); ++f)
      os << ',' << format_double(rep.fold_mse(f, static_cast<Eigen::Index>(a)));
    os << '\n';
  }
}

}  // namespace peal
