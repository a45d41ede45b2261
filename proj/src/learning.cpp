#include "peal/learning.hpp"

#include "peal/qss.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

namespace peal {

std::string to_string(ObservableKind kind) {
  switch (kind) {
    case ObservableKind::Density: return "density";
    case ObservableKind::Hop: return "hop";
    case ObservableKind::Nnn: return "nnn";
  }
  return "density";
}

std::string to_string(GMode mode) { return mode == GMode::Scaled ? "scaled" : "appended"; }

ObservableKind parse_observable_kind(const std::string& s) {
  if (s == "density") return ObservableKind::Density;
  if (s == "hop") return ObservableKind::Hop;
  if (s == "nnn") return ObservableKind::Nnn;
  throw ParameterError("kind must be one of density, hop, nnn; got '" + s + "'");
}

GMode parse_g_mode(const std::string& s) {
  if (s == "scaled") return GMode::Scaled;
  if (s == "appended") return GMode::Appended;
  throw ParameterError("g_mode must be scaled or appended; got '" + s + "'");
}

FeatureMap make_feature_map(int L, int radius, int R, double gamma_omega, GMode mode, std::uint64_t seed) {
  if (radius < 0) throw ParameterError("radius must be >= 0");
  if (2 * radius + 1 > L) throw ParameterError("radius: window 2*radius+1 exceeds L");
  if (R < 1) throw ParameterError("R must be >= 1");
  if (!(gamma_omega > 0)) throw ParameterError("gamma_omega must be > 0");
  FeatureMap map;
  map.L = L;
  map.radius = radius;
  map.R = R;
  map.gamma_omega = gamma_omega;
  map.g_mode = mode;
  map.seed = seed;
  map.frequencies.resize(R, map.window());
  // Row-major draws so maps with larger R extend those with smaller R.
  Rng rng = make_stream(seed, "feature-map");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = 0; r < R; ++r)
    for (int k = 0; k < map.window(); ++k) map.frequencies(r, k) = gamma_omega * normal(rng);
  return map;
}

Eigen::MatrixXd extract_regions(const Eigen::VectorXd& Q, int radius) {
  const auto L = static_cast<int>(Q.size());
  if (radius < 0 || 2 * radius + 1 > L) throw ParameterError("radius: window 2*radius+1 exceeds L");
  Eigen::MatrixXd W(L, 2 * radius + 1);
  for (int c = 0; c < L; ++c)
    for (int k = -radius; k <= radius; ++k) W(c, k + radius) = Q(((c + k) % L + L) % L);
  return W;
}

namespace {

void check_frame(const FeatureMap& map, const Eigen::VectorXd& Q) {
  if (Q.size() != map.L)
    throw ParameterError("L mismatch: model expects " + std::to_string(map.L) + " sites, got " +
                         std::to_string(Q.size()));
}

// Window input for site c after the g_mode transform.
inline double window_value(const FeatureMap& map, double g, const Eigen::VectorXd& Q, int c, int k) {
  const int L = map.L;
  const double q = Q(((c + k - map.radius) % L + L) % L);
  return map.g_mode == GMode::Scaled ? g * q : q;
}

// Writes the feature vector into `out` (length feature_count()).
template <typename Out>
void featurize_into(double g, const Eigen::VectorXd& Q, const FeatureMap& map, Out&& out) {
  const int w = map.window();
  const int R = map.R;
  std::vector<double> z(static_cast<std::size_t>(w));
  for (int c = 0; c < map.L; ++c) {
    for (int k = 0; k < w; ++k) z[k] = window_value(map, g, Q, c, k);
    const Eigen::Index base = static_cast<Eigen::Index>(c) * 2 * R;
    for (int r = 0; r < R; ++r) {
      double arg = 0;
      for (int k = 0; k < w; ++k) arg += map.frequencies(r, k) * z[k];
      out(base + r) = std::cos(arg);
      out(base + R + r) = std::sin(arg);
    }
  }
  if (map.g_mode == GMode::Appended) out(map.feature_count() - 1) = g;
}

std::uint64_t fnv_bytes(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw DataError("line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

Eigen::VectorXd featurize(double g, const Eigen::VectorXd& Q, const FeatureMap& map) {
  check_frame(map, Q);
  Eigen::VectorXd f(map.feature_count());
  featurize_into(g, Q, map, f);
  return f;
}

TrainingSet build_dataset(const std::vector<Trajectory>& trajs, int pairs_per_path, std::uint64_t seed,
                          ObservableKind kind) {
  if (trajs.empty()) throw DataError("no trajectories supplied for the dataset");
  if (pairs_per_path < 1) throw ParameterError("pairs_per_path must be >= 1");
  TrainingSet set;
  set.kind = kind;
  set.L = trajs.front().params.L;
  set.records.reserve(trajs.size() * static_cast<std::size_t>(pairs_per_path));
  for (std::size_t p = 0; p < trajs.size(); ++p) {
    const Trajectory& tr = trajs[p];
    if (tr.samples.empty()) throw DataError("trajectory " + std::to_string(p) + " is empty");
    if (tr.params.L != set.L) throw DataError("trajectories disagree on L");
    Rng rng = make_stream(seed, "dataset", p);
    std::uniform_int_distribution<std::size_t> pick_step(0, tr.samples.size() - 1);
    std::uniform_int_distribution<int> pick_site(0, set.L - 1);
    for (int j = 0; j < pairs_per_path; ++j) {
      const std::size_t s = pick_step(rng);
      const int i = pick_site(rng);
      const TrajectorySample& smp = tr.samples[s];
      TrainingRecord rec{tr.params.g, roll(smp.state.Q, i), 0.0};
      if (kind == ObservableKind::Density) {
        if (smp.obs.n.size() != set.L) throw DataError("trajectory lacks densities");
        rec.target = smp.obs.n(i);
      } else {
        const ObservableRecord o = exact_observables(rec.Q, rec.g, tr.params.electrons());
        rec.target = kind == ObservableKind::Hop ? o.hop : o.nnn;
      }
      if (!std::isfinite(rec.target)) throw DataError("non-finite target in trajectory " + std::to_string(p));
      set.records.push_back(std::move(rec));
    }
  }
  return set;
}

TrainingSet subsample(const TrainingSet& set, std::size_t rows, std::uint64_t seed) {
  if (rows >= set.size()) return set;
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_stream(seed, "subsample");
  // Partial Fisher-Yates: the first `rows` entries are the draw.
  for (std::size_t i = 0; i < rows; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
    std::swap(idx[i], idx[d(rng)]);
  }
  idx.resize(rows);
  std::sort(idx.begin(), idx.end());
  TrainingSet out;
  out.kind = set.kind;
  out.L = set.L;
  for (std::size_t i : idx) out.records.push_back(set.records[i]);
  return out;
}

std::string fingerprint(const TrainingSet& set) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::string k = to_string(set.kind);
  h = fnv_bytes(h, k.data(), k.size());
  for (const auto& r : set.records) {
    h = fnv_bytes(h, &r.g, sizeof r.g);
    h = fnv_bytes(h, r.Q.data(), sizeof(double) * static_cast<std::size_t>(r.Q.size()));
    h = fnv_bytes(h, &r.target, sizeof r.target);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <typename Scalar>
MatrixX<Scalar> feature_matrix(const TrainingSet& set, const FeatureMap& map) {
  MatrixX<Scalar> X(static_cast<Eigen::Index>(set.size()), map.feature_count());
  for (std::size_t i = 0; i < set.size(); ++i) {
    check_frame(map, set.records[i].Q);
    featurize_into(set.records[i].g, set.records[i].Q, map, X.row(static_cast<Eigen::Index>(i)));
  }
  return X;
}

template Eigen::MatrixXd feature_matrix<double>(const TrainingSet&, const FeatureMap&);
template Eigen::MatrixXf feature_matrix<float>(const TrainingSet&, const FeatureMap&);

Eigen::VectorXd target_vector(const TrainingSet& set) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) y(static_cast<Eigen::Index>(i)) = set.records[i].target;
  return y;
}

void write_dataset_csv(std::ostream& os, const TrainingSet& set) {
  os << "g";
  for (int i = 0; i < set.L; ++i) os << ",Q_" << i;
  os << ",target,kind\n";
  const std::string kind = to_string(set.kind);
  for (const auto& r : set.records) {
    os << format_double(r.g);
    for (Eigen::Index i = 0; i < r.Q.size(); ++i) os << ',' << format_double(r.Q(i));
    os << ',' << format_double(r.target) << ',' << kind << '\n';
  }
}

TrainingSet read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("dataset file is empty");
  const auto header = split_csv(line);
  if (header.size() < 4 || header.front() != "g" || header[header.size() - 2] != "target" ||
      header.back() != "kind")
    throw DataError("dataset header must be g,Q_0..Q_{L-1},target,kind");
  TrainingSet set;
  set.L = static_cast<int>(header.size()) - 3;
  bool have_kind = false;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw DataError("line " + std::to_string(lineno) + ": wrong column count");
    const ObservableKind kind = parse_observable_kind(cells.back());
    if (have_kind && kind != set.kind) throw DataError("line " + std::to_string(lineno) + ": mixed kinds");
    set.kind = kind;
    have_kind = true;
    TrainingRecord r{parse_double(cells[0], lineno), Eigen::VectorXd(set.L), 0.0};
    for (int i = 0; i < set.L; ++i) r.Q(i) = parse_double(cells[1 + i], lineno);
    r.target = parse_double(cells[cells.size() - 2], lineno);
    if (!std::isfinite(r.g) || !r.Q.allFinite() || !std::isfinite(r.target))
      throw DataError("line " + std::to_string(lineno) + ": non-finite value");
    set.records.push_back(std::move(r));
  }
  return set;
}

// --- models ----------------------------------------------------------------

SurrogateModel make_model(const FeatureMap& map, const LassoFit& fit, ObservableKind kind,
                          std::string fp) {
  if (fit.weights.size() != map.feature_count()) throw ParameterError("fit does not match the feature map");
  SurrogateModel m;
  m.map = map;
  for (Eigen::Index j = 0; j < fit.weights.size(); ++j)
    if (fit.weights(j) != 0) m.weights.emplace_back(j, fit.weights(j));
  m.intercept = fit.intercept;
  m.alpha = fit.alpha;
  m.kind = kind;
  m.fingerprint = std::move(fp);
  return m;
}

double predict_site(const SurrogateModel& model, double g, const Eigen::VectorXd& Q) {
  const FeatureMap& map = model.map;
  check_frame(map, Q);
  const int w = map.window();
  const Eigen::Index block = 2 * static_cast<Eigen::Index>(map.R);
  double acc = model.intercept;
  for (const auto& [j, wt] : model.weights) {
    if (map.g_mode == GMode::Appended && j == map.feature_count() - 1) {
      acc += wt * g;
      continue;
    }
    const int c = static_cast<int>(j / block);
    const int r = static_cast<int>(j % block);
    const int row = r < map.R ? r : r - map.R;
    double arg = 0;
    for (int k = 0; k < w; ++k) arg += map.frequencies(row, k) * window_value(map, g, Q, c, k);
    acc += wt * (r < map.R ? std::cos(arg) : std::sin(arg));
  }
  return acc;
}

std::string model_to_json(const SurrogateModel& m) {
  nlohmann::json j;
  j["L"] = m.map.L;
  j["radius"] = m.map.radius;
  j["R"] = m.map.R;
  j["gamma_omega"] = m.map.gamma_omega;
  j["g_mode"] = to_string(m.map.g_mode);
  j["seed"] = m.map.seed;
  std::vector<double> freq;
  for (Eigen::Index r = 0; r < m.map.frequencies.rows(); ++r)
    for (Eigen::Index k = 0; k < m.map.frequencies.cols(); ++k) freq.push_back(m.map.frequencies(r, k));
  j["frequencies"] = freq;
  nlohmann::json w = nlohmann::json::array();
  for (const auto& [idx, v] : m.weights) w.push_back({idx, v});
  j["weights"] = w;
  j["intercept"] = m.intercept;
  j["alpha"] = m.alpha;
  j["nnz"] = m.nnz();
  j["kind"] = to_string(m.kind);
  j["fingerprint"] = m.fingerprint;
  return j.dump(1) + "\n";
}

SurrogateModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    SurrogateModel m;
    m.map.L = j.at("L").get<int>();
    m.map.radius = j.at("radius").get<int>();
    m.map.R = j.at("R").get<int>();
    m.map.gamma_omega = j.at("gamma_omega").get<double>();
    m.map.g_mode = parse_g_mode(j.at("g_mode").get<std::string>());
    m.map.seed = j.at("seed").get<std::uint64_t>();
    const auto freq = j.at("frequencies").get<std::vector<double>>();
    const int w = m.map.window();
    if (m.map.R < 1 || static_cast<long>(freq.size()) != static_cast<long>(m.map.R) * w)
      throw DataError("model frequencies do not match R x window");
    m.map.frequencies.resize(m.map.R, w);
    for (int r = 0; r < m.map.R; ++r)
      for (int k = 0; k < w; ++k) m.map.frequencies(r, k) = freq[static_cast<std::size_t>(r) * w + k];
    for (const auto& e : j.at("weights")) {
      const auto idx = e.at(0).get<Eigen::Index>();
      if (idx < 0 || idx >= m.map.feature_count()) throw DataError("model weight index out of range");
      m.weights.emplace_back(idx, e.at(1).get<double>());
    }
    m.intercept = j.at("intercept").get<double>();
    m.alpha = j.at("alpha").get<double>();
    m.kind = parse_observable_kind(j.at("kind").get<std::string>());
    m.fingerprint = j.value("fingerprint", "");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const SurrogateModel& model) {
  write_file_atomic(path, model_to_json(model));
}

SurrogateModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

// --- training ----------------------------------------------------------------

namespace {

constexpr Eigen::Index kChunkRows = 2048;

std::vector<GramStats> fold_stats(const TrainingSet& data, const FeatureMap& map,
                                  const std::vector<std::vector<Eigen::Index>>& folds) {
  std::vector<GramStats> out;
  for (const auto& rows : folds) {
    GramStats acc;
    for (std::size_t lo = 0; lo < rows.size(); lo += kChunkRows) {
      const std::size_t hi = std::min(rows.size(), lo + static_cast<std::size_t>(kChunkRows));
      TrainingSet chunk;
      chunk.kind = data.kind;
      chunk.L = data.L;
      for (std::size_t i = lo; i < hi; ++i) chunk.records.push_back(data.records[rows[i]]);
      acc += GramStats::from(feature_matrix(chunk, map), target_vector(chunk));
    }
    if (rows.empty()) {
      acc.sum_x = Eigen::VectorXd::Zero(map.feature_count());
      acc.xtx = Eigen::MatrixXd::Zero(map.feature_count(), map.feature_count());
      acc.xty = Eigen::VectorXd::Zero(map.feature_count());
    }
    out.push_back(std::move(acc));
  }
  return out;
}

struct CellFit {
  CVReport report;
  LassoFit fit;
};

// Alpha CV at a fixed map, optionally followed by a full-data refit walked
// down the alpha grid to the chosen value.
CellFit fit_cell(const TrainingSet& data, const FeatureMap& map, std::uint64_t seed, const GridOptions& opts,
                 const LassoOptions& lasso, bool refit) {
  const int points = refit ? opts.alpha_points : opts.search_alpha_points;
  const double ratio = refit ? 1e-6 : opts.search_alpha_ratio;
  const auto n = static_cast<Eigen::Index>(data.size());
  if (n < 1) throw DataError("training set is empty");
  CVOptions cv = opts.cv;
  cv.lasso = lasso;
  CellFit out;
  const bool gram = map.feature_count() <= cv.gram_max_features;

  auto refit_path = [&](LassoProblem& problem) {
    for (double a : out.report.alpha_grid) {
      out.fit = problem.solve(a, lasso);
      if (a <= out.report.chosen_alpha) break;
    }
  };

  if (gram) {
    GramStats total;
    if (n < cv.folds) {
      std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), Eigen::Index{0});
      total = fold_stats(data, map, {all}).front();
      auto problem = LassoProblem::from_gram(total);
      out.report.folds = cv.folds;
      out.report.degenerate = true;
      out.report.alpha_grid = default_alpha_grid(problem.alpha_max(), points, ratio);
      out.report.chosen_index = out.report.alpha_grid.size() - 1;
      out.report.chosen_alpha = out.report.alpha_grid.back();
      if (refit) refit_path(problem);
      return out;
    }
    const auto stats = fold_stats(data, map, cv_folds(n, cv.folds, seed));
    for (const auto& s : stats) total += s;
    const double amax = LassoProblem::from_gram(total).alpha_max();
    out.report = lasso_cv_stats(stats, default_alpha_grid(amax, points, ratio), cv);
    if (refit) {
      auto problem = LassoProblem::from_gram(total);
      refit_path(problem);
    }
    return out;
  }

  // Single-precision design with the folds as contiguous blocks, shared by
  // every fold problem and the refit.
  const auto folds = cv_folds(n, cv.folds, seed);
  TrainingSet ordered;
  ordered.kind = data.kind;
  ordered.L = data.L;
  for (const auto& rows : folds)
    for (Eigen::Index i : rows) ordered.records.push_back(data.records[static_cast<std::size_t>(i)]);
  const auto X = std::make_shared<const Eigen::MatrixXf>(feature_matrix<float>(ordered, map));
  const Eigen::VectorXd y = target_vector(ordered);
  ordered.records.clear();
  auto problem = LassoProblem::from_rows(X, y, {{0, n}});
  out.report = lasso_cv_blocks(X, y, fold_blocks(folds), default_alpha_grid(problem.alpha_max(), points, ratio), cv);
  if (refit) refit_path(problem);
  return out;
}

}  // namespace

GridSearchResult train_fixed(const TrainingSet& data, int R, double gamma_omega, std::uint64_t seed,
                             const GridOptions& opts) {
  const FeatureMap map = make_feature_map(data.L, opts.radius, R, gamma_omega, opts.g_mode, seed);
  CellFit cf = fit_cell(data, map, seed, opts, opts.cv.lasso, true);
  if (cf.report.degenerate)
    std::cerr << "warning: " << data.size() << " rows < " << opts.cv.folds
              << " folds; CV skipped, smallest alpha used\n";
  if (!cf.fit.converged)
    std::cerr << "warning: LASSO stopped after " << cf.fit.sweeps << " sweeps, max update "
              << cf.fit.max_update << '\n';
  GridSearchResult res;
  res.R = R;
  res.gamma_omega = gamma_omega;
  res.alpha = cf.report.chosen_alpha;
  cf.report.R = R;
  cf.report.gamma_omega = gamma_omega;
  res.cells.push_back({R, gamma_omega, res.alpha, cf.report.chosen_mse});
  res.report = cf.report;
  res.model = make_model(map, cf.fit, data.kind, fingerprint(data));
  return res;
}

GridSearchResult grid_search(const TrainingSet& data, const std::vector<int>& R_grid,
                             const std::vector<double>& gamma_grid, std::uint64_t seed,
                             const GridOptions& opts) {
  if (R_grid.empty()) throw ParameterError("R grid must be nonempty");
  if (gamma_grid.empty()) throw ParameterError("gamma_omega grid must be nonempty");
  const TrainingSet search = opts.search_rows > 0 ? subsample(data, opts.search_rows, seed) : data;
  LassoOptions quick = opts.cv.lasso;
  quick.max_sweeps = std::min(quick.max_sweeps, opts.search_max_sweeps);
  quick.tol = std::max(quick.tol, opts.search_tol);

  std::vector<GridCell> cells;
  std::size_t best = 0;
  for (int R : R_grid) {
    for (double gw : gamma_grid) {
      const FeatureMap map = make_feature_map(data.L, opts.radius, R, gw, opts.g_mode, seed);
      const CellFit cf = fit_cell(search, map, seed, opts, quick, false);
      cells.push_back({R, gw, cf.report.chosen_alpha, cf.report.chosen_mse});
      if (cells.back().cv_mse < cells[best].cv_mse) best = cells.size() - 1;
    }
  }
  GridSearchResult res = train_fixed(data, cells[best].R, cells[best].gamma_omega, seed, opts);
  res.cells = std::move(cells);
  return res;
}

}  // namespace peal
