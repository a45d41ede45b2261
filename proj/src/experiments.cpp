#include "peal/experiments.hpp"

#include "peal/cdw.hpp"
#include "peal/qss.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace peal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.get_string("run", "out", "out")) / name).string();
}

std::uint64_t run_seed(const RunConfig& cfg) { return cfg.get_uint("run", "seed", 1); }

long run_steps(const RunConfig& cfg) {
  const long steps = cfg.get_int("run", "steps", 10000);
  if (steps < 1) throw ParameterError("run.steps must be >= 1");
  return steps;
}

int run_stride(const RunConfig& cfg) {
  const long stride = cfg.get_int("run", "stride", 10);
  if (stride < 1) throw ParameterError("run.stride must be >= 1");
  return static_cast<int>(stride);
}

int positive_int(const RunConfig& cfg, const std::string& section, const std::string& key, long fallback) {
  const long v = cfg.get_int(section, key, fallback);
  if (v < 1) throw ParameterError(section + "." + key + " must be >= 1");
  return static_cast<int>(v);
}

std::vector<int> to_ints(const std::vector<long>& v) { return {v.begin(), v.end()}; }

std::string seed_tag(std::uint64_t seed) {
  return "seed=" + std::to_string(seed) + " rng=" + std::string(kRngAlgorithm);
}

GridOptions grid_options(const RunConfig& cfg, const std::string& section) {
  GridOptions o;
  o.radius = positive_int(cfg, section, "radius", o.radius);
  o.g_mode = parse_g_mode(cfg.get_string(section, "g_mode", to_string(o.g_mode)));
  o.cv.folds = positive_int(cfg, section, "folds", o.cv.folds);
  if (o.cv.folds < 2) throw ParameterError(section + ".folds must be >= 2");
  o.cv.lasso.tol = cfg.get_double(section, "tol", o.cv.lasso.tol);
  if (!(o.cv.lasso.tol > 0)) throw ParameterError(section + ".tol must be > 0");
  o.cv.lasso.max_sweeps = positive_int(cfg, section, "max_sweeps", o.cv.lasso.max_sweeps);
  o.search_rows = static_cast<std::size_t>(cfg.get_uint(section, "search_rows", 2048));
  o.alpha_points = positive_int(cfg, section, "alpha_points", o.alpha_points);
  o.search_alpha_points = positive_int(cfg, section, "search_alpha_points", o.search_alpha_points);
  o.search_alpha_ratio = cfg.get_double(section, "search_alpha_ratio", o.search_alpha_ratio);
  if (!(o.search_alpha_ratio > 0 && o.search_alpha_ratio < 1))
    throw ParameterError(section + ".search_alpha_ratio must be in (0, 1)");
  o.search_max_sweeps = positive_int(cfg, section, "search_max_sweeps", o.search_max_sweeps);
  o.search_tol = cfg.get_double(section, "search_tol", o.search_tol);
  if (!(o.search_tol > 0)) throw ParameterError(section + ".search_tol must be > 0");
  return o;
}

std::vector<Trajectory> require_set(const std::string& dir, const std::string& set, const HolsteinParams& base) {
  auto trajs = load_set(dir, set, base);
  if (trajs.empty())
    throw DataError("no '" + set + "' trajectories in " + dir + "; run `simulate` with simulate.set = " + set);
  return trajs;
}

// Optional model path: empty or "exact" selects the oracle.
std::optional<SurrogateModel> optional_model(const std::string& path) {
  if (path.empty() || path == "exact") return std::nullopt;
  return load_model(path);
}

PealConfig peal_config(const RunConfig& cfg, const std::string& section, const HolsteinParams& params) {
  PealConfig pc;
  pc.density = optional_model(cfg.get_string("run", "model", "exact"));
  pc.hop = optional_model(cfg.get_string(section, "hop_model", ""));
  pc.nnn = optional_model(cfg.get_string(section, "nnn_model", ""));
  pc.u1_correction = cfg.get_bool(section, "u1", true);
  pc.clamp = cfg.get_bool(section, "clamp", false);
  pc.filling = params.electrons();
  pc.validate(params.L);
  return pc;
}

struct Start {
  HolsteinParams params;
  State state;
  std::optional<Trajectory> exact;  // loaded reference, when one was given
  std::string label;
};

// Initial condition from an exact trajectory file, or a fresh draw on the
// path stream (section.set, g, section.index).
Start resolve_start(const RunConfig& cfg, const std::string& section) {
  Start s;
  const std::string file = cfg.get_string(section, "initial", "");
  if (!file.empty()) {
    Trajectory tr = load_trajectory(file, cfg.holstein());
    if (tr.samples.empty()) throw DataError(file + " has no samples");
    s.params = tr.params;
    if (cfg.has("model", "g")) s.params.g = cfg.get_double("model", "g", s.params.g);
    s.state = tr.samples.front().state;
    s.label = file;
    if (s.params.g == tr.params.g) s.exact = std::move(tr);
    return s;
  }
  s.params = cfg.holstein();
  PathSpec path{cfg.get_string(section, "set", "test"), s.params.g,
                static_cast<int>(cfg.get_int(section, "index", 0))};
  if (path.index < 0) throw ParameterError(section + ".index must be >= 0");
  s.state = path_initial_state(s.params, path, run_seed(cfg), cfg.get_double(section, "q_std", 0.2));
  s.label = path.set + "/" + fixed4(path.g) + "/" + std::to_string(path.index);
  return s;
}

std::string peal_metadata(const HolsteinParams& p, const PealConfig& pc, const std::string& start,
                          std::uint64_t seed) {
  std::string m = params_metadata(p) + " " + seed_tag(seed) + " start=" + start;
  m += " density=" + (pc.density ? pc.density->fingerprint : std::string("exact"));
  m += " u1=" + std::string(pc.u1_correction ? "1" : "0") + " clamp=" + (pc.clamp ? "1" : "0");
  return m;
}

}  // namespace

// --- shared pipeline pieces ------------------------------------------------

std::uint64_t path_seed(std::uint64_t seed, const PathSpec& path) {
  return stream_seed(seed, "path/" + path.set + "/" + fixed4(path.g), static_cast<std::uint64_t>(path.index));
}

std::string path_filename(const PathSpec& path) {
  char idx[32];
  std::snprintf(idx, sizeof idx, "%03d", path.index);
  return path.set + "_g" + fixed4(path.g) + "_p" + idx + ".csv";
}

State path_initial_state(const HolsteinParams& base, const PathSpec& path, std::uint64_t seed, double q_std) {
  if (!(q_std >= 0)) throw ParameterError("q_std must be >= 0");
  HolsteinParams p = base;
  p.g = path.g;
  return sample_initial_state(p, q_std, path_seed(seed, path));
}

Trajectory simulate_path(const HolsteinParams& base, const PathSpec& path, std::uint64_t seed,
                         const SimOptions& opts) {
  HolsteinParams p = base;
  p.g = path.g;
  p.validate();
  EvolveOptions eo;
  eo.record_stride = opts.stride;
  Trajectory tr = evolve(path_initial_state(p, path, seed, opts.q_std), p, opts.steps, ExactField(p.electrons()), eo);
  tr.metadata = params_metadata(p) + " " + seed_tag(seed) + " set=" + path.set +
                " index=" + std::to_string(path.index) + " q_std=" + format_double(opts.q_std) +
                " stride=" + std::to_string(opts.stride);
  return tr;
}

std::vector<Trajectory> simulate_set(const HolsteinParams& base, const std::string& set,
                                     const std::vector<double>& g_list, int paths, std::uint64_t seed,
                                     const SimOptions& opts) {
  std::vector<Trajectory> out;
  for (double g : g_list)
    for (int i = 0; i < paths; ++i) out.push_back(simulate_path(base, {set, g, i}, seed, opts));
  return out;
}

std::vector<Trajectory> load_set(const std::string& dir, const std::string& set, const HolsteinParams& base) {
  std::vector<std::string> names;
  if (fs::is_directory(dir)) {
    const std::string prefix = set + "_g";
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && name.rfind(prefix, 0) == 0 && e.path().extension() == ".csv")
        names.push_back(name);
    }
  }
  std::sort(names.begin(), names.end());
  std::vector<Trajectory> out;
  for (const auto& n : names) out.push_back(load_trajectory((fs::path(dir) / n).string(), base));
  return out;
}

namespace {

template <typename Visit>
void visit_static(const SurrogateModel& model, const std::vector<Trajectory>& paths, int record_every,
                  Visit&& visit) {
  if (record_every < 1) throw ParameterError("record_every must be >= 1");
  for (const Trajectory& tr : paths) {
    for (std::size_t r = 0; r < tr.samples.size(); r += static_cast<std::size_t>(record_every)) {
      const TrajectorySample& s = tr.samples[r];
      const Eigen::VectorXd pred =
          u1_correct(predict_density_field(model, tr.params.g, s.state.Q), tr.params.electrons());
      visit(tr, r, s.obs.n, pred);
    }
  }
}

}  // namespace

double static_test_rmse(const SurrogateModel& model, const std::vector<Trajectory>& paths, int record_every) {
  double sse = 0;
  double count = 0;
  visit_static(model, paths, record_every,
               [&](const Trajectory&, std::size_t, const Eigen::VectorXd& exact, const Eigen::VectorXd& pred) {
                 sse += (pred - exact).squaredNorm();
                 count += static_cast<double>(exact.size());
               });
  if (count == 0) throw DataError("test set is empty");
  return std::sqrt(sse / count);
}

ScalingResult scaling_experiment(const TrainingSet& data, const std::vector<Trajectory>& test_sl,
                                 const std::vector<Trajectory>& test_tl, const std::vector<long>& counts, int R,
                                 double gamma_omega, std::uint64_t seed, const GridOptions& opts,
                                 int record_every) {
  if (counts.empty()) throw ParameterError("sample counts must not be empty");
  if (test_sl.empty() || test_tl.empty()) throw DataError("scaling needs nonempty standard and transfer test sets");
  ScalingResult res;
  SurrogateModel last;
  for (long c : counts) {
    if (c < 1) throw ParameterError("sample counts must be >= 1");
    const auto rows = static_cast<std::size_t>(c) * static_cast<std::size_t>(data.L);
    if (rows > data.size())
      throw DataError("sample count " + std::to_string(c) + " needs " + std::to_string(rows) + " rows, dataset has " +
                      std::to_string(data.size()));
    const GridSearchResult fit = train_fixed(subsample(data, rows, seed), R, gamma_omega, seed, opts);
    ScalingRow row;
    row.samples = c;
    row.rows = rows;
    row.alpha = fit.alpha;
    row.nnz = fit.model.nnz();
    row.rmse_sl = static_test_rmse(fit.model, test_sl, record_every);
    row.rmse_tl = static_test_rmse(fit.model, test_tl, record_every);
    res.rows.push_back(row);
    last = fit.model;
  }
  const int scatter_every = record_every * 10;
  auto scatter = [&](const std::string& set, const std::vector<Trajectory>& paths) {
    visit_static(last, paths, scatter_every,
                 [&](const Trajectory& tr, std::size_t, const Eigen::VectorXd& exact, const Eigen::VectorXd& pred) {
                   for (Eigen::Index i = 0; i < exact.size(); ++i)
                     res.scatter.push_back({set, tr.params.g, exact(i), pred(i)});
                 });
  };
  scatter("sl", test_sl);
  scatter("tl", test_tl);
  return res;
}

bool nonincreasing_up_to_one_inversion(const std::vector<double>& v, double rel_tol) {
  int inversions = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] * (1 + rel_tol)) ++inversions;
  return inversions <= 1;
}

DistanceProfile distance_profile(const EnsembleStats& stats) {
  const Eigen::Index L = stats.qq_mean.rows();
  DistanceProfile out;
  out.mean.assign(static_cast<std::size_t>(L / 2 + 1), 0.0);
  out.var.assign(out.mean.size(), 0.0);
  std::vector<double> count(out.mean.size(), 0.0);
  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index j = 0; j < L; ++j) {
      const Eigen::Index d = std::min((i - j + L) % L, (j - i + L) % L);
      const auto k = static_cast<std::size_t>(d);
      out.mean[k] += stats.qq_mean(i, j);
      out.var[k] += stats.qq_var(i, j);
      count[k] += 1;
    }
  }
  for (std::size_t k = 0; k < count.size(); ++k) {
    out.mean[k] /= count[k];
    out.var[k] /= count[k];
  }
  return out;
}

std::string critical_coupling_table(const std::vector<int>& sizes, double k_spring) {
  std::ostringstream os;
  os << std::setw(6) << "L" << std::setw(10) << "slope" << std::setw(10) << "g_crit" << '\n';
  for (int L : sizes) {
    os << std::setw(6) << L << std::setw(10) << fixed4(slope_at_zero<double>(L)) << std::setw(10)
       << fixed4(g_crit<double>(k_spring, L)) << '\n';
  }
  return os.str();
}

// --- commands ------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const HolsteinParams base = cfg.holstein();
  const std::string set = cfg.get_string("simulate", "set", "train");
  const auto g_list = cfg.get_doubles("simulate", "g_list", {base.g});
  const int paths = positive_int(cfg, "simulate", "paths", 1);
  SimOptions so;
  so.steps = run_steps(cfg);
  so.stride = run_stride(cfg);
  so.q_std = cfg.get_double("simulate", "q_std", so.q_std);
  const std::uint64_t seed = run_seed(cfg);
  int written = 0;
  for (double g : g_list) {
    HolsteinParams p = base;
    p.g = g;
    try {
      p.validate();
    } catch (const ParameterError& e) {
      throw ParameterError(std::string("simulate.g_list: ") + e.what());
    }
    for (int i = 0; i < paths; ++i) {
      const PathSpec path{set, g, i};
      save_trajectory(out_path(cfg, path_filename(path)), simulate_path(base, path, seed, so));
      ++written;
    }
  }
  log << "simulate: wrote " << written << " trajectories to " << cfg.get_string("run", "out", "out") << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  const HolsteinParams base = cfg.holstein();
  const std::uint64_t seed = run_seed(cfg);
  const std::string dir = cfg.get_string("train", "data", cfg.get_string("run", "out", "out"));
  const std::string set = cfg.get_string("train", "set", "train");
  const ObservableKind kind = parse_observable_kind(cfg.get_string("train", "kind", "density"));
  const int pairs = positive_int(cfg, "train", "pairs_per_path", 500);
  const long samples = cfg.get_int("train", "samples", 1024);
  if (samples < 0) throw ParameterError("train.samples must be >= 0");
  const auto R_grid = to_ints(cfg.get_ints("train", "R_grid", {kRGrid.begin(), kRGrid.end()}));
  const auto gamma_grid = cfg.get_doubles("train", "gamma_grid", kGammaGrid);
  for (int R : R_grid)
    if (R < 1) throw ParameterError("train.R_grid entries must be >= 1");
  for (double gw : gamma_grid)
    if (!(gw > 0)) throw ParameterError("train.gamma_grid entries must be > 0");
  const GridOptions opts = grid_options(cfg, "train");

  const auto trajs = require_set(dir, set, base);
  TrainingSet data = build_dataset(trajs, pairs, seed, kind);
  const std::size_t full = data.size();
  if (samples > 0) {
    const auto rows = static_cast<std::size_t>(samples) * static_cast<std::size_t>(data.L);
    if (rows > data.size())
      throw DataError("train.samples = " + std::to_string(samples) + " needs " + std::to_string(rows) +
                      " rows; the dataset has " + std::to_string(data.size()));
    data = subsample(data, rows, seed);
  }
  log << "train: " << trajs.size() << " paths, " << full << " pairs, " << data.size() << " used, fingerprint "
      << fingerprint(data) << '\n';

  const GridSearchResult res = R_grid.size() * gamma_grid.size() == 1
                                   ? train_fixed(data, R_grid.front(), gamma_grid.front(), seed, opts)
                                   : grid_search(data, R_grid, gamma_grid, seed, opts);
  const std::string stem = cfg.get_string("train", "name", "model_" + to_string(kind));
  save_model(out_path(cfg, stem + ".json"), res.model);
  std::ostringstream cv;
  write_cv_csv(cv, res.report);
  write_file_atomic(out_path(cfg, stem + "_cv.csv"), cv.str());
  std::ostringstream grid;
  grid << "# " << seed_tag(seed) << " rows=" << data.size() << " fingerprint=" << fingerprint(data) << '\n';
  grid << "R,gamma_omega,alpha,cv_mse\n";
  for (const auto& c : res.cells)
    grid << c.R << ',' << format_double(c.gamma_omega) << ',' << format_double(c.alpha) << ','
         << format_double(c.cv_mse) << '\n';
  write_file_atomic(out_path(cfg, stem + "_grid.csv"), grid.str());
  log << "train: R=" << res.R << " gamma_omega=" << res.gamma_omega << " alpha=" << res.alpha
      << " nnz=" << res.model.nnz() << " cv_mse=" << res.report.chosen_mse << '\n';
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& log) {
  const Start start = resolve_start(cfg, "predict");
  const PealConfig pc = peal_config(cfg, "predict", start.params);
  EvolveOptions eo;
  eo.record_stride = run_stride(cfg);
  Trajectory tr = peal_evolve(start.state, start.params, run_steps(cfg), pc, eo);
  tr.metadata = peal_metadata(start.params, pc, start.label, run_seed(cfg));
  const std::string name = cfg.get_string("predict", "output", "peal.csv");
  save_trajectory(out_path(cfg, name), tr);
  log << "predict: " << tr.samples.size() << " records, final cdw " << tr.samples.back().obs.cdw << '\n';
  return 0;
}

int cmd_compare(const RunConfig& cfg, std::ostream& log) {
  Start start = resolve_start(cfg, "compare");
  const PealConfig pc = peal_config(cfg, "compare", start.params);
  const long steps = run_steps(cfg);
  const int stride = run_stride(cfg);
  Trajectory exact;
  if (start.exact) {
    exact = std::move(*start.exact);
  } else {
    EvolveOptions eo;
    eo.record_stride = stride;
    exact = evolve(start.state, start.params, steps, ExactField(start.params.electrons()), eo);
    exact.metadata = params_metadata(start.params) + " " + seed_tag(run_seed(cfg)) + " start=" + start.label;
  }
  const long exact_steps = std::lround(exact.samples.back().state.t / start.params.dt);
  EvolveOptions eo;
  eo.record_stride = stride;
  Trajectory peal = peal_evolve(start.state, start.params, start.exact ? exact_steps : steps, pc, eo);
  peal.metadata = peal_metadata(start.params, pc, start.label, run_seed(cfg));
  const ComparisonReport rep = compare(exact, peal);

  const std::string stem = cfg.get_string("compare", "name", "compare");
  json j = json::parse(comparison_json(rep));
  j["seed"] = run_seed(cfg);
  j["start"] = start.label;
  j["g"] = start.params.g;
  j["density_model"] = pc.density ? pc.density->fingerprint : "exact";
  write_file_atomic(out_path(cfg, stem + ".json"), j.dump(2) + "\n");
  std::ostringstream csv;
  csv << "# " << peal.metadata << '\n';
  write_comparison_csv(csv, rep);
  write_file_atomic(out_path(cfg, stem + ".csv"), csv.str());
  if (!start.exact) save_trajectory(out_path(cfg, stem + "_exact.csv"), exact);
  save_trajectory(out_path(cfg, stem + "_peal.csv"), peal);
  log << "compare: density rmse " << rep.density_rmse << ", max |cdw dev|/L " << rep.max_cdw_dev / rep.L << '\n';
  return 0;
}

int cmd_scaling(const RunConfig& cfg, std::ostream& log) {
  const HolsteinParams base = cfg.holstein();
  const std::uint64_t seed = run_seed(cfg);
  const std::string dir = cfg.get_string("scaling", "data", cfg.get_string("run", "out", "out"));
  const auto train = require_set(dir, cfg.get_string("scaling", "train_set", "train"), base);
  const auto test_sl = require_set(dir, cfg.get_string("scaling", "sl_set", "test_sl"), base);
  const auto test_tl = require_set(dir, cfg.get_string("scaling", "tl_set", "test_tl"), base);
  const int pairs = positive_int(cfg, "scaling", "pairs_per_path", 500);
  const auto counts = cfg.get_ints("scaling", "counts", {1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024});
  const int record_every = positive_int(cfg, "scaling", "record_every", 10);

  int R = 20;
  double gamma_omega = 6;
  const std::string model = cfg.get_string("run", "model", "");
  if (!model.empty() && model != "exact") {
    const SurrogateModel m = load_model(model);
    R = m.map.R;
    gamma_omega = m.map.gamma_omega;
  }
  R = positive_int(cfg, "scaling", "R", R);
  gamma_omega = cfg.get_double("scaling", "gamma_omega", gamma_omega);
  if (!(gamma_omega > 0)) throw ParameterError("scaling.gamma_omega must be > 0");
  GridOptions opts = grid_options(cfg, "scaling");

  const TrainingSet data = build_dataset(train, pairs, seed, ObservableKind::Density);
  const ScalingResult res =
      scaling_experiment(data, test_sl, test_tl, counts, R, gamma_omega, seed, opts, record_every);

  std::ostringstream csv;
  csv << "# " << seed_tag(seed) << " R=" << R << " gamma_omega=" << format_double(gamma_omega)
      << " fingerprint=" << fingerprint(data) << '\n';
  csv << "samples,rows,alpha,nnz,rmse_sl,rmse_tl\n";
  std::vector<double> sl, tl;
  for (const auto& r : res.rows) {
    csv << r.samples << ',' << r.rows << ',' << format_double(r.alpha) << ',' << r.nnz << ','
        << format_double(r.rmse_sl) << ',' << format_double(r.rmse_tl) << '\n';
    sl.push_back(r.rmse_sl);
    tl.push_back(r.rmse_tl);
    log << "scaling: N=" << r.samples << " rmse_sl=" << r.rmse_sl << " rmse_tl=" << r.rmse_tl << '\n';
  }
  write_file_atomic(out_path(cfg, "scaling.csv"), csv.str());
  std::ostringstream sc;
  sc << "# " << seed_tag(seed) << " samples=" << res.rows.back().samples << '\n' << "set,g,n_exact,n_peal\n";
  for (const auto& p : res.scatter)
    sc << p.set << ',' << format_double(p.g) << ',' << format_double(p.exact) << ',' << format_double(p.predicted)
       << '\n';
  write_file_atomic(out_path(cfg, "scatter.csv"), sc.str());
  log << "scaling: monotone up to one inversion: sl " << nonincreasing_up_to_one_inversion(sl) << ", tl "
      << nonincreasing_up_to_one_inversion(tl) << '\n';
  return 0;
}

int cmd_ensemble(const RunConfig& cfg, std::ostream& log) {
  const HolsteinParams params = cfg.holstein();
  const std::uint64_t seed = run_seed(cfg);
  const int paths = positive_int(cfg, "ensemble", "paths", 16);
  if (paths < 2) throw ParameterError("ensemble.paths must be >= 2");
  const double target = cfg.get_double("ensemble", "target_time", 100);
  if (!(target >= 0)) throw ParameterError("ensemble.target_time must be >= 0");
  const double q_std = cfg.get_double("ensemble", "q_std", 0.2);
  const std::string set = cfg.get_string("ensemble", "set", "ensemble");
  const long steps = cfg.has("run", "steps") ? run_steps(cfg) : std::lround(std::ceil(target / params.dt));
  EvolveOptions eo;
  eo.record_stride = run_stride(cfg);

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < paths; ++i) seeds.push_back(path_seed(seed, {set, params.g, i}));

  const std::string meta = params_metadata(params) + " " + seed_tag(seed) + " set=" + set +
                           " q_std=" + format_double(q_std) + " target_time=" + format_double(target);
  std::vector<std::pair<std::string, EnsembleStats>> runs;
  runs.emplace_back("exact", ensemble_run(seeds, params, q_std, steps, ExactField(params.electrons()), target, eo));
  const PealConfig pc = peal_config(cfg, "ensemble", params);
  if (pc.density) runs.emplace_back("peal", ensemble_run(seeds, params, q_std, steps, PealField(pc, params.L), target, eo));

  std::ostringstream prof;
  prof << "# " << meta << '\n' << "distance";
  for (const auto& [name, st] : runs) {
    std::ostringstream os;
    write_ensemble_csv(os, st, meta + " mode=" + name);
    write_file_atomic(out_path(cfg, "ensemble_" + name + ".csv"), os.str());
    prof << ',' << name << "_mean," << name << "_var";
    log << "ensemble " << name << ": " << st.count << " paths, " << st.failed.size() << " failed\n";
  }
  prof << '\n';
  std::vector<DistanceProfile> profiles;
  for (const auto& r : runs) profiles.push_back(distance_profile(r.second));
  for (std::size_t d = 0; d < profiles.front().mean.size(); ++d) {
    prof << d;
    for (const auto& p : profiles) prof << ',' << format_double(p.mean[d]) << ',' << format_double(p.var[d]);
    prof << '\n';
  }
  write_file_atomic(out_path(cfg, "ensemble_profile.csv"), prof.str());
  return 0;
}

int cmd_analyze_cdw(const RunConfig& cfg, std::ostream& log) {
  const HolsteinParams params = cfg.holstein();
  const auto sizes = to_ints(cfg.get_ints("cdw", "sizes", {2, 6, 10, 22, 50, 102}));
  const double gq_max = cfg.get_double("cdw", "gq_max", 10);
  const int points = positive_int(cfg, "cdw", "points", 201);
  if (!(gq_max > 0)) throw ParameterError("cdw.gq_max must be > 0");
  if (points < 2) throw ParameterError("cdw.points must be >= 2");

  const std::string table = critical_coupling_table(sizes, params.k);
  write_file_atomic(out_path(cfg, "critical_coupling.txt"), table);
  log << table;

  std::ostringstream curve;
  curve << "# L=" << params.L << '\n' << "gQ,n_finite,n_infinite\n";
  for (int i = 0; i < points; ++i) {
    const double x = gq_max * i / (points - 1);
    curve << format_double(x) << ',' << format_double(cdw_finite(x, params.L)) << ','
          << format_double(cdw_infinite(x)) << '\n';
  }
  write_file_atomic(out_path(cfg, "cdw_curve.csv"), curve.str());

  auto stability = [&](std::optional<int> L) {
    const StabilityReport r = stability_check(params.g, params.k, L);
    const char* cls = r.size_class == SizeClass::FourN ? "4N"
                      : r.size_class == SizeClass::FourNPlusTwo ? "4N+2"
                                                                : "infinite";
    return json{{"L", L ? json(*L) : json("infinite")},
                {"size_class", cls},
                {"slope0", finite_or_null(r.slope0)},
                {"g_crit", r.g_crit},
                {"stable_cdw", r.stable_cdw},
                {"concavity_ok", r.concavity_ok},
                {"min_secant_margin", r.min_secant_margin}};
  };
  json j{{"g", params.g}, {"k", params.k}, {"finite", stability(params.L)}, {"infinite", stability(std::nullopt)}};
  write_file_atomic(out_path(cfg, "stability.json"), j.dump(2) + "\n");
  log << "analyze-cdw: L=" << params.L << " stable_cdw=" << j["finite"]["stable_cdw"] << '\n';
  return 0;
}

int cmd_check_bounds(const RunConfig& cfg, std::ostream& log) {
  const std::uint64_t seed = run_seed(cfg);
  Trajectory tr;
  const std::string file = cfg.get_string("bounds", "trajectory", "");
  if (!file.empty()) {
    tr = load_trajectory(file, cfg.holstein());
  } else {
    SimOptions so;
    so.steps = cfg.has("run", "steps") ? run_steps(cfg) : 10000;
    so.stride = run_stride(cfg);
    so.q_std = cfg.get_double("bounds", "q_std", so.q_std);
    const HolsteinParams p = cfg.holstein();
    tr = simulate_path(p, {cfg.get_string("bounds", "set", "bounds"), p.g, 0}, seed, so);
  }
  const HolsteinParams& p = tr.params;
  StiffnessOptions so;
  so.h = cfg.get_double("bounds", "h", so.h);
  so.t_from = cfg.get_double("bounds", "t_from", 0);
  so.t_to = cfg.get_double("bounds", "t_to", 100);
  so.offdiag = cfg.get_bool("bounds", "offdiag", false);
  const int site = static_cast<int>(cfg.get_int("bounds", "site", 0));
  const StiffnessSeries ks = measure_stiffness(tr, site, so);
  std::ostringstream csv;
  csv << "# " << params_metadata(p) << " site=" << site << '\n';
  write_stiffness_csv(csv, ks);
  write_file_atomic(out_path(cfg, "stiffness.csv"), csv.str());

  const SpringCondition sc = check_spring_condition(ks.K_min, ks.K_max, p.M, p.gamma);
  json sj = json::parse(spring_json(sc));
  sj["max_offdiag"] = finite_or_null(ks.max_offdiag);
  write_file_atomic(out_path(cfg, "spring.json"), sj.dump(2) + "\n");

  const double force = cfg.get_double("bounds", "force_bound", p.g);
  const double horizon = cfg.get_double("bounds", "horizon", 2000);
  const int dim = positive_int(cfg, "bounds", "dim", 1);
  WorstCaseSpec spec = diagonal_spec(dim, ks.K_min, ks.K_max, p.M, p.gamma, force, horizon, 1);
  spec.dt = cfg.get_double("bounds", "dt", 0.01 / spec.omega_max());
  spec.validate();
  write_file_atomic(out_path(cfg, "spec.json"), spec_to_json(spec) + "\n");
  const auto eps = cfg.get_doubles("bounds", "epsilons", {1e-6, 4e-6, 1.6e-5});
  const BoundReport br = relaxation_simulate(spec, eps);
  write_file_atomic(out_path(cfg, "relaxation.json"), bound_report_json(br) + "\n");
  log << "check-bounds: K in [" << ks.K_min << ", " << ks.K_max << "], lhs " << sc.lhs << " rhs " << sc.rhs
      << " holds " << sc.holds << "; relaxation slope " << br.slope << " bounded " << br.error_bounded << '\n';
  return 0;
}

int cmd_relax(const RunConfig& cfg, std::ostream& log) {
  const std::string path = cfg.get_string("relax", "spec", "");
  if (path.empty()) throw ParameterError("relax.spec: a WorstCaseSpec JSON path is required");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open spec file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const WorstCaseSpec spec = spec_from_json(ss.str());
  const auto eps = cfg.get_doubles("relax", "epsilons", {1e-6, 4e-6, 1.6e-5});
  const BoundReport br = relaxation_simulate(spec, eps);
  write_file_atomic(out_path(cfg, "relaxation.json"), bound_report_json(br) + "\n");
  log << "relax: slope " << br.slope << " blowup " << br.blowup << " bounded " << br.error_bounded << '\n';
  return 0;
}

}  // namespace peal
