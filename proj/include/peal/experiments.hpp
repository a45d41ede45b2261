#pragma once

#include "peal/bounds.hpp"
#include "peal/config.hpp"
#include "peal/dynamics.hpp"
#include "peal/learning.hpp"
#include "peal/peal.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace peal {

// --- shared pipeline pieces ------------------------------------------------

inline const std::vector<double> kTrainG = {1.3, 1.32, 1.34, 1.36, 1.38, 1.4};
inline const std::vector<double> kTransferG = {1.31, 1.33, 1.35, 1.37, 1.39};
inline const std::vector<int> kRGrid = {5, 10, 20, 40, 80, 160};
inline const std::vector<double> kGammaGrid = {0.3, 0.6, 1, 2, 3, 6, 10, 20};

struct PathSpec {
  std::string set = "train";  // names the seed stream and the file prefix
  double g = 1.4;
  int index = 0;
};

std::uint64_t path_seed(std::uint64_t seed, const PathSpec& path);
std::string path_filename(const PathSpec& path);

struct SimOptions {
  long steps = 10000;
  int stride = 10;
  double q_std = 0.2;
};

State path_initial_state(const HolsteinParams& base, const PathSpec& path, std::uint64_t seed, double q_std);
Trajectory simulate_path(const HolsteinParams& base, const PathSpec& path, std::uint64_t seed,
                         const SimOptions& opts);
std::vector<Trajectory> simulate_set(const HolsteinParams& base, const std::string& set,
                                     const std::vector<double>& g_list, int paths, std::uint64_t seed,
                                     const SimOptions& opts);
// Files `<set>_g*.csv` in `dir`, in name order.
std::vector<Trajectory> load_set(const std::string& dir, const std::string& set, const HolsteinParams& base);

// RMSE of the U(1)-corrected surrogate density field against the recorded
// exact densities, over every `record_every`-th record of each path.
double static_test_rmse(const SurrogateModel& model, const std::vector<Trajectory>& paths, int record_every);

struct ScalingRow {
  long samples = 0;  // one sample = L data pairs
  std::size_t rows = 0;
  double alpha = 0;
  long nnz = 0;
  double rmse_sl = 0;
  double rmse_tl = 0;
};

struct ScatterPoint {
  std::string set;
  double g;
  double exact;
  double predicted;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  std::vector<ScatterPoint> scatter;  // at the largest sample count
};

// Nested subsamples (one shuffle, growing prefixes) of `data` trained at a
// fixed (R, gamma_omega) with alpha chosen by cross-validation.
ScalingResult scaling_experiment(const TrainingSet& data, const std::vector<Trajectory>& test_sl,
                                 const std::vector<Trajectory>& test_tl, const std::vector<long>& counts, int R,
                                 double gamma_omega, std::uint64_t seed, const GridOptions& opts,
                                 int record_every);

// True when the sequence has at most one strict increase between neighbours.
bool nonincreasing_up_to_one_inversion(const std::vector<double>& v, double rel_tol = 0);

// Mean and variance of Q_i Q_j grouped by periodic distance |i - j|.
struct DistanceProfile {
  std::vector<double> mean, var;
};
DistanceProfile distance_profile(const EnsembleStats& stats);

std::string critical_coupling_table(const std::vector<int>& sizes, double k_spring);

// --- commands ------------------------------------------------------------------
// Each reads its parameters from the config, writes outputs below run.out,
// and logs a short summary. Errors surface as exceptions.

int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_predict(const RunConfig& cfg, std::ostream& log);
int cmd_compare(const RunConfig& cfg, std::ostream& log);
int cmd_scaling(const RunConfig& cfg, std::ostream& log);
int cmd_ensemble(const RunConfig& cfg, std::ostream& log);
int cmd_analyze_cdw(const RunConfig& cfg, std::ostream& log);
int cmd_check_bounds(const RunConfig& cfg, std::ostream& log);
int cmd_relax(const RunConfig& cfg, std::ostream& log);

}  // namespace peal
