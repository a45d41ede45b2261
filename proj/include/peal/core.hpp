#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace peal {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Invalid user-facing parameter. The message names the offending field.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Eigensolver failure, blowup, or other floating-point breakdown.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or non-finite input data (datasets, files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HolsteinParams {
  int L = 50;
  double t_nn = 1.0;
  double g = 1.4;
  double k = 1.0;
  double M = 1.0;
  double gamma = 0.1;
  double dt = 0.01;
  int filling = 0;  // 0 selects half filling

  int electrons() const { return filling > 0 ? filling : L / 2; }

  // Throws ParameterError naming the first violated field.
  void validate() const;
};

template <typename Scalar>
struct ClassicalState {
  Scalar t = 0;
  VectorX<Scalar> Q;
  VectorX<Scalar> P;

  Eigen::Index size() const { return Q.size(); }
  bool finite() const { return Q.allFinite() && P.allFinite(); }
};

using State = ClassicalState<double>;

// Electron observables at one configuration. Bond entries are NaN when the
// provider cannot supply them (surrogate runs without bond models), and
// gs_energy is NaN for surrogate runs.
struct ObservableRecord {
  Eigen::VectorXd n;
  double cdw = 0;
  double hop = 0;
  double nnn = 0;
  double gs_energy = 0;
};

struct TrajectorySample {
  State state;
  ObservableRecord obs;
};

struct Trajectory {
  HolsteinParams params;
  std::vector<TrajectorySample> samples;
  std::string metadata;  // free-form "key=value ..." provenance
};

struct DimensionlessScales {
  double omega;
  double Q0;
  double P0;
  double lambda;
};

DimensionlessScales dimensionless_scales(const HolsteinParams& params);

// --- random streams -------------------------------------------------------

inline constexpr std::string_view kRngAlgorithm = "mt19937_64+splitmix64-streams";

std::uint64_t splitmix64(std::uint64_t x);

// Seed for the named sub-stream `name`/`index` of a global seed. Streams with
// distinct (name, index) are statistically independent and reproducible in
// isolation.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng(stream_seed(seed, name, index));
}

// Q_i ~ N(0, q_std) independently, P = 0, t = 0.
State sample_initial_state(const HolsteinParams& params, double q_std, std::uint64_t seed);

// Cyclic shift so that element `shift` lands at index 0.
template <typename Derived>
VectorX<typename Derived::Scalar> roll(const Eigen::MatrixBase<Derived>& v, Eigen::Index shift) {
  const Eigen::Index n = v.size();
  VectorX<typename Derived::Scalar> out(n);
  const Eigen::Index s = ((shift % n) + n) % n;
  for (Eigen::Index j = 0; j < n; ++j) out(j) = v((j + s) % n);
  return out;
}

// --- trajectory CSV --------------------------------------------------------

std::string format_double(double x);  // 17 significant digits

std::string trajectory_header(int L);
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
// Reads the CSV written above. Lines starting with '#' are metadata comments;
// params are taken from `params`, overridden by any key=value fields of the
// first metadata line, with L checked against the header.
Trajectory read_trajectory_csv(std::istream& is, const HolsteinParams& params);

// "key=value" tokens for every HolsteinParams field, and the inverse: fields
// present in `metadata` override those in `base`.
std::string params_metadata(const HolsteinParams& params);
HolsteinParams apply_metadata(HolsteinParams base, const std::string& metadata);

void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path, const HolsteinParams& params);

// Write to `path` atomically (temp file then rename).
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace peal
