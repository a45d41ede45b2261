#pragma once

#include "peal/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace peal {

// Time derivatives of (Q, P) for a frozen density:
//   dQ/dt = P/M,  dP/dt = -k Q + g (n - 1/2) - gamma P.
template <typename Scalar, typename DerivedN>
std::pair<VectorX<Scalar>, VectorX<Scalar>> classical_force(const ClassicalState<Scalar>& s,
                                                             const Eigen::MatrixBase<DerivedN>& n,
                                                             const HolsteinParams& p) {
  const Scalar M(p.M), k(p.k), g(p.g), gamma(p.gamma);
  VectorX<Scalar> dQ = s.P / M;
  VectorX<Scalar> dP = -k * s.Q + g * (n.array() - Scalar(0.5)).matrix() - gamma * s.P;
  return {std::move(dQ), std::move(dP)};
}

// Classical RK4 step with the density held fixed across the four substages.
template <typename Scalar, typename DerivedN>
ClassicalState<Scalar> rk4_step(const ClassicalState<Scalar>& s, const Eigen::MatrixBase<DerivedN>& n,
                                const HolsteinParams& p) {
  if (!(p.dt > 0)) throw ParameterError("dt must be > 0");
  const Scalar dt(p.dt);
  const Scalar half = dt / Scalar(2);
  auto shifted = [&](const VectorX<Scalar>& dq, const VectorX<Scalar>& dp, Scalar h) {
    ClassicalState<Scalar> x;
    x.t = s.t + h;
    x.Q = s.Q + h * dq;
    x.P = s.P + h * dp;
    return x;
  };
  const auto [k1q, k1p] = classical_force(s, n, p);
  const auto [k2q, k2p] = classical_force(shifted(k1q, k1p, half), n, p);
  const auto [k3q, k3p] = classical_force(shifted(k2q, k2p, half), n, p);
  const auto [k4q, k4p] = classical_force(shifted(k3q, k3p, dt), n, p);
  ClassicalState<Scalar> out;
  out.t = s.t + dt;
  out.Q = s.Q + (dt / Scalar(6)) * (k1q + Scalar(2) * k2q + Scalar(2) * k3q + k4q);
  out.P = s.P + (dt / Scalar(6)) * (k1p + Scalar(2) * k2p + Scalar(2) * k3p + k4p);
  if (!out.finite()) throw NumericalError("rk4_step produced a non-finite state");
  return out;
}

enum class ForceKind { ExactQss, Surrogate };

// Density provider driving the classical EOM. Implementations must be safe
// for concurrent const use.
class ForceField {
 public:
  virtual ~ForceField() = default;
  virtual ForceKind kind() const = 0;
  // Full observable record at configuration Q for coupling g. The density is
  // always present; other entries may be NaN when unavailable.
  virtual ObservableRecord evaluate(double g, const Eigen::VectorXd& Q) const = 0;
};

// A filling of 0 selects half filling.
class ExactField final : public ForceField {
 public:
  explicit ExactField(int filling) : filling_(filling) {}
  ForceKind kind() const override { return ForceKind::ExactQss; }
  ObservableRecord evaluate(double g, const Eigen::VectorXd& Q) const override;

 private:
  int filling_;
};

struct EvolveOptions {
  int record_stride = 10;
  // Recompute the density at every RK4 substage instead of freezing it.
  bool recompute_substages = false;
  double blowup_threshold = 1e6;
};

class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, long last_valid_step)
      : NumericalError(what), last_valid_step_(last_valid_step) {}
  long last_valid_step() const { return last_valid_step_; }

 private:
  long last_valid_step_;
};

// Alternating quantum/classical updates for `steps` steps. Records step 0 and
// every record_stride-th step (plus the final step if not on the stride).
Trajectory evolve(const State& initial, const HolsteinParams& params, long steps,
                  const ForceField& field, const EvolveOptions& opts = {});

// E = gs_energy + sum(P^2/2M + k Q^2/2).
double total_energy(const TrajectorySample& s, const HolsteinParams& params);

struct EnsembleStats {
  int count = 0;
  double target_time = 0;
  Eigen::MatrixXd qq_mean;
  Eigen::MatrixXd qq_var;
  std::vector<double> times;
  std::vector<double> cdw_series_mean;
  std::vector<double> cdw_series_var;
  std::vector<std::pair<std::uint64_t, std::string>> failed;  // seed, reason
};

// Independent evolutions from sample_initial_state(params, q_std, seed) for
// each seed. Variances are unbiased (n - 1). Aborted paths are reported in
// `failed` and excluded from the statistics.
EnsembleStats ensemble_run(const std::vector<std::uint64_t>& seeds, const HolsteinParams& params,
                           double q_std, long steps, const ForceField& field, double target_time,
                           const EvolveOptions& opts = {});

// CSV rows (i, j, qq_mean, qq_var) preceded by one '#' metadata line.
void write_ensemble_csv(std::ostream& os, const EnsembleStats& stats, const std::string& metadata);

}  // namespace peal
