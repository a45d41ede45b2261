#include "peal/dynamics.hpp"

#include "peal/qss.hpp"

#include <cmath>
#include <ostream>

namespace peal {

ObservableRecord ExactField::evaluate(double g, const Eigen::VectorXd& Q) const {
  return exact_observables(Q, g, filling_ > 0 ? filling_ : static_cast<int>(Q.size() / 2));
}

namespace {

State rk4_recomputed(const State& s, const HolsteinParams& p, const ForceField& field,
                     const Eigen::VectorXd& n0) {
  const double dt = p.dt;
  auto at = [&](const Eigen::VectorXd& dq, const Eigen::VectorXd& dp, double h) {
    State x;
    x.t = s.t + h;
    x.Q = s.Q + h * dq;
    x.P = s.P + h * dp;
    return x;
  };
  const auto [k1q, k1p] = classical_force(s, n0, p);
  const State s2 = at(k1q, k1p, dt / 2);
  const auto [k2q, k2p] = classical_force(s2, field.evaluate(p.g, s2.Q).n, p);
  const State s3 = at(k2q, k2p, dt / 2);
  const auto [k3q, k3p] = classical_force(s3, field.evaluate(p.g, s3.Q).n, p);
  const State s4 = at(k3q, k3p, dt);
  const auto [k4q, k4p] = classical_force(s4, field.evaluate(p.g, s4.Q).n, p);
  State out;
  out.t = s.t + dt;
  out.Q = s.Q + (dt / 6) * (k1q + 2 * k2q + 2 * k3q + k4q);
  out.P = s.P + (dt / 6) * (k1p + 2 * k2p + 2 * k3p + k4p);
  if (!out.finite()) throw NumericalError("rk4_step produced a non-finite state");
  return out;
}

}  // namespace

Trajectory evolve(const State& initial, const HolsteinParams& params, long steps,
                  const ForceField& field, const EvolveOptions& opts) {
  params.validate();
  if (steps < 1) throw ParameterError("steps must be >= 1");
  if (opts.record_stride < 1) throw ParameterError("record_stride must be >= 1");
  if (initial.Q.size() != params.L || initial.P.size() != params.L)
    throw ParameterError("initial state length does not match L");
  if (!initial.finite()) throw ParameterError("initial state must be finite");

  Trajectory traj;
  traj.params = params;
  traj.samples.reserve(static_cast<std::size_t>(steps / opts.record_stride + 2));

  State state = initial;
  // Time is stepped as t_init + step * dt to keep the record grid exact.
  for (long step = 0;; ++step) {
    ObservableRecord obs = field.evaluate(params.g, state.Q);
    if (step % opts.record_stride == 0 || step == steps) {
      traj.samples.push_back({state, obs});
    }
    if (step == steps) break;
    State next;
    try {
      next = opts.recompute_substages ? rk4_recomputed(state, params, field, obs.n)
                                      : rk4_step(state, obs.n, params);
    } catch (const NumericalError& e) {
      throw IntegrationError(e.what(), step);
    }
    next.t = initial.t + static_cast<double>(step + 1) * params.dt;
    if (next.Q.cwiseAbs().maxCoeff() > opts.blowup_threshold)
      throw IntegrationError("blowup: max|Q| exceeded threshold at step " + std::to_string(step + 1),
                             step);
    state = std::move(next);
  }
  return traj;
}

double total_energy(const TrajectorySample& s, const HolsteinParams& p) {
  return s.obs.gs_energy + s.state.P.squaredNorm() / (2 * p.M) + 0.5 * p.k * s.state.Q.squaredNorm();
}

EnsembleStats ensemble_run(const std::vector<std::uint64_t>& seeds, const HolsteinParams& params,
                           double q_std, long steps, const ForceField& field, double target_time,
                           const EvolveOptions& opts) {
  if (seeds.size() < 2) throw ParameterError("ensemble needs at least 2 seeds");
  const long target_step = std::lround(target_time / params.dt);
  if (target_step > steps) throw ParameterError("target_time lies beyond the evolved steps");
  if (target_step % opts.record_stride != 0 && target_step != steps)
    throw ParameterError("target_time must fall on the record grid (stride)");

  const int L = params.L;
  EnsembleStats st;
  st.target_time = target_time;
  // Welford accumulators; identical paths give exactly zero variance.
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(L, L);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(L, L);
  std::vector<double> cmean, cm2;

  for (std::uint64_t seed : seeds) {
    Trajectory traj;
    try {
      traj = evolve(sample_initial_state(params, q_std, seed), params, steps, field, opts);
    } catch (const NumericalError& e) {
      st.failed.emplace_back(seed, e.what());
      continue;
    }
    const TrajectorySample* at = nullptr;
    for (const auto& s : traj.samples)
      if (std::abs(s.state.t - target_time) < 0.5 * params.dt) at = &s;
    ++st.count;
    const double n = st.count;
    const Eigen::MatrixXd qq = at->state.Q * at->state.Q.transpose();
    const Eigen::MatrixXd delta = qq - mean;
    mean += delta / n;
    m2 += delta.cwiseProduct(qq - mean);
    if (cmean.empty()) {
      cmean.assign(traj.samples.size(), 0.0);
      cm2.assign(traj.samples.size(), 0.0);
      for (const auto& s : traj.samples) st.times.push_back(s.state.t);
    }
    for (std::size_t r = 0; r < traj.samples.size(); ++r) {
      const double x = traj.samples[r].obs.cdw;
      const double d = x - cmean[r];
      cmean[r] += d / n;
      cm2[r] += d * (x - cmean[r]);
    }
  }
  if (st.count == 0) throw NumericalError("every ensemble path aborted");

  const double denom = st.count > 1 ? st.count - 1.0 : 1.0;
  st.qq_mean = mean;
  st.qq_var = (m2 / denom).cwiseMax(0.0);
  st.cdw_series_mean = cmean;
  for (double v : cm2) st.cdw_series_var.push_back(std::max(0.0, v / denom));
  return st;
}

void write_ensemble_csv(std::ostream& os, const EnsembleStats& st, const std::string& metadata) {
  os << "# " << metadata << " paths=" << st.count << " failed=" << st.failed.size()
     << " target_time=" << format_double(st.target_time) << '\n';
  os << "i,j,qq_mean,qq_var\n";
  for (Eigen::Index i = 0; i < st.qq_mean.rows(); ++i)
    for (Eigen::Index j = 0; j < st.qq_mean.cols(); ++j)
      os << i << ',' << j << ',' << format_double(st.qq_mean(i, j)) << ','
         << format_double(st.qq_var(i, j)) << '\n';
}

}  // namespace peal
