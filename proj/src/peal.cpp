#include "peal/peal.hpp"

#include "peal/qss.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <ostream>

namespace peal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_model(const std::optional<SurrogateModel>& m, ObservableKind kind, int L, const char* field) {
  if (!m) return;
  if (m->kind != kind)
    throw ParameterError(std::string(field) + ": model predicts " + to_string(m->kind) + ", expected " +
                         to_string(kind));
  if (m->map.L != L)
    throw ParameterError(std::string(field) + ": L mismatch, model L=" + std::to_string(m->map.L) +
                         " but run L=" + std::to_string(L));
}

}  // namespace

void PealConfig::validate(int L) const {
  check_model(density, ObservableKind::Density, L, "density model");
  check_model(hop, ObservableKind::Hop, L, "hop model");
  check_model(nnn, ObservableKind::Nnn, L, "nnn model");
  if (filling < 0 || filling > L) throw ParameterError("filling must lie in [0, L]");
}

Eigen::VectorXd predict_density_field(const SurrogateModel& model, double g, const Eigen::VectorXd& Q) {
  const FeatureMap& map = model.map;
  if (Q.size() != map.L)
    throw ParameterError("L mismatch: model expects " + std::to_string(map.L) + " sites, got " +
                         std::to_string(Q.size()));
  const int L = map.L;
  const int R = map.R;
  const int w = map.window();
  // trig(c, r) and trig(c, R + r): cos and sin of window c, frequency r.
  Eigen::MatrixXd trig(L, 2 * R);
  std::vector<double> z(static_cast<std::size_t>(w));
  for (int c = 0; c < L; ++c) {
    for (int k = 0; k < w; ++k) {
      const double q = Q(((c + k - map.radius) % L + L) % L);
      z[k] = map.g_mode == GMode::Scaled ? g * q : q;
    }
    for (int r = 0; r < R; ++r) {
      double arg = 0;
      for (int k = 0; k < w; ++k) arg += map.frequencies(r, k) * z[k];
      trig(c, r) = std::cos(arg);
      trig(c, R + r) = std::sin(arg);
    }
  }
  const Eigen::Index block = 2 * static_cast<Eigen::Index>(R);
  const Eigen::Index g_index = map.g_mode == GMode::Appended ? map.feature_count() - 1 : -1;
  Eigen::VectorXd n(L);
  for (int i = 0; i < L; ++i) {
    double acc = model.intercept;
    for (const auto& [j, wt] : model.weights) {
      if (j == g_index) {
        acc += wt * g;
        continue;
      }
      const auto c = static_cast<int>(j / block);
      acc += wt * trig((c + i) % L, static_cast<Eigen::Index>(j % block));
    }
    n(i) = acc;
  }
  return n;
}

Eigen::VectorXd u1_correct(const Eigen::VectorXd& n, int filling) {
  if (n.size() == 0) throw ParameterError("density vector is empty");
  const double shift = (static_cast<double>(filling) - n.sum()) / static_cast<double>(n.size());
  return n.array() + shift;
}

PealField::PealField(PealConfig config, int L) : config_(std::move(config)), L_(L) { config_.validate(L); }

ForceKind PealField::kind() const { return config_.density ? ForceKind::Surrogate : ForceKind::ExactQss; }

ObservableRecord PealField::evaluate(double g, const Eigen::VectorXd& Q) const {
  const int filling = config_.filling > 0 ? config_.filling : L_ / 2;
  ObservableRecord rec;
  if (config_.density) {
    rec.n = predict_density_field(*config_.density, g, Q);
    rec.hop = config_.hop ? predict_site(*config_.hop, g, Q) : kNaN;
    rec.nnn = config_.nnn ? predict_site(*config_.nnn, g, Q) : kNaN;
    rec.gs_energy = kNaN;
  } else {
    rec = exact_observables(Q, g, filling);
    if (config_.hop) rec.hop = predict_site(*config_.hop, g, Q);
    if (config_.nnn) rec.nnn = predict_site(*config_.nnn, g, Q);
  }
  if (!rec.n.allFinite()) throw NumericalError("surrogate produced a non-finite density");
  if (config_.clamp) rec.n = rec.n.cwiseMax(0.0).cwiseMin(1.0);
  if (config_.u1_correction) rec.n = u1_correct(rec.n, filling);
  rec.cdw = cdw_of(rec.n);
  return rec;
}

Trajectory peal_evolve(const State& initial, const HolsteinParams& params, long steps, const PealConfig& config,
                       const EvolveOptions& opts) {
  PealConfig cfg = config;
  if (cfg.filling == 0) cfg.filling = params.electrons();
  const PealField field(std::move(cfg), params.L);
  return evolve(initial, params, steps, field, opts);
}

namespace {

double max_abs_dev(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (std::isnan(d)) return kNaN;
    m = std::max(m, d);
  }
  return m;
}

}  // namespace

ComparisonReport compare(const Trajectory& exact, const Trajectory& predicted) {
  if (exact.params.L != predicted.params.L)
    throw AlignmentError("trajectories disagree on L (" + std::to_string(exact.params.L) + " vs " +
                         std::to_string(predicted.params.L) + ")");
  if (exact.samples.size() != predicted.samples.size())
    throw AlignmentError("trajectories have " + std::to_string(exact.samples.size()) + " and " +
                         std::to_string(predicted.samples.size()) + " recorded steps");
  ComparisonReport rep;
  rep.L = exact.params.L;
  double sq = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < exact.samples.size(); ++r) {
    const auto& e = exact.samples[r];
    const auto& p = predicted.samples[r];
    const double tol = 1e-9 * std::max(1.0, std::abs(e.state.t));
    if (std::abs(e.state.t - p.state.t) > tol)
      throw AlignmentError("timestamps differ at record " + std::to_string(r) + ": " + format_double(e.state.t) +
                           " vs " + format_double(p.state.t));
    rep.times.push_back(e.state.t);
    rep.cdw_exact.push_back(e.obs.cdw);
    rep.cdw_peal.push_back(p.obs.cdw);
    rep.n0_exact.push_back(e.obs.n(0));
    rep.n0_peal.push_back(p.obs.n(0));
    rep.q0_exact.push_back(e.state.Q(0));
    rep.q0_peal.push_back(p.state.Q(0));
    rep.p0_exact.push_back(e.state.P(0));
    rep.p0_peal.push_back(p.state.P(0));
    rep.hop_exact.push_back(e.obs.hop);
    rep.hop_peal.push_back(p.obs.hop);
    rep.nnn_exact.push_back(e.obs.nnn);
    rep.nnn_peal.push_back(p.obs.nnn);
    const Eigen::VectorXd dn = e.obs.n - p.obs.n;
    sq += dn.squaredNorm();
    count += static_cast<std::size_t>(dn.size());
    rep.max_density_dev = std::max(rep.max_density_dev, dn.cwiseAbs().maxCoeff());
    rep.max_q_dev = std::max(rep.max_q_dev, (e.state.Q - p.state.Q).cwiseAbs().maxCoeff());
    rep.max_p_dev = std::max(rep.max_p_dev, (e.state.P - p.state.P).cwiseAbs().maxCoeff());
  }
  rep.density_rmse = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
  rep.max_cdw_dev = max_abs_dev(rep.cdw_exact, rep.cdw_peal);
  rep.max_hop_dev = max_abs_dev(rep.hop_exact, rep.hop_peal);
  rep.max_nnn_dev = max_abs_dev(rep.nnn_exact, rep.nnn_peal);
  return rep;
}

std::string comparison_json(const ComparisonReport& r) {
  nlohmann::json j;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j["L"] = r.L;
  j["records"] = r.times.size();
  j["density_rmse"] = num(r.density_rmse);
  j["max_density_dev"] = num(r.max_density_dev);
  j["max_cdw_dev"] = num(r.max_cdw_dev);
  j["max_cdw_dev_per_site"] = num(r.max_cdw_dev / std::max(1, r.L));
  j["max_q_dev"] = num(r.max_q_dev);
  j["max_p_dev"] = num(r.max_p_dev);
  j["max_hop_dev"] = num(r.max_hop_dev);
  j["max_nnn_dev"] = num(r.max_nnn_dev);
  return j.dump(1) + "\n";
}

void write_comparison_csv(std::ostream& os, const ComparisonReport& r) {
  os << "t,cdw_exact,cdw_peal,n0_exact,n0_peal,Q0_exact,Q0_peal,P0_exact,P0_peal,hop_exact,hop_peal,nnn_exact,"
        "nnn_peal\n";
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    os << format_double(r.times[i]);
    for (double v : {r.cdw_exact[i], r.cdw_peal[i], r.n0_exact[i], r.n0_peal[i], r.q0_exact[i], r.q0_peal[i],
                     r.p0_exact[i], r.p0_peal[i], r.hop_exact[i], r.hop_peal[i], r.nnn_exact[i], r.nnn_peal[i]})
      os << ',' << format_double(v);
    os << '\n';
  }
}

}  // namespace peal
