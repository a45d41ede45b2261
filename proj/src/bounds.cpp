#include "peal/bounds.hpp"

#include "peal/qss.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace peal {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = std::numbers::pi;
}  // namespace

StiffnessSeries measure_stiffness(const Trajectory& traj, int site, const StiffnessOptions& opts) {
  const HolsteinParams& p = traj.params;
  if (site < 0 || site >= p.L) throw ParameterError("site must lie in [0, L)");
  StiffnessSeries s;
  s.site = site;
  double offdiag = 0;
  for (const auto& smp : traj.samples) {
    const double t = smp.state.t;
    if (t < opts.t_from || t > opts.t_to) continue;
    const auto r = response(smp.state.Q, p.g, site, p.electrons(), opts.h);
    s.times.push_back(t);
    s.K.push_back(p.k - p.g * r.value);
    s.degenerate.push_back(r.degenerate);
    if (opts.offdiag)
      for (Eigen::Index j = 0; j < r.column.size(); ++j)
        if (j != site) offdiag = std::max(offdiag, std::abs(p.g * r.column(j)));
  }
  if (s.K.empty()) throw ParameterError("stiffness window contains no recorded steps");
  s.K_min = *std::min_element(s.K.begin(), s.K.end());
  s.K_max = *std::max_element(s.K.begin(), s.K.end());
  if (opts.offdiag) s.max_offdiag = offdiag;
  return s;
}

SpringCondition check_spring_condition(double K_min, double K_max, double M, double gamma) {
  if (!(K_max >= K_min)) throw ParameterError("K_max must be >= K_min");
  if (!(M > 0)) throw ParameterError("M must be > 0");
  if (!(gamma >= 0)) throw ParameterError("gamma must be >= 0");
  SpringCondition c;
  c.K_min = K_min;
  c.K_max = K_max;
  c.M = M;
  c.gamma = gamma;
  const double floor = M * (gamma / 2) * (gamma / 2);
  c.floor_ok = K_min > floor;
  if (!c.floor_ok) {
    c.omega_min = c.omega_max = c.lhs = c.rhs = kNaN;
    return c;
  }
  // gamma = 0 gives omega = inf and rhs = 1.
  c.omega_min = std::sqrt(K_min / floor - 1);
  c.omega_max = std::sqrt(K_max / floor - 1);
  c.lhs = K_max / K_min;
  c.rhs = std::exp(2 * (std::atan(c.omega_min) / c.omega_min + (kPi - std::atan(c.omega_max)) / c.omega_max));
  c.holds = c.lhs < c.rhs;
  return c;
}

double worst_case_ratio(double K_min, double K_max, double M, double gamma) {
  const SpringCondition c = check_spring_condition(K_min, K_max, M, gamma);
  if (!c.floor_ok) return kNaN;
  const double h = gamma / 2;
  const double W_min = std::sqrt(K_min / M - h * h);
  const double W_max = std::sqrt(K_max / M - h * h);
  const double t0 = (kPi - std::atan2(2 * W_max, gamma)) / W_max;
  const double t1 = std::atan2(2 * W_min, gamma) / W_min;
  return std::sqrt(K_max / K_min) * std::exp(-h * (t0 + t1));
}

// --- worst-case spec ---------------------------------------------------------

void WorstCaseSpec::validate() const {
  if (dim < 1) throw ParameterError("dim must be >= 1");
  auto block = [&](const Eigen::MatrixXd& lo, const Eigen::MatrixXd& hi, const std::string& name) {
    if (lo.rows() != dim || lo.cols() != dim || hi.rows() != dim || hi.cols() != dim)
      throw ParameterError(name + " bounds must be dim x dim");
    if (!lo.allFinite() || !hi.allFinite()) throw ParameterError(name + " bounds must be finite");
    if ((lo.array() > hi.array()).any()) throw ParameterError(name + " lower bound exceeds upper bound");
  };
  block(qq_lo, qq_hi, "K_qq");
  block(pq_lo, pq_hi, "K_pq");
  block(qp_lo, qp_hi, "K_qp");
  block(pp_lo, pp_hi, "K_pp");
  if (fq_bound.size() != dim || fp_bound.size() != dim) throw ParameterError("force bounds must have length dim");
  if ((fq_bound.array() < 0).any() || (fp_bound.array() < 0).any())
    throw ParameterError("force bounds must be >= 0");
  if (!(gamma >= 0)) throw ParameterError("gamma must be >= 0");
  if (!(M > 0)) throw ParameterError("M must be > 0");
  if (!(horizon > 0)) throw ParameterError("horizon must be > 0");
  if (!(dt > 0)) throw ParameterError("dt must be > 0");
  const double w = omega_max();
  if (w > 0 && dt > 0.01 / w * (1 + 1e-12))
    throw ParameterError("dt must be <= 0.01/omega_max = " + format_double(0.01 / w));
}

double WorstCaseSpec::omega_max() const {
  // Row sums bound the spectral radius of the coupling blocks.
  auto rowsum = [](const Eigen::MatrixXd& lo, const Eigen::MatrixXd& hi) {
    return lo.cwiseAbs().cwiseMax(hi.cwiseAbs()).colwise().sum().maxCoeff();
  };
  const double cross = std::sqrt(rowsum(qp_lo, qp_hi) * rowsum(pq_lo, pq_hi));
  return std::max({cross, rowsum(qq_lo, qq_hi), rowsum(pp_lo, pp_hi) + gamma});
}

WorstCaseSpec diagonal_spec(int dim, double K_min, double K_max, double M, double gamma, double force_bound,
                            double horizon, double dt) {
  if (dim < 1) throw ParameterError("dim must be >= 1");
  if (!(K_max >= K_min)) throw ParameterError("K_max must be >= K_min");
  WorstCaseSpec s;
  s.dim = dim;
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(dim, dim);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
  s.qq_lo = s.qq_hi = s.pp_lo = s.pp_hi = Z;
  s.pq_lo = s.pq_hi = I / M;
  s.qp_lo = -K_max * I;
  s.qp_hi = -K_min * I;
  s.fq_bound = Eigen::VectorXd::Zero(dim);
  s.fp_bound = Eigen::VectorXd::Constant(dim, force_bound);
  s.gamma = gamma;
  s.M = M;
  s.horizon = horizon;
  s.dt = dt;
  return s;
}

namespace {

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r;
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd json_mat(const nlohmann::json& j, int dim, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw ParameterError(name + " must be a dim x dim array");
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != dim)
      throw ParameterError(name + " must be a dim x dim array");
    for (int k = 0; k < dim; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

Eigen::VectorXd json_vec(const nlohmann::json& j, int dim, const std::string& name) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != dim) throw ParameterError(name + " must have length dim");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
}

}  // namespace

std::string spec_to_json(const WorstCaseSpec& s) {
  nlohmann::json j;
  j["dim"] = s.dim;
  j["gamma"] = s.gamma;
  j["M"] = s.M;
  j["horizon"] = s.horizon;
  j["dt"] = s.dt;
  j["K"] = {{"qq", {{"lo", mat_json(s.qq_lo)}, {"hi", mat_json(s.qq_hi)}}},
            {"pq", {{"lo", mat_json(s.pq_lo)}, {"hi", mat_json(s.pq_hi)}}},
            {"qp", {{"lo", mat_json(s.qp_lo)}, {"hi", mat_json(s.qp_hi)}}},
            {"pp", {{"lo", mat_json(s.pp_lo)}, {"hi", mat_json(s.pp_hi)}}}};
  j["F"] = {{"q", std::vector<double>(s.fq_bound.data(), s.fq_bound.data() + s.fq_bound.size())},
            {"p", std::vector<double>(s.fp_bound.data(), s.fp_bound.data() + s.fp_bound.size())}};
  return j.dump(1) + "\n";
}

WorstCaseSpec spec_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    WorstCaseSpec s;
    s.dim = j.at("dim").get<int>();
    if (s.dim < 1) throw ParameterError("dim must be >= 1");
    s.gamma = j.at("gamma").get<double>();
    s.M = j.value("M", 1.0);
    s.horizon = j.at("horizon").get<double>();
    s.dt = j.at("dt").get<double>();
    const auto& K = j.at("K");
    s.qq_lo = json_mat(K.at("qq").at("lo"), s.dim, "K.qq.lo");
    s.qq_hi = json_mat(K.at("qq").at("hi"), s.dim, "K.qq.hi");
    s.pq_lo = json_mat(K.at("pq").at("lo"), s.dim, "K.pq.lo");
    s.pq_hi = json_mat(K.at("pq").at("hi"), s.dim, "K.pq.hi");
    s.qp_lo = json_mat(K.at("qp").at("lo"), s.dim, "K.qp.lo");
    s.qp_hi = json_mat(K.at("qp").at("hi"), s.dim, "K.qp.hi");
    s.pp_lo = json_mat(K.at("pp").at("lo"), s.dim, "K.pp.lo");
    s.pp_hi = json_mat(K.at("pp").at("hi"), s.dim, "K.pp.hi");
    s.fq_bound = json_vec(j.at("F").at("q"), s.dim, "F.q");
    s.fp_bound = json_vec(j.at("F").at("p"), s.dim, "F.p");
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed worst-case spec: ") + e.what());
  }
}

namespace {

inline double sgn(double x) { return x < 0 ? -1.0 : 1.0; }

inline double pick(double lo, double hi, double src, double tgt) { return sgn(src) == sgn(tgt) ? hi : lo; }

struct Deriv {
  Eigen::VectorXd dq, dp;
};

Deriv worst_rhs(const WorstCaseSpec& s, const Eigen::VectorXd& q, const Eigen::VectorXd& p, double root_eps) {
  const int d = s.dim;
  Deriv out{Eigen::VectorXd(d), Eigen::VectorXd(d)};
  for (int i = 0; i < d; ++i) {
    double vq = sgn(q(i)) * s.fq_bound(i) * root_eps;
    double vp = sgn(p(i)) * s.fp_bound(i) * root_eps - s.gamma * p(i);
    for (int j = 0; j < d; ++j) {
      vq += pick(s.qq_lo(j, i), s.qq_hi(j, i), q(j), q(i)) * q(j);
      vq += pick(s.pq_lo(j, i), s.pq_hi(j, i), p(j), q(i)) * p(j);
      vp += pick(s.qp_lo(j, i), s.qp_hi(j, i), q(j), p(i)) * q(j);
      vp += pick(s.pp_lo(j, i), s.pp_hi(j, i), p(j), p(i)) * p(j);
    }
    out.dq(i) = vq;
    out.dp(i) = vp;
  }
  return out;
}

struct RunResult {
  double max_q = 0, max_p = 0;
  double early_q = 0, late_q = 0;
  bool blowup = false;
  double blowup_time = kNaN;
};

RunResult run_worst(const WorstCaseSpec& s, double eps) {
  const double re = std::sqrt(eps);
  const long steps = std::lround(std::ceil(s.horizon / s.dt - 1e-9));
  const long split = steps * 3 / 4;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(s.dim);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(s.dim);
  RunResult r;
  const double h = s.dt;
  for (long n = 1; n <= steps; ++n) {
    const Deriv k1 = worst_rhs(s, q, p, re);
    const Deriv k2 = worst_rhs(s, q + h / 2 * k1.dq, p + h / 2 * k1.dp, re);
    const Deriv k3 = worst_rhs(s, q + h / 2 * k2.dq, p + h / 2 * k2.dp, re);
    const Deriv k4 = worst_rhs(s, q + h * k3.dq, p + h * k3.dp, re);
    q += h / 6 * (k1.dq + 2 * k2.dq + 2 * k3.dq + k4.dq);
    p += h / 6 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp);
    const double aq = q.cwiseAbs().maxCoeff();
    const double ap = p.cwiseAbs().maxCoeff();
    if (!std::isfinite(aq) || !std::isfinite(ap) || aq > 1e6 * re) {
      r.blowup = true;
      r.blowup_time = static_cast<double>(n) * h;
      r.max_q = std::isfinite(aq) ? aq : std::numeric_limits<double>::infinity();
      return r;
    }
    r.max_q = std::max(r.max_q, aq);
    r.max_p = std::max(r.max_p, ap);
    if (n <= split) {
      r.early_q = std::max(r.early_q, aq);
    } else {
      r.late_q = std::max(r.late_q, aq);
    }
  }
  return r;
}

}  // namespace

BoundReport relaxation_simulate(const WorstCaseSpec& spec, const std::vector<double>& epsilons) {
  spec.validate();
  if (epsilons.size() < 2) throw ParameterError("epsilons needs at least 2 values");
  double lo = epsilons.front(), hi = epsilons.front();
  for (double e : epsilons) {
    if (!(e > 0)) throw ParameterError("epsilons must be > 0");
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (hi < 4 * lo * (1 - 1e-12)) throw ParameterError("epsilons must span at least a 4x range");

  BoundReport rep;
  rep.epsilons = epsilons;
  for (double e : epsilons) {
    const RunResult r = run_worst(spec, e);
    rep.max_q.push_back(r.max_q);
    rep.max_p.push_back(r.max_p);
    rep.C_q.push_back(r.max_q / std::sqrt(e));
    rep.C_p.push_back(r.max_p / std::sqrt(e));
    if (r.blowup) {
      if (!rep.blowup) rep.blowup_time = r.blowup_time;
      rep.blowup = true;
    }
    if (r.late_q > 1.01 * r.early_q) rep.saturated = false;
  }

  const bool all_zero = std::all_of(rep.max_q.begin(), rep.max_q.end(), [](double v) { return v == 0; }) &&
                        std::all_of(rep.max_p.begin(), rep.max_p.end(), [](double v) { return v == 0; });
  if (all_zero) {
    rep.error_bounded = !rep.blowup;
    return rep;
  }
  // Least-squares slope of log max|q| against log eps.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(epsilons.size());
  bool logs_ok = true;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(rep.max_q[i] > 0) || !std::isfinite(rep.max_q[i])) logs_ok = false;
    const double x = std::log(epsilons[i]);
    const double y = std::log(rep.max_q[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (logs_ok) rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const auto [cmin, cmax] = std::minmax_element(rep.C_q.begin(), rep.C_q.end());
  rep.C_stable = std::isfinite(*cmax) && *cmin > 0 && *cmax <= 1.05 * *cmin;
  rep.error_bounded = !rep.blowup && logs_ok && std::abs(rep.slope - 0.5) <= 0.1 && rep.C_stable && rep.saturated;
  return rep;
}

BoundMode parse_bound_mode(const std::string& s) {
  if (s == "generic") return BoundMode::Generic;
  if (s == "subgaussian") return BoundMode::Subgaussian;
  if (s == "bounded") return BoundMode::Bounded;
  throw ParameterError("mode must be generic, subgaussian, or bounded; got '" + s + "'");
}

double error_bound_estimate(long T, double epsilon, double eta, BoundMode mode) {
  if (T < 1) throw ParameterError("T must be >= 1");
  if (!(epsilon > 0 && epsilon < std::exp(-1.0))) throw ParameterError("epsilon must lie in (0, 1/e)");
  if (!(eta > 0 && eta < 1)) throw ParameterError("eta must lie in (0, 1)");
  const double Td = static_cast<double>(T);
  switch (mode) {
    case BoundMode::Generic: return std::sqrt(Td * epsilon / eta);
    case BoundMode::Subgaussian: return std::sqrt(2 * epsilon * std::log(2 * Td / eta));
    case BoundMode::Bounded: return std::sqrt(epsilon);
  }
  return kNaN;
}

double sample_size_hint(double n, double delta, double epsilon, double c, double degree) {
  if (!(n >= 1)) throw ParameterError("n must be >= 1");
  if (!(delta > 0 && delta < 1)) throw ParameterError("delta must lie in (0, 1)");
  if (!(epsilon > 0 && epsilon < 1)) throw ParameterError("epsilon must lie in (0, 1)");
  if (!(c > 0)) throw ParameterError("c must be > 0");
  if (!(degree > 0)) throw ParameterError("degree must be > 0");
  return std::log(n / delta) * std::exp2(c * std::pow(std::log(1 / epsilon), degree));
}

namespace {
nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

std::string spring_json(const SpringCondition& c) {
  nlohmann::json j;
  j["K_min"] = c.K_min;
  j["K_max"] = c.K_max;
  j["M"] = c.M;
  j["gamma"] = c.gamma;
  j["omega_min"] = num(c.omega_min);
  j["omega_max"] = num(c.omega_max);
  j["lhs"] = num(c.lhs);
  j["rhs"] = num(c.rhs);
  j["floor_ok"] = c.floor_ok;
  j["holds"] = c.holds;
  j["worst_case_ratio"] = num(c.floor_ok ? worst_case_ratio(c.K_min, c.K_max, c.M, c.gamma) : kNaN);
  return j.dump(1) + "\n";
}

std::string bound_report_json(const BoundReport& r) {
  nlohmann::json j;
  auto arr = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(num(x));
    return a;
  };
  j["epsilons"] = arr(r.epsilons);
  j["max_q"] = arr(r.max_q);
  j["max_p"] = arr(r.max_p);
  j["C_q"] = arr(r.C_q);
  j["C_p"] = arr(r.C_p);
  j["slope"] = num(r.slope);
  j["blowup"] = r.blowup;
  j["blowup_time"] = num(r.blowup_time);
  j["saturated"] = r.saturated;
  j["C_stable"] = r.C_stable;
  j["error_bounded"] = r.error_bounded ? "yes" : "no";
  return j.dump(1) + "\n";
}

void write_stiffness_csv(std::ostream& os, const StiffnessSeries& s) {
  os << "# site=" << s.site << " K_min=" << format_double(s.K_min) << " K_max=" << format_double(s.K_max)
     << " max_offdiag=" << format_double(s.max_offdiag) << '\n';
  os << "t,K,degenerate\n";
  for (std::size_t i = 0; i < s.times.size(); ++i)
    os << format_double(s.times[i]) << ',' << format_double(s.K[i]) << ',' << (s.degenerate[i] ? 1 : 0) << '\n';
}

}  // namespace peal
