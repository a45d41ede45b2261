#pragma once

#include "peal/core.hpp"

#include <limits>
#include <string>
#include <vector>

namespace peal {

struct StiffnessSeries {
  int site = 0;
  std::vector<double> times;
  std::vector<double> K;             // k - g dn_site/dQ_site
  std::vector<bool> degenerate;      // Fermi-level degeneracy at either probe
  double K_min = 0;
  double K_max = 0;
  // max_{j != site} |g dn_j/dQ_site|; NaN unless requested.
  double max_offdiag = std::numeric_limits<double>::quiet_NaN();
};

struct StiffnessOptions {
  double h = 1e-4;
  double t_from = -std::numeric_limits<double>::infinity();
  double t_to = std::numeric_limits<double>::infinity();
  bool offdiag = false;
};

// Re-solves the ground state at each recorded Q inside [t_from, t_to].
StiffnessSeries measure_stiffness(const Trajectory& traj, int site, const StiffnessOptions& opts = {});

struct SpringCondition {
  double K_min = 0, K_max = 0, M = 1, gamma = 0;
  double omega_min = 0, omega_max = 0;  // sqrt(K / (M (gamma/2)^2) - 1)
  double lhs = 0;                       // K_max / K_min
  double rhs = 0;                       // exp(2 (atan(w_min)/w_min + (pi - atan(w_max))/w_max))
  bool floor_ok = false;                // K_min > M (gamma/2)^2
  bool holds = false;                   // floor_ok && lhs < rhs
};

SpringCondition check_spring_condition(double K_min, double K_max, double M, double gamma);

// Amplitude ratio over one worst-case half cycle pair,
// sqrt(K_max/K_min) exp(-(gamma/2)(t0* + t1*)). NaN when the floor fails.
double worst_case_ratio(double K_min, double K_max, double M, double gamma);

// Linearized error EOM with interval coefficients. Entry (j, i) of each
// block couples source coordinate j into the derivative of target i:
//   dq_i/dt = sum_j (Kqq(j,i) q_j + Kpq(j,i) p_j) + F_q,i
//   dp_i/dt = sum_j (Kqp(j,i) q_j + Kpp(j,i) p_j) + F_p,i - gamma p_i
// with |F| <= bound * sqrt(eps).
struct WorstCaseSpec {
  int dim = 1;
  Eigen::MatrixXd qq_lo, qq_hi, pq_lo, pq_hi, qp_lo, qp_hi, pp_lo, pp_hi;
  Eigen::VectorXd fq_bound, fp_bound;
  double gamma = 0.1;
  double M = 1;
  double horizon = 100;
  double dt = 0.01;

  void validate() const;
  // Largest coupling frequency, used for the step-size limit dt <= 0.01 / omega_max.
  double omega_max() const;
};

// Uncoupled coordinates with dq/dt = p/M and dp/dt = -K(t) q + F - gamma p,
// K(t) in [K_min, K_max] and |F| <= force_bound sqrt(eps).
WorstCaseSpec diagonal_spec(int dim, double K_min, double K_max, double M, double gamma, double force_bound,
                            double horizon, double dt);

std::string spec_to_json(const WorstCaseSpec& spec);
WorstCaseSpec spec_from_json(const std::string& text);

struct BoundReport {
  std::vector<double> epsilons;
  std::vector<double> max_q, max_p;  // max over coordinates and the horizon
  std::vector<double> C_q, C_p;      // max / sqrt(eps)
  double slope = std::numeric_limits<double>::quiet_NaN();  // d log max|q| / d log eps
  bool blowup = false;
  double blowup_time = std::numeric_limits<double>::quiet_NaN();
  bool saturated = true;   // late-horizon envelope no larger than the early one
  bool C_stable = true;    // C_q spread within 5% across eps
  bool error_bounded = false;
};

// Adversarial integration of the spec for each eps (RK4, signs re-read at
// every stage, sign(0) taken as +).
BoundReport relaxation_simulate(const WorstCaseSpec& spec, const std::vector<double>& epsilons);

enum class BoundMode { Generic, Subgaussian, Bounded };

BoundMode parse_bound_mode(const std::string& s);

// Accumulated-error scaling up to an unspecified constant.
double error_bound_estimate(long T, double epsilon, double eta, BoundMode mode);

// log(n/delta) 2^(c log(1/eps)^degree). Heuristic: the constant and degree
// of the polylog are not known.
double sample_size_hint(double n, double delta, double epsilon, double c = 1.0, double degree = 2.0);

std::string spring_json(const SpringCondition& c);
std::string bound_report_json(const BoundReport& r);
void write_stiffness_csv(std::ostream& os, const StiffnessSeries& s);

}  // namespace peal
