#pragma once

#include "peal/dynamics.hpp"
#include "peal/learning.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace peal {

struct PealConfig {
  // Empty selects the exact-QSS oracle in place of a trained density model.
  std::optional<SurrogateModel> density;
  std::optional<SurrogateModel> hop;
  std::optional<SurrogateModel> nnn;
  bool u1_correction = true;
  bool clamp = false;  // clip to [0, 1] before the U(1) shift
  int filling = 0;     // 0 selects half filling

  // Throws ParameterError on model kind or L mismatches against `L`.
  void validate(int L) const;
};

// n_i = predict_site(model, g, roll(Q, i)). Window arguments are shared
// between sites, so rolled inputs give bitwise rolled outputs.
Eigen::VectorXd predict_density_field(const SurrogateModel& model, double g, const Eigen::VectorXd& Q);

// Uniform additive shift so that sum(n) == filling.
Eigen::VectorXd u1_correct(const Eigen::VectorXd& n, int filling);

class PealField final : public ForceField {
 public:
  PealField(PealConfig config, int L);
  ForceKind kind() const override;
  ObservableRecord evaluate(double g, const Eigen::VectorXd& Q) const override;

 private:
  PealConfig config_;
  int L_;
};

Trajectory peal_evolve(const State& initial, const HolsteinParams& params, long steps, const PealConfig& config,
                       const EvolveOptions& opts = {});

class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

struct ComparisonReport {
  std::vector<double> times;
  std::vector<double> cdw_exact, cdw_peal;
  std::vector<double> n0_exact, n0_peal;
  std::vector<double> q0_exact, q0_peal;
  std::vector<double> p0_exact, p0_peal;
  std::vector<double> hop_exact, hop_peal;
  std::vector<double> nnn_exact, nnn_peal;
  double density_rmse = 0;
  double max_density_dev = 0;
  double max_cdw_dev = 0;
  double max_q_dev = 0;
  double max_p_dev = 0;
  double max_hop_dev = 0;  // NaN when either side lacks bond values
  double max_nnn_dev = 0;
  int L = 0;
};

ComparisonReport compare(const Trajectory& exact, const Trajectory& predicted);

std::string comparison_json(const ComparisonReport& report);
void write_comparison_csv(std::ostream& os, const ComparisonReport& report);

}  // namespace peal
