#pragma once

#include "peal/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace peal {

// Single-particle Holstein Hamiltonian on a periodic chain:
// H_ii = -g Q_i, H_{i,i+1} = H_{i+1,i} = -1. The scalar offset g/2 sum(Q)
// from (n_i - 1/2) is kept out of the matrix.
template <typename Scalar>
struct ElectronHamiltonian {
  MatrixX<Scalar> matrix;

  Eigen::Index size() const { return matrix.rows(); }
  auto diag() const { return matrix.diagonal(); }
};

template <typename Derived>
ElectronHamiltonian<typename Derived::Scalar> build_hamiltonian(const Eigen::MatrixBase<Derived>& Q,
                                                               typename Derived::Scalar g) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index L = Q.size();
  ElectronHamiltonian<Scalar> h;
  h.matrix = MatrixX<Scalar>::Zero(L, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    const Eigen::Index j = (i + 1) % L;
    h.matrix(i, j) += Scalar(-1);
    h.matrix(j, i) += Scalar(-1);
    h.matrix(i, i) = -g * Q(i);
  }
  return h;
}

// Occupied orbitals (columns, ascending energy) with their occupations.
// Occupations are 1 except on a degenerate shell straddling the Fermi level,
// where `filling` is spread uniformly so that sum(occupations) == filling.
template <typename Scalar>
struct GroundState {
  MatrixX<Scalar> orbitals;
  VectorX<Scalar> energies;
  VectorX<Scalar> occupations;
  Scalar gap = 0;
  bool degenerate_fermi = false;
  int filling = 0;

  Eigen::Index sites() const { return orbitals.rows(); }
  Scalar band_energy() const { return occupations.dot(energies); }
};

inline constexpr double kDegenerateGap = 1e-12;
inline constexpr double kShellTolerance = 1e-9;

template <typename Scalar>
GroundState<Scalar> ground_state(const ElectronHamiltonian<Scalar>& H, int filling) {
  const Eigen::Index L = H.size();
  if (filling <= 0 || filling > L) throw ParameterError("filling must be in (0, L]");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(H.matrix);
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigensolver did not converge (L=" << L << ", |H|_F=" << H.matrix.norm()
        << ", max|diag|=" << H.matrix.diagonal().cwiseAbs().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }
  const VectorX<Scalar>& evals = es.eigenvalues();
  GroundState<Scalar> gs;
  gs.filling = filling;
  gs.gap = filling < L ? evals(filling) - evals(filling - 1) : Scalar(0);
  gs.degenerate_fermi = filling < L && gs.gap < Scalar(kDegenerateGap);

  Eigen::Index lo = 0;
  Eigen::Index hi = filling;  // occupy [0, hi)
  if (gs.degenerate_fermi) {
    const Scalar ef = evals(filling - 1);
    lo = filling - 1;
    while (lo > 0 && std::abs(evals(lo - 1) - ef) <= Scalar(kShellTolerance)) --lo;
    hi = filling;
    while (hi < L && std::abs(evals(hi) - ef) <= Scalar(kShellTolerance)) ++hi;
  } else {
    lo = hi;
  }
  gs.orbitals = es.eigenvectors().leftCols(hi);
  gs.energies = evals.head(hi);
  gs.occupations = VectorX<Scalar>::Ones(hi);
  if (gs.degenerate_fermi) {
    const Scalar shell_electrons = Scalar(filling - lo);
    gs.occupations.segment(lo, hi - lo).setConstant(shell_electrons / Scalar(hi - lo));
  }
  return gs;
}

template <typename Scalar>
VectorX<Scalar> density(const GroundState<Scalar>& gs) {
  return gs.orbitals.cwiseAbs2() * gs.occupations;
}

// <c_i^dagger c_j>; real and symmetric in (i, j).
template <typename Scalar>
Scalar correlation(const GroundState<Scalar>& gs, Eigen::Index i, Eigen::Index j) {
  return (gs.orbitals.row(i).cwiseProduct(gs.orbitals.row(j))).dot(gs.occupations.transpose());
}

template <typename Derived>
typename Derived::Scalar cdw_of(const Eigen::MatrixBase<Derived>& n) {
  typename Derived::Scalar s(0);
  for (Eigen::Index i = 0; i < n.size(); ++i) s += (i % 2 == 0) ? n(i) : -n(i);
  return s;
}

template <typename Derived>
VectorX<typename Derived::Scalar> solve_density(const Eigen::MatrixBase<Derived>& Q,
                                                typename Derived::Scalar g, int filling) {
  return density(ground_state(build_hamiltonian(Q, g), filling));
}

template <typename Scalar>
struct ResponseResult {
  Scalar value = 0;             // d n_site / d Q_site
  VectorX<Scalar> column;       // d n_j / d Q_site for every j
  bool degenerate = false;      // either probe had a degenerate Fermi level
};

inline constexpr double kResponseStep = 1e-4;

// Central finite difference of the density with respect to Q_site.
template <typename Derived>
ResponseResult<typename Derived::Scalar> response(const Eigen::MatrixBase<Derived>& Q,
                                                  typename Derived::Scalar g, Eigen::Index site,
                                                  int filling,
                                                  typename Derived::Scalar h = kResponseStep) {
  using Scalar = typename Derived::Scalar;
  if (!(h > 0)) throw ParameterError("response step h must be > 0");
  VectorX<Scalar> qp = Q;
  VectorX<Scalar> qm = Q;
  qp(site) += h;
  qm(site) -= h;
  const auto gp = ground_state(build_hamiltonian(qp, g), filling);
  const auto gm = ground_state(build_hamiltonian(qm, g), filling);
  ResponseResult<Scalar> r;
  r.column = (density(gp) - density(gm)) / (Scalar(2) * h);
  r.value = r.column(site);
  r.degenerate = gp.degenerate_fermi || gm.degenerate_fermi;
  return r;
}

// Full exact observable record at Q: density, CDW, reference-bond
// correlations <c_0^dag c_1>, <c_0^dag c_2>, and the electronic energy
// including the g/2 sum(Q) offset.
template <typename Derived>
ObservableRecord exact_observables(const Eigen::MatrixBase<Derived>& Q, double g, int filling) {
  const auto gs = ground_state(build_hamiltonian(Q.template cast<double>(), g), filling);
  ObservableRecord rec;
  rec.n = density(gs);
  rec.cdw = cdw_of(rec.n);
  rec.hop = correlation(gs, 0, 1);
  rec.nnn = correlation(gs, 0, 2);
  rec.gs_energy = gs.band_energy() + 0.5 * g * Q.template cast<double>().sum();
  return rec;
}

}  // namespace peal
