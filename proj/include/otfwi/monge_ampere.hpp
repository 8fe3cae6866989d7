#pragma once

#include <Eigen/Sparse>

#include "otfwi/misfit_1d.hpp"
#include "otfwi/normalize.hpp"
#include "otfwi/types.hpp"

namespace otfwi::ma {

enum class MaScheme {
  auto_filtered,  // Newton on the filtered scheme, monotone fallback on stall
  monotone,       // pin the monotone scheme (first order, very robust; keeps
                  // value/gradient pairs consistent across perturbed solves)
  filtered        // filtered scheme only; stall raises numeric_error
};

struct MaConfig {
  MaScheme scheme = MaScheme::auto_filtered;
  double delta = 0.0;    // monotonicity floor; 0 = auto from Lipschitz estimate
  double epsilon = 0.0;  // filter scale; 0 = sqrt(h)
  /// Uniform background mixed into both densities, (1-t) f + t uniform:
  /// bounds f/g in vacuum regions while moving only t of the mass.
  double background_mix = 1e-3;
  double density_floor_rel = 1e-5;
  double newton_tol = 1e-8;
  int max_iters = 100;
  int max_backtracks = 20;
};

/// Discrete optimal-transport problem det(D^2 u) = f / g(grad u) with the
/// transport Neumann condition grad u . nu = x . nu on a rectangle with
/// square cells. The longer axis is scaled to unit length so delta and
/// epsilon are dimensionless.
struct MaProblem {
  MatrixXd f, g;  // strictly positive, unit nodal mass (sum * h^2 = 1)
  int n1 = 0, n2 = 0;
  double h = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double lipschitz_k = 0.0;
  double g_eval_floor = 0.0;  // smooth floor used when interpolating g
  int fixed_i = 0, fixed_j = 0;  // node whose value the scheme pins
  double pinned_value = 0.0;

  double x1(int i) const { return i * h; }
  double x2(int j) const { return j * h; }
  double len1() const { return (n1 - 1) * h; }
  double len2() const { return (n2 - 1) * h; }
  long n_nodes() const { return static_cast<long>(n1) * n2; }

  /// Floors, renormalizes and boxes a density pair. Auto delta uses the
  /// grid-difference Lipschitz estimate of f/g over the effective support
  /// of g, capped so the filter can still reach the second-order branch.
  static MaProblem from_densities(const MatrixXd& f_raw, const MatrixXd& g_raw,
                                  const MaConfig& cfg = {});
};

struct MaSolution {
  MatrixXd u;
  MatrixXd map1, map2;  // discrete gradient of u (the transport map)
  double residual_norm = 0.0;
  int newton_iters = 0;
  double filter_fraction = 0.0;  // interior share deferring to the monotone value
  // Set when u solves the monotone scheme (pinned by config or the filtered
  // iteration stalled); the Frechet derivative then differentiates that scheme.
  bool monotone_fallback = false;
  std::vector<double> residual_history;
};

/// Monotone residual grid: -min(MA1, MA2) at interior nodes (axis and
/// diagonal stencils with the delta max/min splitting), one-sided Neumann
/// residuals on the boundary.
MatrixXd ma_monotone_residual(const MatrixXd& u, const MaProblem& prob);

/// Standard second-order residual grid (centred differences, cross term).
MatrixXd ma_standard_residual(const MatrixXd& u, const MaProblem& prob);

/// Filtered blend M_M + eps * S((M_N - M_M)/eps) with the piecewise-linear
/// filter S (identity on [-1,1], support [-2,2]).
MatrixXd ma_filtered_residual(const MatrixXd& u, const MaProblem& prob,
                              double* filter_fraction = nullptr);

/// Exact sparse Jacobian of the filtered residual at u (active branches).
Eigen::SparseMatrix<double> ma_filtered_jacobian(const MatrixXd& u, const MaProblem& prob);

/// Damped Newton on the filtered scheme from the identity-map potential.
/// Throws numeric_error (with residual history in the message) if the
/// iteration stagnates or exceeds cfg.max_iters.
MaSolution ma_solve(const MaProblem& prob, const MaConfig& cfg = {});

/// sum over nodes of f(x) |x - grad u(x)|^2 h^2, in box units.
double w2_squared_2d(const MaSolution& sol, const MaProblem& prob);

/// Gradient of w2_squared_2d with respect to the density f, holding g fixed:
/// the explicit diag(f) term plus one transposed sparse solve through the
/// scheme Jacobian. Valid against mass-preserving perturbations.
MatrixXd w2_frechet_2d(const MaSolution& sol, const MaProblem& prob);

/// J2: whole-gather W2^2 via the Monge-Ampere solve; gathers are normalized
/// as 2D densities and boxed with square cells. The adjoint source chains
/// the Frechet derivative through flooring, renormalization and the data
/// normalization. Solver failures propagate as numeric_error.
MisfitEval misfit_j2(const ShotRecord& f, const ShotRecord& g, const NormConfig& norm_cfg,
                     const MaConfig& ma_cfg = {}, MaSolution* solution_out = nullptr);

}  // namespace otfwi::ma
