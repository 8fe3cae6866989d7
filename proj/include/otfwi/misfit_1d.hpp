#pragma once

#include <string>
#include <vector>

#include "otfwi/normalize.hpp"
#include "otfwi/types.hpp"

namespace otfwi {

/// Cumulative distribution sampled on density knots; values are
/// nondecreasing with values[0] = 0 and back() == 1.
struct Cdf {
  ArrayXd knots;
  ArrayXd values;
};

/// Misfit value plus the derivative of the value with respect to every
/// synthetic data sample (the adjoint source of the adjoint wave equation).
struct MisfitEval {
  double value = 0.0;
  ShotRecord adjoint_source;
  std::vector<std::string> warnings;
};

/// 1D optimal transport between densities sampled on uniform knot grids.
/// All quadratures are trapezoidal; derivative conventions are the exact
/// discrete partials of the implemented sums, valid against mass-preserving
/// perturbations.
namespace ot1d {

Cdf cdf(const ArrayXd& knots, const ArrayXd& density);

/// Generalized inverse inf{t : F(t) >= y}; linear interpolation between
/// knots, left endpoint on flat segments.
double quantile(const Cdf& F, double y);

/// T(t_i) = G^{-1}(F(t_i)) sampled on f's knots; nondecreasing.
ArrayXd optimal_map(const ArrayXd& knots_f, const ArrayXd& f, const ArrayXd& knots_g,
                    const ArrayXd& g);

double w2_squared(const ArrayXd& knots_f, const ArrayXd& f, const ArrayXd& knots_g,
                  const ArrayXd& g);

/// Discrete partials of w2_squared with respect to the samples of f:
/// |t - T(t)|^2 w + one reverse cumulative sum of the transported residual.
/// g is clamped below at g_floor_rel * max(g) inside dG^{-1}/dy; *clamped
/// reports whether the clamp fired.
ArrayXd w2_frechet(const ArrayXd& knots_f, const ArrayXd& f, const ArrayXd& knots_g,
                   const ArrayXd& g, double g_floor_rel = 1e-12,
                   bool* clamped = nullptr);

}  // namespace ot1d

// Trace-level wrappers over normalized signals.
Cdf cdf(const NormalizedSignal& density);
double quantile(const Cdf& F, double y);
ArrayXd optimal_map_1d(const NormalizedSignal& f, const NormalizedSignal& g);
double w2_squared_1d(const NormalizedSignal& f, const NormalizedSignal& g);
ArrayXd w2_frechet_1d(const NormalizedSignal& f, const NormalizedSignal& g,
                      bool* clamped = nullptr);

/// J0 = 1/2 sum_r sum_n |f - g|^2 dt with adjoint source (f - g) dt.
MisfitEval misfit_l2(const ShotRecord& f, const ShotRecord& g);

/// J1 = sum_r W2^2(N(f_r), N(g_r)) under the configured normalization;
/// adjoint source chains the Frechet derivative through the normalization.
/// Degenerate traces contribute zero with a warning.
MisfitEval misfit_j1(const ShotRecord& f, const ShotRecord& g, const NormConfig& cfg);

/// J3 = sum_r W2^2(P f_r, P g_r) + W2^2(P(-f_r), P(-g_r)) with P the
/// sign-sensitive normalization; cfg.c == 0 selects c from the observed
/// gather amplitude.
MisfitEval misfit_j3(const ShotRecord& f, const ShotRecord& g, const NormConfig& cfg);

}  // namespace otfwi
