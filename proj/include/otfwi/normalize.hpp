#pragma once

#include "otfwi/types.hpp"

namespace otfwi {

enum class NormMethod { linear, sign_sensitive, exponential };

struct NormConfig {
  NormMethod method = NormMethod::sign_sensitive;
  /// Explicit scaling parameter; 0 selects c_scale / max|signal| per pair.
  double c = 0.0;
  double c_scale = 10.0;
  /// When false the adjoint-source chain treats the normalization as a fixed
  /// pointwise scaling (the mass-coupling term is dropped).
  bool differentiate = true;
};

/// Nonnegative unit-mass density derived from a trace (trapezoid mass rule).
struct NormalizedSignal {
  ArrayXd density;
  TimeAxis axis;
  double mass_scale = 1.0;  // b, the normalizing denominator
  NormMethod method = NormMethod::linear;
  double c = 0.0;
};

/// Captures d f_tilde / d f for one normalized trace: with f_tilde = p(f)/b,
/// b = <p(f)>, the transpose action is
///   (J^T v)_j = p'(f_j)/b * (v_j - w_j <v, f_tilde>),
/// where w are the trapezoid weights of the time axis.
class NormalizationJacobian {
 public:
  NormalizationJacobian() = default;
  NormalizationJacobian(ArrayXd pointwise_deriv, ArrayXd density, ArrayXd weights,
                        double mass_scale)
      : d_(std::move(pointwise_deriv)),
        density_(std::move(density)),
        w_(std::move(weights)),
        b_(mass_scale) {}

  ArrayXd apply_transpose(const ArrayXd& v) const;
  /// Diagonal part only (normalization frozen at its current mass scale).
  ArrayXd apply_transpose_frozen(const ArrayXd& v) const;
  /// Forward action J v, used by the symmetry checks in the tests.
  ArrayXd apply(const ArrayXd& v) const;

  bool valid() const { return d_.size() > 0; }
  Eigen::Index size() const { return d_.size(); }

 private:
  ArrayXd d_;        // p'(f)
  ArrayXd density_;  // f_tilde
  ArrayXd w_;
  double b_ = 1.0;
};

/// Trapezoid quadrature weights of a uniform time axis.
ArrayXd trapezoid_weights(const TimeAxis& axis);

/// Shift both traces by the pair constant c = -min(f, g) and scale each to
/// unit mass. Degenerate (zero-mass) inputs throw numeric_error.
std::pair<NormalizedSignal, NormalizedSignal> normalize_linear(
    const Trace& f, const Trace& g, NormalizationJacobian* jac_f = nullptr,
    NormalizationJacobian* jac_g = nullptr);

/// Sign-sensitive C^1 map: p(f) = f + 1/c on f >= 0, (1/c) exp(c f) on f < 0.
NormalizedSignal normalize_signsensitive(const Trace& f, double c,
                                         NormalizationJacobian* jac = nullptr);

/// p(f) = exp(c f); requires c * max|f| <= 700.
NormalizedSignal normalize_exponential(const Trace& f, double c,
                                       NormalizationJacobian* jac = nullptr);

ArrayXd apply_normalization_jacobian_transpose(const NormalizationJacobian& jac,
                                               const ArrayXd& v);

/// Default parameter choice c = scale / max-amplitude.
double default_c(double max_abs_amplitude, double scale = 10.0);

/// Whole-gather (2D) normalization used by the Monge-Ampere misfit. Mass is
/// the plain nodal sum times the cell area, matching the solver quadrature.
struct NormalizedGather {
  MatrixXd density;
  double mass_scale = 1.0;
  NormMethod method = NormMethod::linear;
  double c = 0.0;
  double cell_area = 1.0;
  MatrixXd pointwise_deriv;
};

NormalizedGather normalize_gather(const MatrixXd& f, NormMethod method, double c,
                                  double cell_area);
MatrixXd gather_jacobian_transpose(const NormalizedGather& g, const MatrixXd& v,
                                   bool full_chain = true);

}  // namespace otfwi
