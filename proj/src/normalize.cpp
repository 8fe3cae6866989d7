#include "otfwi/normalize.hpp"

#include <cmath>

namespace otfwi {

namespace {

double pointwise(NormMethod method, double f, double c) {
  switch (method) {
    case NormMethod::linear:
      return f + c;
    case NormMethod::sign_sensitive:
      return f >= 0.0 ? f + 1.0 / c : std::exp(c * f) / c;
    case NormMethod::exponential:
      return std::exp(c * f);
  }
  return 0.0;
}

double pointwise_deriv(NormMethod method, double f, double c) {
  switch (method) {
    case NormMethod::linear:
      return 1.0;
    case NormMethod::sign_sensitive:
      return f >= 0.0 ? 1.0 : std::exp(c * f);
    case NormMethod::exponential:
      return c * std::exp(c * f);
  }
  return 0.0;
}

NormalizedSignal build(const Trace& f, NormMethod method, double c,
                       NormalizationJacobian* jac) {
  const ArrayXd w = trapezoid_weights(f.axis);
  ArrayXd p(f.values.size());
  ArrayXd d(f.values.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p(i) = pointwise(method, f.values(i), c);
    d(i) = pointwise_deriv(method, f.values(i), c);
  }
  const double b = (w * p).sum();
  const double ref = (w * (p.abs() + 1e-300)).sum();
  if (!(b > 0.0) || b < 1e-13 * ref)
    throw numeric_error("normalization: degenerate input (zero total mass after shift)");

  NormalizedSignal out;
  out.density = p / b;
  out.axis = f.axis;
  out.mass_scale = b;
  out.method = method;
  out.c = c;
  if (jac) *jac = NormalizationJacobian(std::move(d), out.density, w, b);
  return out;
}

}  // namespace

ArrayXd trapezoid_weights(const TimeAxis& axis) {
  ArrayXd w = ArrayXd::Constant(axis.nt, axis.dt);
  w(0) = 0.5 * axis.dt;
  w(axis.nt - 1) = 0.5 * axis.dt;
  return w;
}

ArrayXd NormalizationJacobian::apply_transpose(const ArrayXd& v) const {
  const double inner = (v * density_).sum();
  return d_ / b_ * (v - w_ * inner);
}

ArrayXd NormalizationJacobian::apply_transpose_frozen(const ArrayXd& v) const {
  return d_ / b_ * v;
}

ArrayXd NormalizationJacobian::apply(const ArrayXd& v) const {
  const ArrayXd dv = d_ * v;
  return dv / b_ - density_ * (w_ * dv).sum() / b_;
}

std::pair<NormalizedSignal, NormalizedSignal> normalize_linear(
    const Trace& f, const Trace& g, NormalizationJacobian* jac_f,
    NormalizationJacobian* jac_g) {
  if (!(f.axis == g.axis)) throw config_error("normalize_linear: axes differ");
  const double c = -std::min(f.values.minCoeff(), g.values.minCoeff());
  return {build(f, NormMethod::linear, c, jac_f),
          build(g, NormMethod::linear, c, jac_g)};
}

NormalizedSignal normalize_signsensitive(const Trace& f, double c,
                                         NormalizationJacobian* jac) {
  if (!(c > 0.0)) throw config_error("normalize_signsensitive: c must be positive");
  return build(f, NormMethod::sign_sensitive, c, jac);
}

NormalizedSignal normalize_exponential(const Trace& f, double c,
                                       NormalizationJacobian* jac) {
  if (!(c > 0.0)) throw config_error("normalize_exponential: c must be positive");
  const double m = f.values.abs().maxCoeff();
  if (c * m > 700.0)
    throw config_error("normalize_exponential: c * max|f| = " + std::to_string(c * m) +
                       " would overflow (limit 700)");
  return build(f, NormMethod::exponential, c, jac);
}

ArrayXd apply_normalization_jacobian_transpose(const NormalizationJacobian& jac,
                                               const ArrayXd& v) {
  if (!jac.valid() || jac.size() != v.size())
    throw config_error("normalization jacobian does not match vector length");
  return jac.apply_transpose(v);
}

double default_c(double max_abs_amplitude, double scale) {
  return scale / std::max(max_abs_amplitude, 1e-12);
}

NormalizedGather normalize_gather(const MatrixXd& f, NormMethod method, double c,
                                  double cell_area) {
  if (method != NormMethod::linear && !(c > 0.0))
    throw config_error("normalize_gather: c must be positive");
  NormalizedGather out;
  out.method = method;
  out.c = c;
  out.cell_area = cell_area;
  MatrixXd p(f.rows(), f.cols());
  out.pointwise_deriv.resize(f.rows(), f.cols());
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      p(i, j) = pointwise(method, f(i, j), c);
      out.pointwise_deriv(i, j) = pointwise_deriv(method, f(i, j), c);
    }
  const double b = p.sum() * cell_area;
  if (!(b > 0.0) || b < 1e-13 * (p.cwiseAbs().sum() * cell_area + 1e-300))
    throw numeric_error("normalize_gather: degenerate input (zero total mass)");
  out.density = p / b;
  out.mass_scale = b;
  return out;
}

MatrixXd gather_jacobian_transpose(const NormalizedGather& g, const MatrixXd& v,
                                   bool full_chain) {
  if (v.rows() != g.density.rows() || v.cols() != g.density.cols())
    throw config_error("gather_jacobian_transpose: shape mismatch");
  if (!full_chain) return g.pointwise_deriv.cwiseProduct(v) / g.mass_scale;
  const double inner = v.cwiseProduct(g.density).sum();
  return g.pointwise_deriv.cwiseProduct(
             v - MatrixXd::Constant(v.rows(), v.cols(), g.cell_area * inner)) /
         g.mass_scale;
}

}  // namespace otfwi
