#include "otfwi/misfit_1d.hpp"

#include <algorithm>
#include <cmath>

namespace otfwi {

namespace ot1d {

namespace {

// Trapezoid weights for (possibly non-uniform) knots.
ArrayXd knot_weights(const ArrayXd& knots) {
  const Eigen::Index n = knots.size();
  ArrayXd w = ArrayXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = knots(i + 1) - knots(i);
    w(i) += 0.5 * h;
    w(i + 1) += 0.5 * h;
  }
  return w;
}

// Index k of the CDF segment (k-1, k] resolving quantile y, 0 if y <= 0.
Eigen::Index quantile_segment(const Cdf& F, double y) {
  const double* begin = F.values.data();
  const double* end = begin + F.values.size();
  const double* it = std::lower_bound(begin, end, y);
  return std::min<Eigen::Index>(it - begin, F.values.size() - 1);
}

double quantile_at(const Cdf& F, double y, Eigen::Index k) {
  if (k <= 0) return F.knots(0);
  const double dF = F.values(k) - F.values(k - 1);
  if (dF <= 0.0) return F.knots(k - 1);
  const double frac = (y - F.values(k - 1)) / dF;
  return F.knots(k - 1) + frac * (F.knots(k) - F.knots(k - 1));
}

}  // namespace

Cdf cdf(const ArrayXd& knots, const ArrayXd& density) {
  if (knots.size() != density.size() || knots.size() < 2)
    throw config_error("cdf: knots/density size mismatch");
  if (density.minCoeff() < -1e-12 * std::max(density.maxCoeff(), 0.0))
    throw config_error("cdf: density has negative entries");
  Cdf F;
  F.knots = knots;
  F.values.resize(knots.size());
  F.values(0) = 0.0;
  for (Eigen::Index i = 1; i < knots.size(); ++i)
    F.values(i) = F.values(i - 1) +
                  0.5 * (knots(i) - knots(i - 1)) * (density(i - 1) + density(i));
  const double total = F.values(knots.size() - 1);
  if (!(total > 0.0)) throw numeric_error("cdf: zero total mass");
  F.values /= total;
  return F;
}

double quantile(const Cdf& F, double y) {
  y = std::clamp(y, 0.0, 1.0);
  return quantile_at(F, y, quantile_segment(F, y));
}

ArrayXd optimal_map(const ArrayXd& knots_f, const ArrayXd& f, const ArrayXd& knots_g,
                    const ArrayXd& g) {
  const Cdf F = cdf(knots_f, f);
  const Cdf G = cdf(knots_g, g);
  ArrayXd T(knots_f.size());
  for (Eigen::Index i = 0; i < knots_f.size(); ++i) T(i) = ot1d::quantile(G, F.values(i));
  return T;
}

double w2_squared(const ArrayXd& knots_f, const ArrayXd& f, const ArrayXd& knots_g,
                  const ArrayXd& g) {
  const ArrayXd T = optimal_map(knots_f, f, knots_g, g);
  const ArrayXd w = knot_weights(knots_f);
  return (w * f * (knots_f - T).square()).sum();
}

ArrayXd w2_frechet(const ArrayXd& knots_f, const ArrayXd& f, const ArrayXd& knots_g,
                   const ArrayXd& g, double g_floor_rel, bool* clamped) {
  const Eigen::Index n = knots_f.size();
  const Cdf F = cdf(knots_f, f);
  const Cdf G = cdf(knots_g, g);
  const ArrayXd w = knot_weights(knots_f);
  const double g_floor = g_floor_rel * g.maxCoeff();
  if (clamped) *clamped = false;

  // a_i = dW/dF_i: the transported residual weighted by the map slope
  // 1/g(T(t_i)) from the active interpolation segment of G.
  ArrayXd T(n), a(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index k = quantile_segment(G, F.values(i));
    T(i) = quantile_at(G, F.values(i), k);
    if (k <= 0) k = 1;
    const double seg = knots_g(k) - knots_g(k - 1);
    double gbar = (G.values(k) - G.values(k - 1)) / seg;
    if (gbar < g_floor) {
      gbar = std::max(g_floor, 1e-300);
      if (clamped) *clamped = true;
    }
    a(i) = -2.0 * w(i) * f(i) * (knots_f(i) - T(i)) / gbar;
  }

  // grad_j = w_j |t_j - T_j|^2 + sum_i a_i dF_i/df_j, via one reverse
  // cumulative sum (dF_i/df_j = w_j for j < i, half-segment at j = i).
  ArrayXd grad = w * (knots_f - T).square();
  double tail = 0.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const double halfseg = j >= 1 ? 0.5 * (knots_f(j) - knots_f(j - 1)) : 0.0;
    grad(j) += w(j) * tail + halfseg * a(j);
    tail += a(j);
  }
  return grad;
}

}  // namespace ot1d

namespace {

ArrayXd axis_knots(const TimeAxis& axis) {
  return ArrayXd::LinSpaced(axis.nt, 0.0, axis.duration());
}

void check_pair_geometry(const ShotRecord& f, const ShotRecord& g, const char* who) {
  if (f.data.rows() != g.data.rows() || f.data.cols() != g.data.cols() ||
      !(f.axis == g.axis))
    throw config_error(std::string(who) + ": synthetic/observed geometry mismatch");
}

}  // namespace

Cdf cdf(const NormalizedSignal& density) {
  return ot1d::cdf(axis_knots(density.axis), density.density);
}

double quantile(const Cdf& F, double y) { return ot1d::quantile(F, y); }

ArrayXd optimal_map_1d(const NormalizedSignal& f, const NormalizedSignal& g) {
  return ot1d::optimal_map(axis_knots(f.axis), f.density, axis_knots(g.axis), g.density);
}

double w2_squared_1d(const NormalizedSignal& f, const NormalizedSignal& g) {
  return ot1d::w2_squared(axis_knots(f.axis), f.density, axis_knots(g.axis), g.density);
}

ArrayXd w2_frechet_1d(const NormalizedSignal& f, const NormalizedSignal& g,
                      bool* clamped) {
  return ot1d::w2_frechet(axis_knots(f.axis), f.density, axis_knots(g.axis), g.density,
                          1e-12, clamped);
}

MisfitEval misfit_l2(const ShotRecord& f, const ShotRecord& g) {
  check_pair_geometry(f, g, "misfit_l2");
  MisfitEval out;
  const MatrixXd diff = f.data - g.data;
  out.value = 0.5 * f.axis.dt * diff.squaredNorm();
  out.adjoint_source.data = f.axis.dt * diff;
  out.adjoint_source.axis = f.axis;
  out.adjoint_source.shot_id = f.shot_id;
  return out;
}

MisfitEval misfit_j1(const ShotRecord& f, const ShotRecord& g, const NormConfig& cfg) {
  check_pair_geometry(f, g, "misfit_j1");
  MisfitEval out;
  out.adjoint_source.data = MatrixXd::Zero(f.data.rows(), f.data.cols());
  out.adjoint_source.axis = f.axis;
  out.adjoint_source.shot_id = f.shot_id;

  // Auto parameter from the observed gather only, so it stays fixed while
  // the synthetic side is perturbed.
  const double c_auto = default_c(g.data.cwiseAbs().maxCoeff(), cfg.c_scale);
  bool any_clamped = false;

  for (int r = 0; r < f.n_receivers(); ++r) {
    const Trace tf = f.trace(r);
    const Trace tg = g.trace(r);
    NormalizationJacobian jac;
    NormalizedSignal nf, ng;
    try {
      switch (cfg.method) {
        case NormMethod::linear: {
          auto pair = normalize_linear(tf, tg, &jac, nullptr);
          nf = std::move(pair.first);
          ng = std::move(pair.second);
          break;
        }
        case NormMethod::sign_sensitive:
          nf = normalize_signsensitive(tf, cfg.c > 0 ? cfg.c : c_auto, &jac);
          ng = normalize_signsensitive(tg, cfg.c > 0 ? cfg.c : c_auto);
          break;
        case NormMethod::exponential:
          nf = normalize_exponential(tf, cfg.c > 0 ? cfg.c : c_auto, &jac);
          ng = normalize_exponential(tg, cfg.c > 0 ? cfg.c : c_auto);
          break;
      }
    } catch (const numeric_error&) {
      out.warnings.push_back("receiver " + std::to_string(r) +
                             ": degenerate normalization, trace contributes zero");
      continue;
    }
    out.value += w2_squared_1d(nf, ng);
    bool clamped = false;
    const ArrayXd fre = w2_frechet_1d(nf, ng, &clamped);
    any_clamped = any_clamped || clamped;
    out.adjoint_source.data.row(r) =
        (cfg.differentiate ? jac.apply_transpose(fre) : jac.apply_transpose_frozen(fre))
            .matrix()
            .transpose();
  }
  if (any_clamped)
    out.warnings.push_back("target density clamped at g_floor inside dG^-1/dy");
  return out;
}

MisfitEval misfit_j3(const ShotRecord& f, const ShotRecord& g, const NormConfig& cfg) {
  check_pair_geometry(f, g, "misfit_j3");
  MisfitEval out;
  out.adjoint_source.data = MatrixXd::Zero(f.data.rows(), f.data.cols());
  out.adjoint_source.axis = f.axis;
  out.adjoint_source.shot_id = f.shot_id;

  const double c =
      cfg.c > 0 ? cfg.c : default_c(g.data.cwiseAbs().maxCoeff(), cfg.c_scale);

  for (int r = 0; r < f.n_receivers(); ++r) {
    const Trace tf = f.trace(r);
    const Trace tg = g.trace(r);
    const Trace tf_neg(-tf.values, tf.axis);
    const Trace tg_neg(-tg.values, tg.axis);

    NormalizationJacobian jac_pos, jac_neg;
    const NormalizedSignal nf = normalize_signsensitive(tf, c, &jac_pos);
    const NormalizedSignal ng = normalize_signsensitive(tg, c);
    const NormalizedSignal nf_neg = normalize_signsensitive(tf_neg, c, &jac_neg);
    const NormalizedSignal ng_neg = normalize_signsensitive(tg_neg, c);

    out.value += w2_squared_1d(nf, ng) + w2_squared_1d(nf_neg, ng_neg);

    const ArrayXd fre_pos = w2_frechet_1d(nf, ng);
    const ArrayXd fre_neg = w2_frechet_1d(nf_neg, ng_neg);
    ArrayXd adj;
    if (cfg.differentiate)
      adj = jac_pos.apply_transpose(fre_pos) - jac_neg.apply_transpose(fre_neg);
    else
      adj = jac_pos.apply_transpose_frozen(fre_pos) -
            jac_neg.apply_transpose_frozen(fre_neg);
    out.adjoint_source.data.row(r) = adj.matrix().transpose();
  }
  return out;
}

}  // namespace otfwi
