#include "otfwi/monge_ampere.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace otfwi::ma {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

struct GEval {
  double val, d1, d2;  // value and gradient of the bilinear interpolant
};

// Catmull-Rom weights and their t-derivatives for samples p0..p3, t in [0,1].
inline void cr_weights(double t, double w[4], double dw[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
  dw[0] = 0.5 * (-3 * t2 + 4 * t - 1);
  dw[1] = 0.5 * (9 * t2 - 10 * t);
  dw[2] = 0.5 * (-9 * t2 + 8 * t + 1);
  dw[3] = 0.5 * (3 * t2 - 2 * t);
}

// C1 (bicubic Catmull-Rom) interpolation of g at a box point, clamped to the
// box with flat extension. A smooth interpolant keeps the Newton model of
// the f/g term honest; a positivity guard bounds cubic undershoot away from
// zero (the guard region carries negligible mass).
GEval interp_g(const MaProblem& p, double p1, double p2) {
  const double s1 = std::clamp(p1 / p.h, 0.0, static_cast<double>(p.n1 - 1));
  const double s2 = std::clamp(p2 / p.h, 0.0, static_cast<double>(p.n2 - 1));
  const int i0 = std::min(static_cast<int>(s1), p.n1 - 2);
  const int j0 = std::min(static_cast<int>(s2), p.n2 - 2);
  const double a = s1 - i0, b = s2 - j0;
  auto gi = [&](int i, int j) {
    return p.g(std::clamp(i, 0, p.n1 - 1), std::clamp(j, 0, p.n2 - 1));
  };
  double wa[4], dwa[4], wb[4], dwb[4];
  cr_weights(a, wa, dwa);
  cr_weights(b, wb, dwb);

  GEval out{0.0, 0.0, 0.0};
  double bilin = 0.0;
  for (int di = 0; di < 4; ++di) {
    double row = 0.0, drow = 0.0;
    for (int dj = 0; dj < 4; ++dj) {
      const double v = gi(i0 - 1 + di, j0 - 1 + dj);
      row += wb[dj] * v;
      drow += dwb[dj] * v;
    }
    out.val += wa[di] * row;
    out.d1 += dwa[di] * row;
    out.d2 += wa[di] * drow;
  }
  const bool in1 = p1 > 0.0 && p1 < p.len1();
  const bool in2 = p2 > 0.0 && p2 < p.len2();
  out.d1 = in1 ? out.d1 / p.h : 0.0;
  out.d2 = in2 ? out.d2 / p.h : 0.0;
  // Smooth positivity floor: g_s = (g + sqrt(g^2 + fl^2))/2 stays C^1,
  // approaches g away from the floor and fl/2 under cubic undershoot.
  const double fl = p.g_eval_floor;
  const double root = std::sqrt(out.val * out.val + fl * fl);
  const double slope = 0.5 * (1.0 + out.val / root);
  out.val = 0.5 * (out.val + root);
  out.d1 *= slope;
  out.d2 *= slope;
  return out;
}

double filter_s(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return x;
  if (ax >= 2.0) return 0.0;
  return x > 0 ? 2.0 - x : -2.0 - x;
}

double filter_s_prime(double x) {
  const double ax = std::abs(x);
  if (ax < 1.0) return 1.0;
  if (ax > 2.0) return 0.0;
  return ax == 1.0 ? 1.0 : -1.0;  // subgradient choice on the down-slopes
}

enum class Mode { monotone, standard, filtered };

using Triplet = Eigen::Triplet<double>;

// Assembles the residual (always), the Jacobian triplets (optional) and the
// diagonal dResidual/df for interior rows (optional) in one pass, so the
// branch selection cannot drift between the three.
struct Assembly {
  VectorXd residual;
  std::vector<Triplet>* triplets = nullptr;
  VectorXd* dres_df = nullptr;
  int deferred_nodes = 0;
  int interior_nodes = 0;
};

void assemble(const MatrixXd& U, const MaProblem& p, Mode mode, Assembly& out) {
  const int n1 = p.n1, n2 = p.n2;
  const double h = p.h, delta = p.delta, eps = p.epsilon;
  const long N = p.n_nodes();
  const long fix = static_cast<long>(p.fixed_i) * n2 + p.fixed_j;
  out.residual.resize(N);
  if (out.dres_df) out.dres_df->setZero(N);
  out.deferred_nodes = 0;
  out.interior_nodes = 0;

  auto idx = [n2](int i, int j) { return static_cast<long>(i) * n2 + j; };
  auto push = [&](long row, long col, double v) {
    if (out.triplets) out.triplets->emplace_back(static_cast<int>(row), static_cast<int>(col), v);
  };

  const double u_fix = U(p.fixed_i, p.fixed_j) - p.pinned_value;

  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const long row = idx(i, j);
      const bool top = (i == 0), bottom = (i == n1 - 1);
      const bool left = (j == 0), right = (j == n2 - 1);

      if (top || bottom || left || right) {
        // Transport Neumann condition grad u . nu = x . nu. The monotone
        // scheme uses 2-point one-sided differences (keeps the comparison
        // principle); the standard scheme uses 3-point second-order ones;
        // the filter blends them like the interior rows.
        double nrm = (top || bottom ? 1.0 : 0.0) + (left || right ? 1.0 : 0.0);
        nrm = std::sqrt(nrm);
        double r_m = 0.0, r_n = 0.0;
        struct Stamp {
          long col;
          double v_m, v_n;
        };
        Stamp stamps[6];
        int n_stamps = 0;
        auto edge = [&](int ei, int ej, int di, int dj, double xnu) {
          // outward normal component: one-sided derivative toward (di, dj)
          const double um0 = U(ei, ej), um1 = U(ei + di, ej + dj);
          const double um2 = U(ei + 2 * di, ej + 2 * dj);
          const double d_m = (um0 - um1) / h;                      // 2-point
          const double d_n = (3 * um0 - 4 * um1 + um2) / (2 * h);  // 3-point
          r_m += (d_m - xnu) / nrm;
          r_n += (d_n - xnu) / nrm;
          stamps[n_stamps++] = {idx(ei, ej), 1.0 / h / nrm, 3.0 / (2 * h) / nrm};
          stamps[n_stamps++] = {idx(ei + di, ej + dj), -1.0 / h / nrm, -4.0 / (2 * h) / nrm};
          stamps[n_stamps++] = {idx(ei + 2 * di, ej + 2 * dj), 0.0, 1.0 / (2 * h) / nrm};
        };
        if (top) edge(0, j, 1, 0, -p.x1(0));
        else if (bottom) edge(i, j, -1, 0, p.x1(i));
        if (left) edge(i, 0, 0, 1, -p.x2(0));
        else if (right) edge(i, j, 0, -1, p.x2(j));

        double res = 0.0, w_m = 1.0, w_n = 0.0;
        switch (mode) {
          case Mode::monotone:
            res = r_m;
            break;
          case Mode::standard:
            res = r_n;
            w_m = 0.0;
            w_n = 1.0;
            break;
          case Mode::filtered: {
            const double chi = (r_n - r_m) / eps;
            res = r_m + eps * filter_s(chi);
            const double sp = filter_s_prime(chi);
            w_m = 1.0 - sp;
            w_n = sp;
            break;
          }
        }
        out.residual(row) = res;
        for (int k = 0; k < n_stamps; ++k)
          push(row, stamps[k].col, w_m * stamps[k].v_m + w_n * stamps[k].v_n);
        continue;
      }

      ++out.interior_nodes;
      const double uc = U(i, j);
      const double d11 = (U(i + 1, j) - 2 * uc + U(i - 1, j)) / (h * h);
      const double d22 = (U(i, j + 1) - 2 * uc + U(i, j - 1)) / (h * h);
      const double d1 = (U(i + 1, j) - U(i - 1, j)) / (2 * h);
      const double d2 = (U(i, j + 1) - U(i, j - 1)) / (2 * h);
      const double dvv = (U(i + 1, j + 1) - 2 * uc + U(i - 1, j - 1)) / (2 * h * h);
      const double dww = (U(i + 1, j - 1) - 2 * uc + U(i - 1, j + 1)) / (2 * h * h);
      const double dv = (U(i + 1, j + 1) - U(i - 1, j - 1)) / (2 * kSqrt2 * h);
      const double dw = (U(i + 1, j - 1) - U(i - 1, j + 1)) / (2 * kSqrt2 * h);
      const double d12 =
          (U(i + 1, j + 1) + U(i - 1, j - 1) - U(i + 1, j - 1) - U(i - 1, j + 1)) /
          (4 * h * h);
      const double fij = p.f(i, j);

      const GEval g_ax = interp_g(p, d1, d2);
      const double pd1 = (dv + dw) / kSqrt2, pd2 = (dv - dw) / kSqrt2;
      const GEval g_dg = interp_g(p, pd1, pd2);

      const double ma1 = std::max(d11, delta) * std::max(d22, delta) +
                         std::min(d11, delta) + std::min(d22, delta) -
                         fij / g_ax.val - u_fix;
      const double ma2 = std::max(dvv, delta) * std::max(dww, delta) +
                         std::min(dvv, delta) + std::min(dww, delta) -
                         fij / g_dg.val - u_fix;
      const bool pick1 = ma1 <= ma2;
      const double mm = -std::min(ma1, ma2);
      const double mn = -(d11 * d22 - d12 * d12) + fij / g_ax.val + u_fix;

      double res = 0.0, sp = 0.0, chi = 0.0;
      switch (mode) {
        case Mode::monotone:
          res = mm;
          break;
        case Mode::standard:
          res = mn;
          break;
        case Mode::filtered:
          chi = (mn - mm) / eps;
          res = mm + eps * filter_s(chi);
          sp = filter_s_prime(chi);
          if (std::abs(chi) > 1.0) ++out.deferred_nodes;
          break;
      }
      out.residual(row) = res;

      if (out.dres_df) {
        const double dmm_df = 1.0 / (pick1 ? g_ax.val : g_dg.val);
        const double dmn_df = 1.0 / g_ax.val;
        double v = 0.0;
        switch (mode) {
          case Mode::monotone: v = dmm_df; break;
          case Mode::standard: v = dmn_df; break;
          case Mode::filtered: v = dmm_df + sp * (dmn_df - dmm_df); break;
        }
        (*out.dres_df)(row) = v;
      }

      if (!out.triplets) continue;

      // Row weights: w_mm multiplies the selected monotone branch gradient,
      // w_mn the standard one. Always stamp the full 9-point + pinned-node
      // pattern so the sparsity stays fixed across Newton iterations.
      double w_mm = 0.0, w_mn = 0.0;
      switch (mode) {
        case Mode::monotone: w_mm = 1.0; break;
        case Mode::standard: w_mn = 1.0; break;
        case Mode::filtered:
          w_mm = 1.0 - sp;
          w_mn = sp;
          break;
      }

      double c_self = 0.0, c_ip = 0.0, c_im = 0.0, c_jp = 0.0, c_jm = 0.0;
      double c_pp = 0.0, c_mm_ = 0.0, c_pm = 0.0, c_mp = 0.0, c_fix = 0.0;

      // d(MA1)/du, weighted by -w_mm when MA1 selected (M_M = -min).
      if (w_mm != 0.0 && pick1) {
        const double s = -w_mm;
        const double cd11 = (d11 >= delta ? std::max(d22, delta) : 0.0) + (d11 < delta ? 1.0 : 0.0);
        const double cd22 = (d22 >= delta ? std::max(d11, delta) : 0.0) + (d22 < delta ? 1.0 : 0.0);
        c_ip += s * cd11 / (h * h);
        c_im += s * cd11 / (h * h);
        c_jp += s * cd22 / (h * h);
        c_jm += s * cd22 / (h * h);
        c_self += s * (-2.0 * cd11 - 2.0 * cd22) / (h * h);
        const double q = fij / (g_ax.val * g_ax.val);
        const double cp1 = q * g_ax.d1, cp2 = q * g_ax.d2;
        c_ip += s * cp1 / (2 * h);
        c_im -= s * cp1 / (2 * h);
        c_jp += s * cp2 / (2 * h);
        c_jm -= s * cp2 / (2 * h);
        c_fix += s * (-1.0);
      }
      // d(MA2)/du, weighted by -w_mm when MA2 selected.
      if (w_mm != 0.0 && !pick1) {
        const double s = -w_mm;
        const double cdvv = (dvv >= delta ? std::max(dww, delta) : 0.0) + (dvv < delta ? 1.0 : 0.0);
        const double cdww = (dww >= delta ? std::max(dvv, delta) : 0.0) + (dww < delta ? 1.0 : 0.0);
        c_pp += s * cdvv / (2 * h * h);
        c_mm_ += s * cdvv / (2 * h * h);
        c_pm += s * cdww / (2 * h * h);
        c_mp += s * cdww / (2 * h * h);
        c_self += s * (-cdvv - cdww) / (h * h);
        const double q = fij / (g_dg.val * g_dg.val);
        const double cp1 = q * g_dg.d1, cp2 = q * g_dg.d2;
        // p1 ~ u_x1 and p2 ~ u_x2 reconstructed from the diagonal stencil.
        c_pp += s * (cp1 + cp2) / (4 * h);
        c_mm_ -= s * (cp1 + cp2) / (4 * h);
        c_pm += s * (cp1 - cp2) / (4 * h);
        c_mp -= s * (cp1 - cp2) / (4 * h);
        c_fix += s * (-1.0);
      }
      // d(MN)/du, weighted by w_mn.
      if (w_mn != 0.0) {
        const double s = w_mn;
        c_ip += s * (-d22) / (h * h);
        c_im += s * (-d22) / (h * h);
        c_jp += s * (-d11) / (h * h);
        c_jm += s * (-d11) / (h * h);
        c_self += s * (2.0 * d22 + 2.0 * d11) / (h * h);
        const double cd12 = s * (2.0 * d12) / (4 * h * h);
        c_pp += cd12;
        c_mm_ += cd12;
        c_pm -= cd12;
        c_mp -= cd12;
        const double q = -fij / (g_ax.val * g_ax.val);
        const double cp1 = q * g_ax.d1, cp2 = q * g_ax.d2;
        c_ip += s * cp1 / (2 * h);
        c_im -= s * cp1 / (2 * h);
        c_jp += s * cp2 / (2 * h);
        c_jm -= s * cp2 / (2 * h);
        c_fix += s * 1.0;
      }

      push(row, idx(i, j), c_self);
      push(row, idx(i + 1, j), c_ip);
      push(row, idx(i - 1, j), c_im);
      push(row, idx(i, j + 1), c_jp);
      push(row, idx(i, j - 1), c_jm);
      push(row, idx(i + 1, j + 1), c_pp);
      push(row, idx(i - 1, j - 1), c_mm_);
      push(row, idx(i + 1, j - 1), c_pm);
      push(row, idx(i - 1, j + 1), c_mp);
      push(row, fix, c_fix);
    }
  }
}

VectorXd residual_vector(const MatrixXd& U, const MaProblem& p, Mode mode,
                         int* deferred = nullptr, int* interior = nullptr) {
  Assembly a;
  assemble(U, p, mode, a);
  if (deferred) *deferred = a.deferred_nodes;
  if (interior) *interior = a.interior_nodes;
  return a.residual;
}

MatrixXd to_grid(const VectorXd& v, int n1, int n2) {
  MatrixXd out(n1, n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) out(i, j) = v(static_cast<long>(i) * n2 + j);
  return out;
}

void check_u(const MatrixXd& u, const MaProblem& p, const char* who) {
  if (u.rows() != p.n1 || u.cols() != p.n2)
    throw config_error(std::string(who) + ": potential shape does not match problem");
  if (!(p.g.array() > 0.0).all()) throw config_error(std::string(who) + ": g must be positive");
}

// Discrete gradient along rows (x1): centered inside, second-order
// one-sided at the first/last row. Matches the map used by the W2 sum.
void gradient_operators(const MaProblem& p, Eigen::SparseMatrix<double>& D1,
                        Eigen::SparseMatrix<double>& D2) {
  const int n1 = p.n1, n2 = p.n2;
  const double h = p.h;
  const long N = p.n_nodes();
  auto idx = [n2](int i, int j) { return static_cast<long>(i) * n2 + j; };
  std::vector<Triplet> t1, t2;
  t1.reserve(static_cast<size_t>(3 * N));
  t2.reserve(static_cast<size_t>(3 * N));
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const int r = static_cast<int>(idx(i, j));
      if (i == 0) {
        t1.emplace_back(r, static_cast<int>(idx(0, j)), -3.0 / (2 * h));
        t1.emplace_back(r, static_cast<int>(idx(1, j)), 4.0 / (2 * h));
        t1.emplace_back(r, static_cast<int>(idx(2, j)), -1.0 / (2 * h));
      } else if (i == n1 - 1) {
        t1.emplace_back(r, static_cast<int>(idx(i, j)), 3.0 / (2 * h));
        t1.emplace_back(r, static_cast<int>(idx(i - 1, j)), -4.0 / (2 * h));
        t1.emplace_back(r, static_cast<int>(idx(i - 2, j)), 1.0 / (2 * h));
      } else {
        t1.emplace_back(r, static_cast<int>(idx(i + 1, j)), 1.0 / (2 * h));
        t1.emplace_back(r, static_cast<int>(idx(i - 1, j)), -1.0 / (2 * h));
      }
      if (j == 0) {
        t2.emplace_back(r, static_cast<int>(idx(i, 0)), -3.0 / (2 * h));
        t2.emplace_back(r, static_cast<int>(idx(i, 1)), 4.0 / (2 * h));
        t2.emplace_back(r, static_cast<int>(idx(i, 2)), -1.0 / (2 * h));
      } else if (j == n2 - 1) {
        t2.emplace_back(r, static_cast<int>(idx(i, j)), 3.0 / (2 * h));
        t2.emplace_back(r, static_cast<int>(idx(i, j - 1)), -4.0 / (2 * h));
        t2.emplace_back(r, static_cast<int>(idx(i, j - 2)), 1.0 / (2 * h));
      } else {
        t2.emplace_back(r, static_cast<int>(idx(i, j + 1)), 1.0 / (2 * h));
        t2.emplace_back(r, static_cast<int>(idx(i, j - 1)), -1.0 / (2 * h));
      }
    }
  D1.resize(N, N);
  D2.resize(N, N);
  D1.setFromTriplets(t1.begin(), t1.end());
  D2.setFromTriplets(t2.begin(), t2.end());
}

VectorXd flatten(const MatrixXd& m) {
  VectorXd v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

double trapezoid_weight(Eigen::Index i, Eigen::Index j, Eigen::Index n1, Eigen::Index n2) {
  const double wi = (i == 0 || i == n1 - 1) ? 0.5 : 1.0;
  const double wj = (j == 0 || j == n2 - 1) ? 0.5 : 1.0;
  return wi * wj;
}

double trapezoid_mass(const MatrixXd& d, double h) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      acc += trapezoid_weight(i, j, d.rows(), d.cols()) * d(i, j);
  return acc * h * h;
}

}  // namespace

MaProblem MaProblem::from_densities(const MatrixXd& f_raw, const MatrixXd& g_raw,
                                    const MaConfig& cfg) {
  if (f_raw.rows() != g_raw.rows() || f_raw.cols() != g_raw.cols())
    throw config_error("MaProblem: density shapes differ");
  if (f_raw.rows() < 3 || f_raw.cols() < 3)
    throw config_error("MaProblem: need at least a 3x3 grid");
  if (f_raw.minCoeff() < 0.0 || g_raw.minCoeff() < 0.0)
    throw config_error("MaProblem: densities must be nonnegative");

  MaProblem p;
  p.n1 = static_cast<int>(f_raw.rows());
  p.n2 = static_cast<int>(f_raw.cols());
  p.h = 1.0 / (std::max(p.n1, p.n2) - 1);
  p.fixed_i = p.n1 / 2;
  p.fixed_j = p.n2 / 2;

  const double fl_f = cfg.density_floor_rel * f_raw.maxCoeff();
  const double fl_g = cfg.density_floor_rel * g_raw.maxCoeff();
  p.f = f_raw.cwiseMax(fl_f);
  p.g = g_raw.cwiseMax(fl_g);
  // Trapezoid-weighted mass: a plain nodal sum carries an O(h) boundary
  // bias that would cap the scheme at first order.
  p.f /= trapezoid_mass(p.f, p.h);
  p.g /= trapezoid_mass(p.g, p.h);
  const double theta = std::clamp(cfg.background_mix, 0.0, 0.5);
  if (theta > 0.0) {
    const double uniform = 1.0 / (p.len1() * p.len2());
    p.f = (1.0 - theta) * p.f + MatrixXd::Constant(p.n1, p.n2, theta * uniform);
    p.g = (1.0 - theta) * p.g + MatrixXd::Constant(p.n1, p.n2, theta * uniform);
  }

  p.epsilon = cfg.epsilon > 0 ? cfg.epsilon : std::sqrt(p.h);
  // Interpolation undershoot guard at the same level as the density floor,
  // so vacuum regions keep f/g near one instead of degenerating.
  p.g_eval_floor = cfg.density_floor_rel * p.g.maxCoeff();

  // Lipschitz estimate of f/g in the transported variable, from grid
  // differences of 1/g over the effective support of g. The raw bound
  // explodes where g sits on the floor, so cut at 1e-3 of the peak and cap
  // delta below the filter width.
  const double g_cut = 1e-3 * p.g.maxCoeff();
  double lip = 0.0;
  for (int i = 0; i < p.n1; ++i)
    for (int j = 0; j < p.n2; ++j) {
      if (p.g(i, j) < g_cut) continue;
      if (i + 1 < p.n1 && p.g(i + 1, j) >= g_cut)
        lip = std::max(lip, std::abs(1.0 / p.g(i + 1, j) - 1.0 / p.g(i, j)) / p.h);
      if (j + 1 < p.n2 && p.g(i, j + 1) >= g_cut)
        lip = std::max(lip, std::abs(1.0 / p.g(i, j + 1) - 1.0 / p.g(i, j)) / p.h);
    }
  p.lipschitz_k = p.f.maxCoeff() * lip;
  if (cfg.delta > 0) {
    p.delta = cfg.delta;
  } else {
    const double cap = std::max(p.epsilon / 8.0, 1e-6);
    p.delta = std::clamp(p.lipschitz_k * p.h / 2.0, 1e-6, cap);
  }
  return p;
}

MatrixXd ma_monotone_residual(const MatrixXd& u, const MaProblem& prob) {
  check_u(u, prob, "ma_monotone_residual");
  return to_grid(residual_vector(u, prob, Mode::monotone), prob.n1, prob.n2);
}

MatrixXd ma_standard_residual(const MatrixXd& u, const MaProblem& prob) {
  check_u(u, prob, "ma_standard_residual");
  return to_grid(residual_vector(u, prob, Mode::standard), prob.n1, prob.n2);
}

MatrixXd ma_filtered_residual(const MatrixXd& u, const MaProblem& prob,
                              double* filter_fraction) {
  check_u(u, prob, "ma_filtered_residual");
  int deferred = 0, interior = 0;
  MatrixXd r = to_grid(residual_vector(u, prob, Mode::filtered, &deferred, &interior),
                       prob.n1, prob.n2);
  if (filter_fraction) *filter_fraction = interior > 0 ? double(deferred) / interior : 0.0;
  return r;
}

Eigen::SparseMatrix<double> ma_filtered_jacobian(const MatrixXd& u, const MaProblem& prob) {
  check_u(u, prob, "ma_filtered_jacobian");
  Assembly a;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(10 * prob.n_nodes()));
  a.triplets = &trips;
  assemble(u, prob, Mode::filtered, a);
  Eigen::SparseMatrix<double> J(prob.n_nodes(), prob.n_nodes());
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

MaSolution ma_solve(const MaProblem& prob, const MaConfig& cfg) {
  const int n1 = prob.n1, n2 = prob.n2;
  const long N = prob.n_nodes();

  // Identity-map potential |x|^2 / 2.
  MatrixXd U(n1, n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      U(i, j) = 0.5 * (prob.x1(i) * prob.x1(i) + prob.x2(j) * prob.x2(j));

  MaSolution sol;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(10 * N));
  bool analyzed = false;

  // Damped Newton on the monotone scheme first (its comparison principle
  // keeps the iteration well behaved from afar), then a filtered-scheme
  // polish for second-order accuracy. If the polish stalls on rough data,
  // fall back to the converged monotone solution.
  int deferred = 0, interior = 1;
  int iter = 0;

  auto newton = [&](Mode mode, const MaProblem& pr, MatrixXd& Uio, int budget,
                    double tol_accept) {
    VectorXd r = residual_vector(Uio, pr, mode, &deferred, &interior);
    double rn = r.cwiseAbs().maxCoeff();
    double r2 = r.norm();
    sol.residual_history.push_back(rn);
    bool forced_since_success = false;
    for (int k = 0; k < budget; ++k, ++iter) {
      if (rn < tol_accept) break;
      Assembly a;
      trips.clear();
      a.triplets = &trips;
      assemble(Uio, pr, mode, a);
      Eigen::SparseMatrix<double> J(N, N);
      J.setFromTriplets(trips.begin(), trips.end());
      if (!analyzed) {
        lu.analyzePattern(J);
        analyzed = true;
      }
      lu.factorize(J);
      if (lu.info() != Eigen::Success)
        throw numeric_error("ma_solve: singular scheme Jacobian at iteration " +
                            std::to_string(iter));
      const VectorXd step = lu.solve(-r);

      // Trust-region start: a near-singular row can make the raw Newton
      // step enormous; begin backtracking from a bounded update. The factor
      // is generous against the O(1) potential scale so healthy steps pass.
      const double step_inf = step.cwiseAbs().maxCoeff();
      double alpha = std::min(1.0, 50.0 / std::max(step_inf, 50.0));
      bool accepted = false;
      double best_r2 = std::numeric_limits<double>::infinity(), best_alpha = 1.0;
      for (int bt = 0; bt < cfg.max_backtracks; ++bt, alpha *= 0.5) {
        const MatrixXd U_trial = Uio + alpha * to_grid(step, n1, n2);
        const VectorXd r_trial = residual_vector(U_trial, pr, mode, &deferred, &interior);
        const double rt2 = r_trial.norm();
        if (rt2 < best_r2) {
          best_r2 = rt2;
          best_alpha = alpha;
        }
        if (rt2 <= (1.0 - 1e-4 * alpha) * r2 || r_trial.cwiseAbs().maxCoeff() < rn) {
          Uio = U_trial;
          r = r_trial;
          accepted = true;
          forced_since_success = false;
          break;
        }
      }
      if (!accepted) {
        if (!forced_since_success && best_r2 < 1.5 * r2) {
          forced_since_success = true;  // cross a scheme kink and keep going
          Uio += best_alpha * to_grid(step, n1, n2);
          r = residual_vector(Uio, pr, mode, &deferred, &interior);
        } else {
          rn = r.cwiseAbs().maxCoeff();
          sol.residual_history.push_back(rn);
          return rn;  // stalled
        }
      }
      const double rn_new = r.cwiseAbs().maxCoeff();
      // below the acceptance tolerance keep polishing only while the
      // contraction stays strong (snaps smooth cases to machine precision)
      if (rn_new < tol_accept && rn_new > 0.25 * rn) {
        rn = rn_new;
        sol.residual_history.push_back(rn);
        break;
      }
      rn = rn_new;
      r2 = r.norm();
      sol.residual_history.push_back(rn);
    }
    return rn;
  };

  auto fail = [&](const char* which, double rn_last) {
    std::ostringstream msg;
    msg << "ma_solve: Newton on the " << which << " scheme did not converge (residual "
        << rn_last << " after " << iter << " iterations; history:";
    for (double v : sol.residual_history) msg << " " << v;
    msg << ")";
    throw numeric_error(msg.str());
  };

  const MatrixXd identity_start = U;
  double rn = std::numeric_limits<double>::infinity();
  if (cfg.scheme != MaScheme::monotone) {
    rn = newton(Mode::filtered, prob, U, cfg.max_iters, cfg.newton_tol);
    if (rn >= cfg.newton_tol && cfg.scheme == MaScheme::filtered) fail("filtered", rn);
  }
  if (rn >= cfg.newton_tol) {
    // robust path: the monotone scheme's comparison principle keeps Newton
    // well behaved on rough densities
    U = identity_start;
    rn = newton(Mode::monotone, prob, U, cfg.max_iters, cfg.newton_tol);
    if (rn < cfg.newton_tol) sol.monotone_fallback = true;
  }
  if (rn >= cfg.newton_tol) {
    // numerical continuation: mix both densities toward uniform, then track
    // the monotone solution back to the target pair
    U = identity_start;
    const double uniform = 1.0 / (prob.len1() * prob.len2());
    for (double t : {0.25, 0.5, 0.75, 0.9, 1.0}) {
      MaProblem mix = prob;
      mix.f = t * prob.f + MatrixXd::Constant(n1, n2, (1.0 - t) * uniform);
      mix.g = t * prob.g + MatrixXd::Constant(n1, n2, (1.0 - t) * uniform);
      mix.g_eval_floor = cfg.density_floor_rel * mix.g.maxCoeff();
      const double stage_tol = t == 1.0 ? cfg.newton_tol : 1e-6;
      rn = newton(Mode::monotone, mix, U, cfg.max_iters, stage_tol);
      if (t == 1.0 && rn >= cfg.newton_tol) fail("monotone (continuation)", rn);
    }
    sol.monotone_fallback = true;
    if (cfg.scheme == MaScheme::auto_filtered) {  // warm filtered polish
      MatrixXd U_f = U;
      const double rf = newton(Mode::filtered, prob, U_f, 15, cfg.newton_tol);
      if (rf < cfg.newton_tol) {
        U = std::move(U_f);
        rn = rf;
        sol.monotone_fallback = false;
      }
    }
  }
  // refresh filter diagnostics at the returned potential
  residual_vector(U, prob, Mode::filtered, &deferred, &interior);
  (void)0;

  sol.u = U;
  sol.newton_iters = iter;
  sol.residual_norm = rn;
  sol.filter_fraction = interior > 0 ? double(deferred) / interior : 0.0;

  Eigen::SparseMatrix<double> D1, D2;
  gradient_operators(prob, D1, D2);
  const VectorXd uvec = flatten(U);
  sol.map1 = to_grid(D1 * uvec, n1, n2);
  sol.map2 = to_grid(D2 * uvec, n1, n2);
  return sol;
}

double w2_squared_2d(const MaSolution& sol, const MaProblem& prob) {
  check_u(sol.u, prob, "w2_squared_2d");
  double acc = 0.0;
  for (int i = 0; i < prob.n1; ++i)
    for (int j = 0; j < prob.n2; ++j) {
      const double r1 = prob.x1(i) - sol.map1(i, j);
      const double r2 = prob.x2(j) - sol.map2(i, j);
      acc += prob.f(i, j) * (r1 * r1 + r2 * r2);
    }
  return acc * prob.h * prob.h;
}

MatrixXd w2_frechet_2d(const MaSolution& sol, const MaProblem& prob) {
  check_u(sol.u, prob, "w2_frechet_2d");
  const int n1 = prob.n1, n2 = prob.n2;
  const long N = prob.n_nodes();
  const double area = prob.h * prob.h;

  Eigen::SparseMatrix<double> D1, D2;
  gradient_operators(prob, D1, D2);

  VectorXd p1(N), p2(N), fv(N);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const long k = static_cast<long>(i) * n2 + j;
      p1(k) = prob.x1(i) - sol.map1(i, j);
      p2(k) = prob.x2(j) - sol.map2(i, j);
      fv(k) = prob.f(i, j);
    }

  // Explicit diag(f) term plus the implicit dependence of u on f through
  // the scheme: dW/df = |x - Du|^2 area - (dM_F/df) (J^-T dW/du).
  const VectorXd dW_du =
      -2.0 * area * (D1.transpose() * fv.cwiseProduct(p1) + D2.transpose() * fv.cwiseProduct(p2));

  Assembly a;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(10 * N));
  VectorXd dres_df(N);
  a.triplets = &trips;
  a.dres_df = &dres_df;
  assemble(sol.u, prob, sol.monotone_fallback ? Mode::monotone : Mode::filtered, a);
  Eigen::SparseMatrix<double> J(N, N);
  J.setFromTriplets(trips.begin(), trips.end());
  const Eigen::SparseMatrix<double> Jt = J.transpose();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(Jt);
  if (lu.info() != Eigen::Success)
    throw numeric_error("w2_frechet_2d: singular transposed Jacobian");
  const VectorXd y = lu.solve(dW_du);

  MatrixXd grad(n1, n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const long k = static_cast<long>(i) * n2 + j;
      grad(i, j) = area * (p1(k) * p1(k) + p2(k) * p2(k)) - dres_df(k) * y(k);
    }
  return grad;
}

MisfitEval misfit_j2(const ShotRecord& f, const ShotRecord& g, const NormConfig& norm_cfg,
                     const MaConfig& ma_cfg, MaSolution* solution_out) {
  if (f.data.rows() != g.data.rows() || f.data.cols() != g.data.cols() ||
      !(f.axis == g.axis))
    throw config_error("misfit_j2: gathers must share one rectangular grid");
  if (f.data.rows() < 3 || f.data.cols() < 3)
    throw config_error("misfit_j2: gather too small for the Monge-Ampere grid");

  const int n1 = static_cast<int>(f.data.rows());
  const int n2 = static_cast<int>(f.data.cols());
  const double h = 1.0 / (std::max(n1, n2) - 1);
  const double area = h * h;

  double c = norm_cfg.c;
  if (norm_cfg.method == NormMethod::linear)
    c = -std::min(f.data.minCoeff(), g.data.minCoeff());
  else if (!(c > 0))
    c = default_c(g.data.cwiseAbs().maxCoeff(), norm_cfg.c_scale);

  const NormalizedGather nf = normalize_gather(f.data, norm_cfg.method, c, area);
  const NormalizedGather ng = normalize_gather(g.data, norm_cfg.method, c, area);

  MaProblem prob = MaProblem::from_densities(nf.density, ng.density, ma_cfg);
  MaSolution sol = ma_solve(prob, ma_cfg);

  MisfitEval out;
  out.value = w2_squared_2d(sol, prob);

  // Chain: raw gather -> normalized density -> floored, trapezoid-rescaled,
  // background-mixed problem density. The floor kink contributes zero
  // derivative where active.
  const MatrixXd dW_dpf = w2_frechet_2d(sol, prob);
  const double fl = ma_cfg.density_floor_rel * nf.density.maxCoeff();
  const MatrixXd floored = nf.density.cwiseMax(fl);
  double mass = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      mass += trapezoid_weight(i, j, n1, n2) * floored(i, j) * area;
  const double theta = std::clamp(ma_cfg.background_mix, 0.0, 0.5);
  const double uniform = 1.0 / (prob.len1() * prob.len2());
  // rescaled density before the mixture, recovered from prob.f
  const MatrixXd f1 = (prob.f.array() - theta * uniform).matrix() / (1.0 - theta);
  const double inner = dW_dpf.cwiseProduct(f1).sum();
  MatrixXd dW_dnf(n1, n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      dW_dnf(i, j) = nf.density(i, j) > fl
                         ? (1.0 - theta) *
                               (dW_dpf(i, j) -
                                trapezoid_weight(i, j, n1, n2) * area * inner) /
                               mass
                         : 0.0;

  out.adjoint_source.data = gather_jacobian_transpose(nf, dW_dnf, norm_cfg.differentiate);
  out.adjoint_source.axis = f.axis;
  out.adjoint_source.shot_id = f.shot_id;
  if (sol.filter_fraction > 0.5)
    out.warnings.push_back("monge-ampere filter deferred to the monotone branch on " +
                           std::to_string(sol.filter_fraction * 100.0) + "% of nodes");
  if (solution_out) *solution_out = std::move(sol);
  return out;
}

}  // namespace otfwi::ma
