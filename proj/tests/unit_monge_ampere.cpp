#include "otfwi/monge_ampere.hpp"

#include "otfwi/wave_sim.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_helpers.hpp"

using namespace otfwi;
using namespace otfwi::ma;
using otfwi::test::rel_diff;

namespace {

constexpr double kPi = std::numbers::pi;

MatrixXd uniform_density(int n1, int n2) { return MatrixXd::Constant(n1, n2, 1.0); }

// Gaussian blob on the box, plus a small floor so g stays Lipschitz-friendly.
MatrixXd blob_density(int n1, int n2, double c1, double c2, double sigma,
                      double background = 0.0) {
  const double h = 1.0 / (std::max(n1, n2) - 1);
  MatrixXd d(n1, n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const double x1 = i * h, x2 = j * h;
      const double r2 = (x1 - c1) * (x1 - c1) + (x2 - c2) * (x2 - c2);
      d(i, j) = background + std::exp(-0.5 * r2 / (sigma * sigma));
    }
  return d;
}

// Analytic convex potential u* = |x|^2/2 + a cos(pi x1) cos(pi x2): its
// gradient satisfies the transport Neumann condition exactly, and
// det(D^2 u*) defines a smooth density pair with g = 1.
struct SymbolicCase {
  double a;
  double u(double x1, double x2) const {
    return 0.5 * (x1 * x1 + x2 * x2) + a * std::cos(kPi * x1) * std::cos(kPi * x2);
  }
  double det_d2u(double x1, double x2) const {
    const double cc = std::cos(kPi * x1) * std::cos(kPi * x2);
    const double ss = std::sin(kPi * x1) * std::sin(kPi * x2);
    const double u11 = 1.0 - a * kPi * kPi * cc;
    const double u22 = 1.0 - a * kPi * kPi * cc;
    const double u12 = a * kPi * kPi * ss;
    return u11 * u22 - u12 * u12;
  }
};

MaProblem symbolic_problem(int n, double a, MaConfig cfg = {}) {
  SymbolicCase sc{a};
  MatrixXd f(n, n);
  const double h = 1.0 / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f(i, j) = sc.det_d2u(i * h, j * h);
  cfg.background_mix = 0.0;  // keep the analytic density exact
  return MaProblem::from_densities(f, uniform_density(n, n), cfg);
}

MatrixXd pinned_symbolic_u(const MaProblem& p, double a) {
  SymbolicCase sc{a};
  MatrixXd u(p.n1, p.n2);
  for (int i = 0; i < p.n1; ++i)
    for (int j = 0; j < p.n2; ++j) u(i, j) = sc.u(p.x1(i), p.x2(j));
  return u.array() - sc.u(p.x1(p.fixed_i), p.x2(p.fixed_j));
}

MatrixXd identity_potential(const MaProblem& p, bool pinned = true) {
  MatrixXd u(p.n1, p.n2);
  for (int i = 0; i < p.n1; ++i)
    for (int j = 0; j < p.n2; ++j)
      u(i, j) = 0.5 * (p.x1(i) * p.x1(i) + p.x2(j) * p.x2(j));
  if (pinned)
    u.array() -= 0.5 * (p.x1(p.fixed_i) * p.x1(p.fixed_i) +
                        p.x2(p.fixed_j) * p.x2(p.fixed_j));
  return u;
}

}  // namespace

TEST_CASE("ma residuals on exact quadratics") {
  MaConfig cfg;
  MaProblem p = MaProblem::from_densities(uniform_density(33, 33), uniform_density(33, 33), cfg);

  SUBCASE("identity potential: monotone residual is -u0 up to the delta bias") {
    const MatrixXd u = identity_potential(p);
    const MatrixXd r = ma_monotone_residual(u, p);
    for (int i = 1; i < p.n1 - 1; ++i)
      for (int j = 1; j < p.n2 - 1; ++j) CHECK(std::abs(r(i, j)) <= 2.0 * p.delta + 1e-8);
    // Neumann rows are exact on quadratics
    for (int j = 0; j < p.n2; ++j) {
      CHECK(std::abs(r(0, j)) < 1e-12);
      CHECK(std::abs(r(p.n1 - 1, j)) < 1e-12);
    }
  }
  SUBCASE("identity potential: standard residual vanishes up to the floor bias") {
    const MatrixXd u = identity_potential(p);
    const MatrixXd r = ma_standard_residual(u, p);
    for (int i = 1; i < p.n1 - 1; ++i)
      for (int j = 1; j < p.n2 - 1; ++j) CHECK(std::abs(r(i, j)) < 1e-8);
  }
  SUBCASE("anisotropic quadratic with matching density ratio") {
    // u = (2 x1^2 + 0.5 x2^2)/2, det(D^2 u) = 1: f/g = 1 keeps residual -u0.
    MatrixXd u(p.n1, p.n2);
    for (int i = 0; i < p.n1; ++i)
      for (int j = 0; j < p.n2; ++j)
        u(i, j) = 0.5 * (2.0 * p.x1(i) * p.x1(i) + 0.5 * p.x2(j) * p.x2(j));
    u.array() -= u(p.fixed_i, p.fixed_j);
    const MatrixXd r = ma_standard_residual(u, p);
    for (int i = 1; i < p.n1 - 1; ++i)
      for (int j = 1; j < p.n2 - 1; ++j) CHECK(std::abs(r(i, j)) < 1e-8);
  }
  SUBCASE("pure cross term: standard residual sees det = -1") {
    // u = x1 x2: D11 = D22 = 0, D12 = 1, so -(det) = 1 enters M_N.
    MatrixXd u(p.n1, p.n2);
    for (int i = 0; i < p.n1; ++i)
      for (int j = 0; j < p.n2; ++j) u(i, j) = p.x1(i) * p.x2(j);
    u.array() -= u(p.fixed_i, p.fixed_j);
    const MatrixXd r = ma_standard_residual(u, p);
    // f/g = 1 and u0 = 0: residual = 1 + 1 = 2 at interior nodes
    for (int i = 1; i < p.n1 - 1; ++i)
      for (int j = 1; j < p.n2 - 1; ++j) CHECK(r(i, j) == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("saddle: the monotone branch penalizes nonconvexity") {
    // u = (2 x1^2 - x2^2)/2 on a 3x3 patch: D11 = 2, D22 = -1.
    // MA1 = max(2,d)max(-1,d) + min(2,d) + min(-1,d) - 1 - u0
    //     = 2d + d - 1 - 1 - u0 (for small d), far from det - f/g = -3.
    MaProblem q = MaProblem::from_densities(uniform_density(3, 3), uniform_density(3, 3), cfg);
    MatrixXd u(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        u(i, j) = 0.5 * (2.0 * q.x1(i) * q.x1(i) - q.x2(j) * q.x2(j));
    u.array() -= u(1, 1);
    const MatrixXd r = ma_monotone_residual(u, q);
    const double d = q.delta;
    const double ma1 = std::max(2.0, d) * std::max(-1.0, d) + std::min(2.0, d) +
                       std::min(-1.0, d) - 1.0;
    // MA2 uses the diagonal curvatures (both 0.5 here):
    const double ma2 = std::max(0.5, d) * std::max(0.5, d) + 2.0 * std::min(0.5, d) - 1.0;
    CHECK(r(1, 1) == doctest::Approx(-std::min(ma1, ma2)).epsilon(1e-6));
    CHECK(std::abs(r(1, 1) - (-(2.0 * -1.0 - 1.0))) > 0.5);  // differs from raw det form
  }
}

TEST_CASE("ma_standard_residual converges to the analytic operator") {
  // Smooth symbolic case: interior residual of the exact (pinned) potential
  // should shrink like O(h^2).
  double prev = -1.0;
  for (int n : {17, 33, 65}) {
    MaProblem p = symbolic_problem(n, 0.04);
    const MatrixXd u = pinned_symbolic_u(p, 0.04);
    const MatrixXd r = ma_standard_residual(u, p);
    double inner_max = 0.0;
    for (int i = 1; i < n - 1; ++i)
      for (int j = 1; j < n - 1; ++j) inner_max = std::max(inner_max, std::abs(r(i, j)));
    if (prev > 0) CHECK(inner_max < 0.35 * prev);  // ~4x drop per refinement
    prev = inner_max;
  }
}

TEST_CASE("filtered residual") {
  MaConfig cfg;
  MaProblem p = symbolic_problem(33, 0.04, cfg);
  SUBCASE("where schemes agree the filter returns the standard value") {
    const MatrixXd u = pinned_symbolic_u(p, 0.04);
    const MatrixXd rm = ma_monotone_residual(u, p);
    const MatrixXd rn = ma_standard_residual(u, p);
    const MatrixXd rf = ma_filtered_residual(u, p);
    for (int i = 1; i < p.n1 - 1; ++i)
      for (int j = 1; j < p.n2 - 1; ++j)
        if (std::abs(rn(i, j) - rm(i, j)) <= p.epsilon)
          CHECK(rf(i, j) == doctest::Approx(rn(i, j)).epsilon(1e-12));
  }
  SUBCASE("large disagreement defers to the monotone value") {
    // random rough u provokes |M_N - M_M| >= 2 eps somewhere
    Rng rng(71);
    MatrixXd u = identity_potential(p);
    for (int i = 0; i < p.n1; ++i)
      for (int j = 0; j < p.n2; ++j) u(i, j) += 0.2 * rng.uniform(-1.0, 1.0);
    const MatrixXd rm = ma_monotone_residual(u, p);
    const MatrixXd rn = ma_standard_residual(u, p);
    const MatrixXd rf = ma_filtered_residual(u, p);
    int checked = 0;
    for (int i = 1; i < p.n1 - 1; ++i)
      for (int j = 1; j < p.n2 - 1; ++j)
        if (std::abs(rn(i, j) - rm(i, j)) >= 2.0 * p.epsilon) {
          CHECK(rf(i, j) == doctest::Approx(rm(i, j)).epsilon(1e-12));
          ++checked;
        }
    CHECK(checked > 0);
  }
  SUBCASE("monotone value is the negated minimum of the two branches") {
    Rng rng(73);
    MatrixXd u = identity_potential(p);
    for (int i = 0; i < p.n1; ++i)
      for (int j = 0; j < p.n2; ++j) u(i, j) += 0.05 * rng.uniform(-1.0, 1.0);
    const MatrixXd rm = ma_monotone_residual(u, p);
    // -M_M = min(MA1, MA2) <= both branch values; spot-check via the
    // definition on the standard residual's building blocks is implicit,
    // here we at least confirm finiteness and scale.
    CHECK(rm.allFinite());
  }
}

TEST_CASE("ma jacobian matches finite differences of the filtered residual") {
  MaConfig cfg;
  MaProblem p = symbolic_problem(17, 0.03, cfg);
  MatrixXd u = pinned_symbolic_u(p, 0.03);
  // small smooth perturbation keeps every max/min/filter branch stable
  for (int i = 0; i < p.n1; ++i)
    for (int j = 0; j < p.n2; ++j)
      u(i, j) += 0.002 * std::sin(3.0 * p.x1(i)) * std::cos(2.0 * p.x2(j));

  const Eigen::SparseMatrix<double> J = ma_filtered_jacobian(u, p);
  const double h = 1e-7;
  Rng rng(79);
  for (int sample = 0; sample < 40; ++sample) {
    const int ci = static_cast<int>(rng.uniform(0, p.n1));
    const int cj = static_cast<int>(rng.uniform(0, p.n2));
    MatrixXd up = u, um = u;
    up(ci, cj) += h;
    um(ci, cj) -= h;
    const MatrixXd rp = ma_filtered_residual(up, p);
    const MatrixXd rm = ma_filtered_residual(um, p);
    const long col = static_cast<long>(ci) * p.n2 + cj;
    for (int i = 0; i < p.n1; ++i)
      for (int j = 0; j < p.n2; ++j) {
        const double fd = (rp(i, j) - rm(i, j)) / (2 * h);
        const double an = J.coeff(static_cast<long>(i) * p.n2 + j, col);
        if (std::abs(fd) > 1e-8 || std::abs(an) > 1e-8)
          CHECK(std::abs(fd - an) <= 1e-6 * std::max({std::abs(fd), std::abs(an), 1.0}));
      }
  }
}

TEST_CASE("ma_solve") {
  MaConfig cfg;
  SUBCASE("uniform pair: identity map, zero W2") {
    MaProblem p = MaProblem::from_densities(uniform_density(33, 33), uniform_density(33, 33), cfg);
    const MaSolution sol = ma_solve(p, cfg);
    CHECK(sol.newton_iters <= 5);
    for (int i = 0; i < p.n1; ++i)
      for (int j = 0; j < p.n2; ++j) {
        CHECK(std::abs(sol.map1(i, j) - p.x1(i)) < 1e-7);
        CHECK(std::abs(sol.map2(i, j) - p.x2(j)) < 1e-7);
      }
    CHECK(w2_squared_2d(sol, p) < 1e-10);
  }
  SUBCASE("translated blob: map is the shift, W2 = |s|^2 within 5%") {
    const int n = 65;
    // tiny uniform background keeps the tail ratio f/g bounded; it carries
    // ~1% of the mass, well inside the 5% tolerance on |s|^2
    const MatrixXd f = blob_density(n, n, 0.5, 0.45, 0.08, 5e-4);
    const MatrixXd g = blob_density(n, n, 0.5, 0.55, 0.08, 5e-4);
    MaProblem p = MaProblem::from_densities(f, g, cfg);
    const MaSolution sol = ma_solve(p, cfg);
    CHECK(sol.newton_iters <= 30);
    CHECK(w2_squared_2d(sol, p) == doctest::Approx(0.01).epsilon(0.05));
    // on the mass-carrying core the map is x + (0, 0.1)
    for (int i = 28; i <= 36; i += 4)
      for (int j = 25; j <= 33; j += 4) {
        CHECK(sol.map1(i, j) == doctest::Approx(p.x1(i)).epsilon(0.02));
        CHECK(sol.map2(i, j) - p.x2(j) == doctest::Approx(0.1).epsilon(0.05));
      }
  }
  SUBCASE("smooth symbolic solution: observed order about two") {
    std::vector<double> errs;
    for (int n : {17, 33, 65}) {
      MaProblem p = symbolic_problem(n, 0.05, cfg);
      const MaSolution sol = ma_solve(p, cfg);
      errs.push_back((sol.u - pinned_symbolic_u(p, 0.05)).cwiseAbs().maxCoeff());
    }
    const double order1 = std::log2(errs[0] / errs[1]);
    const double order2 = std::log2(errs[1] / errs[2]);
    CHECK(order1 > 1.5);
    CHECK(order2 > 1.5);
  }
  SUBCASE("newton tail contracts superlinearly on a smooth problem") {
    MaProblem p = symbolic_problem(33, 0.05, cfg);
    const MaSolution sol = ma_solve(p, cfg);
    const auto& h = sol.residual_history;
    REQUIRE(h.size() >= 3);
    const double r1 = h[h.size() - 2] / h[h.size() - 3];
    const double r2 = h[h.size() - 1] / h[h.size() - 2];
    CHECK(r2 < r1);   // accelerating contraction
    CHECK(r2 < 0.1);  // fast tail
  }
  SUBCASE("convexity enforcement at the converged solution") {
    MaProblem p = symbolic_problem(33, 0.05, cfg);
    const MaSolution sol = ma_solve(p, cfg);
    const double h = p.h;
    for (int i = 1; i < p.n1 - 1; ++i)
      for (int j = 1; j < p.n2 - 1; ++j) {
        const double d11 =
            (sol.u(i + 1, j) - 2 * sol.u(i, j) + sol.u(i - 1, j)) / (h * h);
        const double d22 =
            (sol.u(i, j + 1) - 2 * sol.u(i, j) + sol.u(i, j - 1)) / (h * h);
        const double dvv = (sol.u(i + 1, j + 1) - 2 * sol.u(i, j) + sol.u(i - 1, j - 1)) /
                           (2 * h * h);
        const double dww = (sol.u(i + 1, j - 1) - 2 * sol.u(i, j) + sol.u(i - 1, j + 1)) /
                           (2 * h * h);
        for (double v : {d11, d22, dvv, dww}) CHECK(v >= -10.0 * p.delta);
      }
  }
  SUBCASE("neumann condition holds to O(h) on the boundary") {
    MaProblem p = symbolic_problem(33, 0.05, cfg);
    const MaSolution sol = ma_solve(p, cfg);
    // independent first-order one-sided check
    double worst = 0.0;
    for (int j = 1; j < p.n2 - 1; ++j) {
      worst = std::max(worst, std::abs(-(sol.u(1, j) - sol.u(0, j)) / p.h + p.x1(0)));
      worst = std::max(worst,
                       std::abs((sol.u(p.n1 - 1, j) - sol.u(p.n1 - 2, j)) / p.h -
                                p.x1(p.n1 - 1)));
    }
    CHECK(worst <= 3.0 * p.h);
  }
  SUBCASE("mass-map consistency: push-forward of f approximates g") {
    auto tv_at = [&](int n) {
      const MatrixXd f = blob_density(n, n, 0.45, 0.5, 0.12, 0.05);
      const MatrixXd g = blob_density(n, n, 0.55, 0.5, 0.12, 0.05);
      MaProblem p = MaProblem::from_densities(f, g, cfg);
      const MaSolution sol = ma_solve(p, cfg);
      MatrixXd pushed = MatrixXd::Zero(n, n);
      const double h = p.h;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double y1 = std::clamp(sol.map1(i, j) / h, 0.0, double(n - 1));
          const double y2 = std::clamp(sol.map2(i, j) / h, 0.0, double(n - 1));
          const int i0 = std::min(static_cast<int>(y1), n - 2);
          const int j0 = std::min(static_cast<int>(y2), n - 2);
          const double a = y1 - i0, b = y2 - j0;
          const double m = p.f(i, j);
          pushed(i0, j0) += (1 - a) * (1 - b) * m;
          pushed(i0 + 1, j0) += a * (1 - b) * m;
          pushed(i0, j0 + 1) += (1 - a) * b * m;
          pushed(i0 + 1, j0 + 1) += a * b * m;
        }
      return 0.5 * (pushed - p.g).cwiseAbs().sum() * h * h;
    };
    const double tv32 = tv_at(33);
    const double tv64 = tv_at(65);
    CHECK(tv64 < 0.15);
    CHECK(tv64 < 0.75 * tv32);  // shrinks with refinement
  }
}

TEST_CASE("w2_frechet_2d") {
  MaConfig cfg;
  SUBCASE("equal densities give a near-zero gradient against mass-neutral dirs") {
    const MatrixXd f = blob_density(33, 33, 0.5, 0.5, 0.15, 0.1);
    MaProblem p = MaProblem::from_densities(f, f, cfg);
    const MaSolution sol = ma_solve(p, cfg);
    const MatrixXd grad = w2_frechet_2d(sol, p);
    Rng rng(83);
    MatrixXd dir = otfwi::test::random_matrix(rng, 33, 33);
    dir.array() -= dir.mean();
    CHECK(std::abs(grad.cwiseProduct(dir).sum()) < 1e-7 * dir.cwiseAbs().maxCoeff());
  }
  SUBCASE("directional derivative matches central differences") {
    const int n = 33;
    const MatrixXd f = blob_density(n, n, 0.48, 0.45, 0.14, 0.15);
    const MatrixXd g = blob_density(n, n, 0.52, 0.55, 0.15, 0.15);
    MaProblem p = MaProblem::from_densities(f, g, cfg);
    const MaSolution sol = ma_solve(p, cfg);
    const MatrixXd grad = w2_frechet_2d(sol, p);

    Rng rng(89);
    MatrixXd dir = otfwi::test::random_matrix(rng, n, n);
    dir.array() -= dir.mean();  // mass-neutral
    const double h = 1e-6;
    auto value_at = [&](double sgn) {
      MaProblem q = p;
      q.f = p.f + sgn * h * dir;
      const MaSolution s2 = ma_solve(q, cfg);
      return w2_squared_2d(s2, q);
    };
    const double fd = (value_at(1.0) - value_at(-1.0)) / (2 * h);
    CHECK(rel_diff(grad.cwiseProduct(dir).sum(), fd) < 1e-3);
  }
  SUBCASE("negative gradient is a descent direction") {
    const int n = 33;
    const MatrixXd f = blob_density(n, n, 0.48, 0.45, 0.14, 0.15);
    const MatrixXd g = blob_density(n, n, 0.52, 0.55, 0.15, 0.15);
    MaProblem p = MaProblem::from_densities(f, g, cfg);
    const MaSolution sol = ma_solve(p, cfg);
    MatrixXd step = -w2_frechet_2d(sol, p);
    step.array() -= step.mean();
    MaProblem q = p;
    q.f = p.f + 1e-5 * step;
    const MaSolution s2 = ma_solve(q, cfg);
    CHECK(w2_squared_2d(s2, q) < w2_squared_2d(sol, p));
  }
}

TEST_CASE("misfit_j2") {
  MaConfig cfg;
  NormConfig norm;
  norm.method = NormMethod::linear;  // bounded f/g ratios on oscillatory data
  const TimeAxis axis{160, 0.01};

  // Band-limited mini-gather: one Ricker arrival per receiver with a smooth
  // moveout, the data class the Monge-Ampere misfit is meant for.
  auto gather = [&](double shift_s) {
    ShotRecord r;
    r.axis = axis;
    r.data.resize(30, axis.nt);
    for (int i = 0; i < 30; ++i) {
      const double moveout = 0.35 + 0.4 * std::pow(i / 29.0 - 0.5, 2);
      const Trace t = wave::ricker(6.0, moveout + shift_s + 0.35, axis);
      r.data.row(i) = t.values.matrix().transpose();
    }
    return r;
  };

  SUBCASE("equal gathers: zero value") {
    const ShotRecord g = gather(0.0);
    const MisfitEval eval = misfit_j2(g, g, norm, cfg);
    CHECK(eval.value < 1e-10);
  }
  SUBCASE("shifted gather sweep has a single argmin at zero") {
    const ShotRecord g = gather(0.0);
    double best = 1e300;
    double best_s = -99;
    std::vector<double> values;
    for (double s = -0.12; s <= 0.121; s += 0.03) {
      const double v = misfit_j2(gather(s), g, norm, cfg).value;
      values.push_back(v);
      if (v < best) {
        best = v;
        best_s = s;
      }
    }
    CHECK(best_s == doctest::Approx(0.0));
    int minima = 0;
    for (size_t k = 1; k + 1 < values.size(); ++k)
      if (values[k] < values[k - 1] && values[k] < values[k + 1]) ++minima;
    CHECK(minima == 1);
  }
  SUBCASE("adjoint source matches central differences through the full chain") {
    const ShotRecord g = gather(0.0);
    const ShotRecord f = gather(0.04);
    MaConfig pinned = cfg;
    pinned.scheme = MaScheme::monotone;  // one scheme across all FD evals
    const MisfitEval eval = misfit_j2(f, g, norm, pinned);
    Rng rng(97);
    MatrixXd dir = otfwi::test::random_matrix(rng, 30, axis.nt);
    const double h = 1e-6;
    ShotRecord fp = f, fm = f;
    fp.data += h * dir;
    fm.data -= h * dir;
    const double fd =
        (misfit_j2(fp, g, norm, pinned).value - misfit_j2(fm, g, norm, pinned).value) /
        (2 * h);
    CHECK(rel_diff(eval.adjoint_source.data.cwiseProduct(dir).sum(), fd) < 1e-3);
  }
  SUBCASE("product-form gathers agree with the 1D distance within 1%") {
    // densities varying only along time: W2^2 in 2D equals the 1D value
    ShotRecord f, g;
    f.axis = g.axis = axis;
    f.data.resize(40, axis.nt);
    g.data.resize(40, axis.nt);
    ArrayXd ft(axis.nt), gt(axis.nt);
    for (int j = 0; j < axis.nt; ++j) {
      ft(j) = 0.2 + std::exp(-0.5 * std::pow((j - 20.0) / 6.0, 2));
      gt(j) = 0.2 + std::exp(-0.5 * std::pow((j - 27.0) / 6.0, 2));
    }
    for (int i = 0; i < 40; ++i) {
      f.data.row(i) = ft.matrix().transpose();
      g.data.row(i) = gt.matrix().transpose();
    }
    NormConfig lin;
    lin.method = NormMethod::linear;
    const MisfitEval eval = misfit_j2(f, g, lin, cfg);

    // 1D reference on the same box scale: time axis maps to [0, len2]
    const double h = 1.0 / (std::max<int>(40, axis.nt) - 1);
    const ArrayXd knots = ArrayXd::LinSpaced(axis.nt, 0.0, (axis.nt - 1) * h);
    const double w2_1d = ot1d::w2_squared(knots, ft, knots, gt);
    CHECK(eval.value == doctest::Approx(w2_1d).epsilon(0.01));
  }
}
