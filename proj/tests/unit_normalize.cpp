#include "otfwi/normalize.hpp"

#include <cmath>

#include "doctest.h"
#include "otfwi/wave_sim.hpp"
#include "test_helpers.hpp"

using namespace otfwi;
using otfwi::test::random_array;

namespace {

double trapz_mass(const NormalizedSignal& s) {
  return (trapezoid_weights(s.axis) * s.density).sum();
}

// Forward-difference directional derivative of a normalization map.
ArrayXd fd_directional(const std::function<ArrayXd(const ArrayXd&)>& map,
                       const ArrayXd& f, const ArrayXd& dir, double h) {
  return (map(f + h * dir) - map(f - h * dir)) / (2.0 * h);
}

}  // namespace

TEST_CASE("normalize_linear") {
  const TimeAxis axis{629, 0.01};  // [0, 2 pi]
  SUBCASE("equal traces give identical outputs") {
    Rng rng(3);
    const Trace f(random_array(rng, axis.nt), axis);
    auto [nf, ng] = normalize_linear(f, f);
    CHECK((nf.density - ng.density).abs().maxCoeff() == 0.0);
    CHECK(trapz_mass(nf) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("already nonnegative signal: c equals -min and output is f/<f>") {
    ArrayXd v(axis.nt);
    for (int n = 0; n < axis.nt; ++n) v(n) = 1.0 + std::sin(axis.t(n));
    const Trace f(v, axis);
    auto [nf, ng] = normalize_linear(f, f);
    // min of 1 + sin on [0, 2pi] is ~0, so the shift is ~0
    CHECK(std::abs(nf.c) < 1e-4);
    const double mass = (trapezoid_weights(axis) * v).sum();
    CHECK((nf.density - v / mass).abs().maxCoeff() < 1e-6);
  }
  SUBCASE("opposite constants degenerate to zero mass") {
    const Trace f(ArrayXd::Constant(axis.nt, -1.0), axis);
    const Trace g(ArrayXd::Constant(axis.nt, 1.0), axis);
    CHECK_THROWS_AS(static_cast<void>(normalize_linear(f, g)), numeric_error);
  }
}

TEST_CASE("normalize_signsensitive") {
  const TimeAxis axis{1001, 0.001};
  SUBCASE("zero signal maps to the uniform density") {
    const Trace f(ArrayXd::Zero(axis.nt), axis);
    const NormalizedSignal out = normalize_signsensitive(f, 1.0);
    CHECK(out.mass_scale == doctest::Approx(axis.duration()));
    CHECK((out.density - 1.0 / axis.duration()).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("pointwise map is continuous at f = 0") {
    const double c = 3.7;
    const Trace lo(ArrayXd::Constant(2, -1e-14), TimeAxis{2, 1.0});
    const Trace hi(ArrayXd::Constant(2, +1e-14), TimeAxis{2, 1.0});
    const double p_lo = normalize_signsensitive(lo, c).mass_scale;
    const double p_hi = normalize_signsensitive(hi, c).mass_scale;
    CHECK(p_lo == doctest::Approx(p_hi).epsilon(1e-10));
  }
  SUBCASE("C1: one-sided difference quotients of the map agree at 0 within O(h)") {
    const double c = 2.5;
    auto p = [&](double x) {
      const Trace t(ArrayXd::Constant(2, x), TimeAxis{2, 1.0});
      return normalize_signsensitive(t, c).mass_scale;  // b = p(x) here
    };
    for (double h : {1e-4, 1e-5, 1e-6}) {
      const double right = (p(h) - p(0.0)) / h;
      const double left = (p(0.0) - p(-h)) / h;
      CHECK(std::abs(right - left) < 10.0 * c * h);
    }
  }
  SUBCASE("ricker input: strictly positive, unit mass, derivative matches FD") {
    const Trace f = wave::ricker(15.0, 0.5, axis);
    const double c = 10.0;
    NormalizationJacobian jac;
    const NormalizedSignal out = normalize_signsensitive(f, c, &jac);
    CHECK(out.density.minCoeff() > 0.0);
    CHECK(trapz_mass(out) == doctest::Approx(1.0).epsilon(1e-12));

    // d(b * density)/df is the plain pointwise map derivative.
    Rng rng(5);
    const ArrayXd dir = random_array(rng, axis.nt);
    auto bmap = [&](const ArrayXd& vals) -> ArrayXd {
      const NormalizedSignal s = normalize_signsensitive(Trace(vals, axis), c);
      return s.density * s.mass_scale;
    };
    const ArrayXd fd = fd_directional(bmap, f.values, dir, 1e-7);
    ArrayXd analytic(axis.nt);
    for (int n = 0; n < axis.nt; ++n)
      analytic(n) = (f.values(n) >= 0 ? 1.0 : std::exp(c * f.values(n))) * dir(n);
    CHECK((fd - analytic).abs().maxCoeff() < 1e-6 * analytic.abs().maxCoeff());
  }
  SUBCASE("small-c limit is a linear scaling") {
    const Trace f = wave::ricker(10.0, 0.5, axis);
    const double c = 1e-3 / f.values.abs().maxCoeff();
    const NormalizedSignal out = normalize_signsensitive(f, c);
    const ArrayXd w = trapezoid_weights(axis);
    const ArrayXd shifted = f.values + 1.0 / c;
    const ArrayXd linear = shifted / (w * shifted).sum();
    CHECK((out.density - linear).abs().maxCoeff() < 1e-5 * linear.abs().maxCoeff());
  }
  SUBCASE("large-c limit approaches the positive part") {
    const Trace f = wave::ricker(10.0, 0.5, axis);
    const double c = 1e4;
    const NormalizedSignal out = normalize_signsensitive(f, c);
    const ArrayXd recovered = out.density * out.mass_scale;  // p(f)
    for (int n = 0; n < axis.nt; n += 17) {
      const double fplus = std::max(f.values(n), 0.0);
      CHECK(std::abs(recovered(n) - fplus) <= 1.0 / c + 1e-12);
    }
  }
}

TEST_CASE("normalize_exponential") {
  const TimeAxis axis{501, 0.002};
  SUBCASE("zero signal gives the uniform density") {
    const NormalizedSignal out =
        normalize_exponential(Trace(ArrayXd::Zero(axis.nt), axis), 2.0);
    CHECK((out.density - 1.0 / axis.duration()).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("c -> 0 limit tends to uniform") {
    Rng rng(9);
    const Trace f(random_array(rng, axis.nt), axis);
    const NormalizedSignal out = normalize_exponential(f, 1e-8);
    CHECK((out.density - 1.0 / axis.duration()).abs().maxCoeff() < 1e-6);
  }
  SUBCASE("monotone input gives monotone density") {
    ArrayXd v = ArrayXd::LinSpaced(axis.nt, -1.0, 1.0);
    const NormalizedSignal out = normalize_exponential(Trace(v, axis), 1.0);
    for (int n = 1; n < axis.nt; ++n) CHECK(out.density(n) > out.density(n - 1));
  }
  SUBCASE("overflow guard") {
    const Trace f(ArrayXd::Constant(axis.nt, 10.0), axis);
    CHECK_THROWS_AS(static_cast<void>(normalize_exponential(f, 100.0)), config_error);
  }
}

TEST_CASE("normalization jacobian transpose") {
  const TimeAxis axis{401, 0.0025};
  Rng rng(17);

  auto check_adjoint_pairing = [&](NormMethod method, const ArrayXd& fvals, double c) {
    // <J^T v, w> == <v, J w> with J applied by forward differences.
    NormalizationJacobian jac;
    const Trace f(fvals, axis);
    auto normalize = [&](const ArrayXd& vals) -> ArrayXd {
      switch (method) {
        case NormMethod::linear: {
          NormalizationJacobian j2;
          Trace t(vals, axis);
          // freeze c: emulate by shifting directly
          const ArrayXd w = trapezoid_weights(axis);
          const ArrayXd p = vals + c;
          return p / (w * p).sum();
        }
        case NormMethod::sign_sensitive:
          return normalize_signsensitive(Trace(vals, axis), c).density;
        case NormMethod::exponential:
          return normalize_exponential(Trace(vals, axis), c).density;
      }
      return {};
    };
    switch (method) {
      case NormMethod::linear: {
        auto pair = normalize_linear(f, Trace(fvals + 0.5, axis), &jac, nullptr);
        c = pair.first.c;  // actual shared shift used
        break;
      }
      case NormMethod::sign_sensitive:
        normalize_signsensitive(f, c, &jac);
        break;
      case NormMethod::exponential:
        normalize_exponential(f, c, &jac);
        break;
    }
    const ArrayXd v = random_array(rng, axis.nt);
    const ArrayXd w = random_array(rng, axis.nt);
    const double lhs = (apply_normalization_jacobian_transpose(jac, v) * w).sum();
    const double h = 1e-7;
    const ArrayXd jw = (normalize(fvals + h * w) - normalize(fvals - h * w)) / (2 * h);
    const double rhs = (v * jw).sum();
    CHECK(otfwi::test::rel_diff(lhs, rhs) < 1e-6);
  };

  SUBCASE("zero maps to zero") {
    NormalizationJacobian jac;
    normalize_signsensitive(Trace(random_array(rng, axis.nt), axis), 2.0, &jac);
    CHECK(jac.apply_transpose(ArrayXd::Zero(axis.nt)).abs().maxCoeff() == 0.0);
  }
  SUBCASE("sign-sensitive adjoint pairing") {
    check_adjoint_pairing(NormMethod::sign_sensitive, random_array(rng, axis.nt), 1.0);
  }
  SUBCASE("sign-sensitive constant-one input vs FD") {
    const ArrayXd ones = ArrayXd::Constant(axis.nt, 1.0);
    NormalizationJacobian jac;
    normalize_signsensitive(Trace(ones, axis), 1.0, &jac);
    const ArrayXd v = ArrayXd::Constant(axis.nt, 0.7);
    const ArrayXd jt = jac.apply_transpose(v);
    // directional FD of <v, density(f)> along each coordinate, spot checks
    auto dens = [&](const ArrayXd& vals) {
      return normalize_signsensitive(Trace(vals, axis), 1.0).density;
    };
    const double h = 1e-4;  // small enough for O(h^2) truncation, large
    for (int n : {0, 57, 200, 400}) {  // enough to beat subtractive roundoff
      ArrayXd e = ArrayXd::Zero(axis.nt);
      e(n) = 1.0;
      const double fd = ((dens(ones + h * e) - dens(ones - h * e)) / (2 * h) * v).sum();
      CHECK(otfwi::test::rel_diff(jt(n), fd) < 1e-6);
    }
  }
  SUBCASE("linear (frozen c) adjoint pairing") {
    check_adjoint_pairing(NormMethod::linear, random_array(rng, axis.nt), 0.0);
  }
  SUBCASE("exponential adjoint pairing") {
    check_adjoint_pairing(NormMethod::exponential, random_array(rng, axis.nt), 0.8);
  }
}

TEST_CASE("gather normalization") {
  Rng rng(23);
  const MatrixXd f = otfwi::test::random_matrix(rng, 12, 17);
  const double area = 0.01;
  SUBCASE("unit mass and positivity") {
    const NormalizedGather g = normalize_gather(f, NormMethod::sign_sensitive, 5.0, area);
    CHECK(g.density.minCoeff() > 0.0);
    CHECK(g.density.sum() * area == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("jacobian transpose matches FD pairing") {
    const NormalizedGather g = normalize_gather(f, NormMethod::sign_sensitive, 5.0, area);
    const MatrixXd v = otfwi::test::random_matrix(rng, 12, 17);
    const MatrixXd w = otfwi::test::random_matrix(rng, 12, 17);
    const double lhs = gather_jacobian_transpose(g, v).cwiseProduct(w).sum();
    const double h = 1e-7;
    auto dens = [&](const MatrixXd& m) {
      return normalize_gather(m, NormMethod::sign_sensitive, 5.0, area).density;
    };
    const MatrixXd jw = (dens(f + h * w) - dens(f - h * w)) / (2 * h);
    CHECK(otfwi::test::rel_diff(lhs, v.cwiseProduct(jw).sum()) < 1e-6);
  }
}
