#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "kam/map_dsm.hpp"

using namespace kam;

namespace {

PeriodicFunction sine_u(const PrecisionContext& ctx, std::size_t n, double amp) {
  PeriodicFunction u(ctx, n);
  mpfr_set_d(u.coeff(1).im.raw(), -amp / 2, MPFR_RNDN);
  mpfr_set_d(u.coeff(-1).im.raw(), amp / 2, MPFR_RNDN);
  return u;
}

}  // namespace

TEST_CASE("map application") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx);
  SECTION("unperturbed circle rotates rigidly") {
    MapParams p(BigReal(ctx), BigReal(ctx, "0.9"), BigReal(ctx, "0.1") * om);
    MapPoint z{om, BigReal(ctx)};
    MapPoint w = apply_map(p, z);
    CHECK(abs(w.I - om) < BigReal(ctx, "1e-57"));
    CHECK(abs(w.phi - om) < BigReal(ctx, "1e-57"));
  }
  SECTION("sine vanishes at phi = 0") {
    MapParams p(BigReal(ctx, "0.7"), BigReal(ctx, "0.9"), BigReal(ctx, "0.02"));
    MapPoint z{BigReal(ctx, "0.3"), BigReal(ctx)};
    MapPoint w = apply_map(p, z);
    CHECK(abs(w.I - (p.lambda * z.I + p.mu)) < BigReal(ctx, "1e-57"));
  }
  SECTION("quarter phase with eps = 2 pi") {
    BigReal two_pi = pi(ctx);
    mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
    MapParams p(two_pi, BigReal(ctx, 1L), BigReal(ctx));
    MapPoint z{BigReal(ctx), BigReal(ctx, "0.25")};
    MapPoint w = apply_map(p, z);
    CHECK(abs(w.I - BigReal(ctx, 1L)) < BigReal(ctx, "1e-57"));
    CHECK(abs(w.phi - BigReal(ctx, "1.25")) < BigReal(ctx, "1e-57"));
  }
  SECTION("lambda must be positive") {
    CHECK_THROWS_AS(MapParams(BigReal(ctx), BigReal(ctx, -1L), BigReal(ctx)),
                    DomainError);
  }
}

TEST_CASE("jacobian") {
  auto ctx = make_context(60);
  SECTION("eps = 0 closed form") {
    MapParams p(BigReal(ctx), BigReal(ctx, "0.9"), BigReal(ctx));
    auto J = jacobian(p, BigReal(ctx, "0.37"));
    CHECK(J[0] == p.lambda);
    CHECK(J[1].sign() == 0);
    CHECK(J[2] == p.lambda);
    CHECK(J[3] == BigReal(ctx, 1L));
  }
  SECTION("determinant equals lambda at random points") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    BigReal tol(ctx, "1e-56");  // 10^(-d+4)
    for (int i = 0; i < 100; ++i) {
      MapParams p(BigReal(ctx, 2.0 * dist(rng)), BigReal(ctx, "0.9"), BigReal(ctx));
      BigReal d = jacobian_det(p, BigReal(ctx, dist(rng)));
      CHECK(abs(d - p.lambda) < tol);
    }
  }
  SECTION("finite differences confirm the analytic entries") {
    MapParams p(BigReal(ctx, "0.8"), BigReal(ctx, "0.9"), BigReal(ctx, "0.05"));
    BigReal phi(ctx, "0.31"), I(ctx, "0.62");
    BigReal h(ctx, "1e-14"), two(ctx, 2L);
    auto J = jacobian(p, phi);
    MapPoint zp = apply_map(p, {I, phi + h}), zm = apply_map(p, {I, phi - h});
    BigReal dIdphi = (zp.I - zm.I) / (two * h);
    BigReal dphidphi = (zp.phi - zm.phi) / (two * h);
    MapPoint wp = apply_map(p, {I + h, phi}), wm = apply_map(p, {I - h, phi});
    BigReal dIdI = (wp.I - wm.I) / (two * h);
    BigReal dphidI = (wp.phi - wm.phi) / (two * h);
    BigReal tol(ctx, "1e-27");  // central difference, error O(h^2)
    CHECK(abs(dIdI - J[0]) < tol);
    CHECK(abs(dIdphi - J[1]) < tol);
    CHECK(abs(dphidI - J[2]) < tol);
    CHECK(abs(dphidphi - J[3]) < tol);
  }
}

TEST_CASE("embedding from u") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx);
  SECTION("u = 0 gives the circle K(theta) = (theta, omega)") {
    PeriodicFunction u(ctx, 32);
    TorusEmbedding K = embedding_from_u(u, om);
    CHECK(abs(average(K.v) - om) < BigReal(ctx, "1e-57"));
    CHECK(analytic_norm(zero_average(K.v)).sign() == 0);
  }
  SECTION("v = omega + u - u o T_{-omega}") {
    PeriodicFunction u = sine_u(ctx, 32, 1.0);
    TorusEmbedding K = embedding_from_u(u, om);
    PeriodicFunction expect = sub(u, shift(u, -om));
    mpfr_add(expect.coeff(0).re.raw(), expect.coeff(0).re.raw(), om.raw(), MPFR_RNDN);
    BigReal worst(ctx);
    for (std::size_t i = 0; i < 32; ++i) {
      BigReal d = (K.v.data()[i] - expect.data()[i]).modulus();
      if (d > worst) worst = d;
    }
    CHECK(worst < BigReal(ctx, "1e-56"));
  }
  SECTION("average(v) = omega for random u") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> dist(-0.01, 0.01);
    PeriodicFunction u(ctx, 32);
    for (long k = 1; k <= 8; ++k) {
      double a = dist(rng), b = dist(rng);
      mpfr_set_d(u.coeff(k).re.raw(), a, MPFR_RNDN);
      mpfr_set_d(u.coeff(k).im.raw(), b, MPFR_RNDN);
      mpfr_set_d(u.coeff(-k).re.raw(), a, MPFR_RNDN);
      mpfr_set_d(u.coeff(-k).im.raw(), -b, MPFR_RNDN);
    }
    TorusEmbedding K = embedding_from_u(u, om);
    CHECK(abs(average(K.v) - om) < BigReal(ctx, "1e-57"));
  }
}

TEST_CASE("invariance error") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx);
  const std::size_t n = 64;
  SECTION("exact solution at eps = 0") {
    PeriodicFunction u(ctx, n);
    MapParams p(BigReal(ctx), BigReal(ctx, "0.9"),
                (BigReal(ctx, 1L) - BigReal(ctx, "0.9")) * om);
    auto E = invariance_error(p, embedding_from_u(u, om));
    CHECK(error_norm(E, BigReal(ctx, "1e-4")) < BigReal(ctx, "1e-54"));  // 10^(-d+6)
  }
  SECTION("linear response of the residual to a small sine perturbation") {
    MapParams p(BigReal(ctx), BigReal(ctx, "0.9"),
                (BigReal(ctx, 1L) - BigReal(ctx, "0.9")) * om);
    BigReal rho(ctx);
    BigReal n1 =
        error_norm(invariance_error(p, embedding_from_u(sine_u(ctx, n, 1e-6), om)), rho);
    BigReal n2 =
        error_norm(invariance_error(p, embedding_from_u(sine_u(ctx, n, 2e-6), om)), rho);
    BigReal ratio = n2 / n1;
    CHECK(abs(ratio - BigReal(ctx, 2L)) < BigReal(ctx, "1e-4"));
  }
  SECTION("angle and action components coincide on the derived manifold") {
    MapParams p(BigReal(ctx, "0.3"), BigReal(ctx, "0.9"), BigReal(ctx, "0.0618"));
    auto E = invariance_error(p, embedding_from_u(sine_u(ctx, n, 0.01), om));
    PeriodicFunction diff = sub(E.angle, E.action);
    CHECK(analytic_norm(diff) < BigReal(ctx, "1e-55"));
  }
}

TEST_CASE("derivative bounds") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx);
  SECTION("unperturbed map has no second or third derivative") {
    MapParams p(BigReal(ctx), BigReal(ctx, "0.9"), BigReal(ctx, "0.0618"));
    auto b = derivative_bounds(p, embedding_from_u(PeriodicFunction(ctx, 32), om),
                               BigReal(ctx, "1e-4"));
    CHECK(b.sup_D2f.sign() == 0);
    CHECK(b.sup_D3f.sign() == 0);
    CHECK(b.Q_mu0 == BigReal(ctx, 1L));
    CHECK(b.Q_zmu0.sign() == 0);
    CHECK(b.Q_mumu0.sign() == 0);
  }
  SECTION("Q0 matches the row norms of Df o K for the trivial circle") {
    // at u = 0: rows are [1 + eps cos | lambda] and [eps cos | lambda], so
    // Q0 = (1 + eps e^{2 pi rho}) + eps e^{2 pi rho} once eps e^{..} > lambda
    MapParams p(BigReal(ctx, "0.95"), BigReal(ctx, "0.9"), BigReal(ctx, "0.0618"));
    BigReal rho(ctx, "1e-3");
    auto b = derivative_bounds(p, embedding_from_u(PeriodicFunction(ctx, 64), om), rho);
    BigReal two_pi = pi(ctx);
    mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
    BigReal w = exp(two_pi * rho);
    BigReal expect = BigReal(ctx, 1L) + BigReal(ctx, 2L) * p.eps * w;
    CHECK(abs(b.Q0 - expect) < BigReal(ctx, "1e-50"));
  }
}
