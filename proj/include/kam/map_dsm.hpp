#pragma once

#include <array>
#include <utility>

#include "kam/fourier.hpp"

namespace kam {

/// Parameters of the dissipative standard map
///   I'   = lambda I + mu + (eps/2pi) sin(2 pi phi)
///   phi' = phi + I'
struct MapParams {
  BigReal eps;
  BigReal lambda;
  BigReal mu;

  MapParams(BigReal e, BigReal l, BigReal m)
      : eps(std::move(e)), lambda(std::move(l)), mu(std::move(m)) {
    if (lambda.sign() <= 0) throw DomainError("lambda must be positive");
  }
};

struct MapPoint {
  BigReal I;
  BigReal phi;
};

inline MapPoint apply_map(const MapParams& p, const MapPoint& z) {
  BigReal two_pi(BigReal::nullptr_tag{}, z.phi.bits());
  mpfr_const_pi(two_pi.raw(), MPFR_RNDN);
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  BigReal Ip = p.lambda * z.I + p.mu + p.eps / two_pi * sin(two_pi * z.phi);
  BigReal phip = z.phi + Ip;
  return {std::move(Ip), std::move(phip)};
}

/// Df in (I, phi) coordinates: [[lambda, eps cos(2 pi phi)],
///                              [lambda, 1 + eps cos(2 pi phi)]].
inline std::array<BigReal, 4> jacobian(const MapParams& p, const BigReal& phi) {
  BigReal two_pi(BigReal::nullptr_tag{}, phi.bits());
  mpfr_const_pi(two_pi.raw(), MPFR_RNDN);
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  BigReal c = p.eps * cos(two_pi * phi);
  BigReal one(BigReal::nullptr_tag{}, phi.bits());
  mpfr_set_ui(one.raw(), 1, MPFR_RNDN);
  return {p.lambda, c, p.lambda, one + c};
}

inline BigReal jacobian_det(const MapParams& p, const BigReal& phi) {
  auto J = jacobian(p, phi);
  return J[0] * J[3] - J[1] * J[2];
}

/// K(theta) = (theta + u(theta), v(theta)) with v determined by the shift
/// identity v = omega + u - u o T_{-omega}; average(v) = omega always.
struct TorusEmbedding {
  PeriodicFunction u;
  BigReal omega;
  PeriodicFunction v;
};

inline TorusEmbedding embedding_from_u(const PeriodicFunction& u, const BigReal& omega) {
  const PrecisionContext& ctx = u.ctx();
  auto mult = detail::shift_multipliers(ctx, u.n_modes(), omega);
  PeriodicFunction v(ctx, u.n_modes());
  // v_k = u_k (1 - e^{-2 pi i k om}) for k != 0; v_0 = om
  for (std::size_t i = 0; i < u.n_modes(); ++i) {
    BigComplex d = mult[i].conj();
    mpfr_neg(d.re.raw(), d.re.raw(), MPFR_RNDN);
    mpfr_neg(d.im.raw(), d.im.raw(), MPFR_RNDN);
    mpfr_add_ui(d.re.raw(), d.re.raw(), 1, MPFR_RNDN);
    v.data()[i] = u.data()[i] * d;
  }
  v.coeff(0).set_zero();
  mpfr_set(v.coeff(0).re.raw(), omega.raw(), MPFR_RNDN);
  return TorusEmbedding{u, omega, std::move(v)};
}

/// Invariance error E = f_mu o K - K o T_omega, both components periodic,
/// evaluated on the dealiased 2N grid (returned with 2N modes).  This is the
/// reference implementation; the solver keeps a fused fast path and the two
/// are cross-checked in the tests.
struct InvarianceError {
  PeriodicFunction angle;   // degree-one parts cancel by Eq. (uv)
  PeriodicFunction action;
};

inline InvarianceError invariance_error(const MapParams& p, const TorusEmbedding& K) {
  const PrecisionContext& ctx = K.u.ctx();
  const std::size_t n = K.u.n_modes();
  const std::size_t m = 2 * n;
  GridValues gu = fft_inverse(pad_to(K.u, m));
  GridValues gv = fft_inverse(pad_to(K.v, m));
  GridValues gus = fft_inverse(pad_to(shift(K.u, K.omega), m));
  GridValues gvs = fft_inverse(pad_to(shift(K.v, K.omega), m));
  BigReal two_pi = pi(ctx);
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  BigReal eps_over_2pi = p.eps / two_pi;
  GridValues Ea(ctx, m), Ei(ctx, m);
  BigReal arg(ctx), s(ctx), c(ctx), Ip(ctx), theta(ctx);
  for (std::size_t j = 0; j < m; ++j) {
    mpfr_set_ui(theta.raw(), static_cast<unsigned long>(j), MPFR_RNDN);
    mpfr_div_ui(theta.raw(), theta.raw(), static_cast<unsigned long>(m), MPFR_RNDN);
    mpfr_add(arg.raw(), theta.raw(), gu.values[j].re.raw(), MPFR_RNDN);
    mpfr_mul(arg.raw(), arg.raw(), two_pi.raw(), MPFR_RNDN);
    mpfr_sin_cos(s.raw(), c.raw(), arg.raw(), MPFR_RNDN);
    // I' = lambda v + mu + (eps/2pi) sin
    mpfr_fma(Ip.raw(), p.lambda.raw(), gv.values[j].re.raw(), p.mu.raw(), MPFR_RNDN);
    mpfr_fma(Ip.raw(), eps_over_2pi.raw(), s.raw(), Ip.raw(), MPFR_RNDN);
    // angle component: u + I' - omega - u o T_om
    mpfr_add(Ea.values[j].re.raw(), gu.values[j].re.raw(), Ip.raw(), MPFR_RNDN);
    mpfr_sub(Ea.values[j].re.raw(), Ea.values[j].re.raw(), K.omega.raw(), MPFR_RNDN);
    mpfr_sub(Ea.values[j].re.raw(), Ea.values[j].re.raw(), gus.values[j].re.raw(), MPFR_RNDN);
    // action component: I' - v o T_om
    mpfr_sub(Ei.values[j].re.raw(), Ip.raw(), gvs.values[j].re.raw(), MPFR_RNDN);
  }
  return {fft_forward(Ea), fft_forward(Ei)};
}

inline BigReal error_norm(const InvarianceError& e, const BigReal& rho) {
  return analytic_norm(e.angle, rho) + analytic_norm(e.action, rho);
}

/// Sups of the map derivatives entering Theorem hypotheses.  For this family
/// D_mu f = (1,1)^T is constant, so every mixed mu-derivative of order >= 2
/// vanishes identically and Q_mu0 = 1.
struct DerivativeBounds {
  BigReal Q0;
  BigReal Q_mu0;
  BigReal Q_zmu0;
  BigReal Q_mumu0;
  BigReal sup_D2f;
  BigReal sup_D3f;
  BigReal sup_DmuDf;
  BigReal sup_DmuD2f;
  BigReal sup_Dmu2f;
  BigReal sup_DDmu2f;
  BigReal sup_Dmu3f;
};

/// Each sup realized as the analytic norm at rho0 of the derivative composed
/// with K on the strip (the zeta-margin of H4 is checked separately).
inline DerivativeBounds derivative_bounds(const MapParams& p, const TorusEmbedding& K,
                                          const BigReal& rho0) {
  const PrecisionContext& ctx = K.u.ctx();
  const std::size_t n = K.u.n_modes();
  const std::size_t m = 2 * n;
  GridValues gu = fft_inverse(pad_to(K.u, m));
  BigReal two_pi = pi(ctx);
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  GridValues gs(ctx, m), gc(ctx, m);
  BigReal arg(ctx), theta(ctx);
  for (std::size_t j = 0; j < m; ++j) {
    mpfr_set_ui(theta.raw(), static_cast<unsigned long>(j), MPFR_RNDN);
    mpfr_div_ui(theta.raw(), theta.raw(), static_cast<unsigned long>(m), MPFR_RNDN);
    mpfr_add(arg.raw(), theta.raw(), gu.values[j].re.raw(), MPFR_RNDN);
    mpfr_mul(arg.raw(), arg.raw(), two_pi.raw(), MPFR_RNDN);
    mpfr_sin_cos(gs.values[j].re.raw(), gc.values[j].re.raw(), arg.raw(), MPFR_RNDN);
  }
  PeriodicFunction sinK = fft_forward(gs);
  PeriodicFunction cosK = fft_forward(gc);
  BigReal ns = analytic_norm(sinK, rho0);
  BigReal nc = analytic_norm(cosK, rho0);
  BigReal zero(ctx), one(ctx, 1L), two(ctx, 2L);
  // Df o K rows (angle-first ordering): [1 + eps cosK | lambda], [eps cosK | lambda]
  PeriodicFunction c_pf = scale(cosK, p.eps);
  PeriodicFunction one_c = c_pf;
  mpfr_add_ui(one_c.coeff(0).re.raw(), one_c.coeff(0).re.raw(), 1, MPFR_RNDN);
  BigReal q0 = max(analytic_norm(one_c, rho0), abs(p.lambda)) +
               max(analytic_norm(c_pf, rho0), abs(p.lambda));
  DerivativeBounds b{q0,  one, zero, zero,
                     two * two_pi * p.eps * ns,
                     two * two_pi * two_pi * p.eps * nc,
                     zero, zero, zero, zero, zero};
  return b;
}

}  // namespace kam
