#pragma once

#include <array>
#include <string>
#include <vector>

#include "kam/map_dsm.hpp"

namespace kam {

class FrameError : public Error {
 public:
  using Error::Error;
};
class TwistError : public Error {
 public:
  using Error::Error;
};
class DivergenceError : public Error {
 public:
  using Error::Error;
};
class CohomologyError : public Error {
 public:
  using Error::Error;
};

/// phi(theta+om) - lambda phi(theta) = eta(theta), coefficient-wise
/// phi_k = eta_k / (e^{2 pi i k om} - lambda).  For lambda = 1 the k = 0
/// divisor vanishes: the solution is normalized to zero average and a
/// nonzero average(eta) is rejected.
inline PeriodicFunction solve_cohomology_dissipative(const PeriodicFunction& eta,
                                                     const BigReal& lambda,
                                                     const BigReal& omega) {
  const PrecisionContext& ctx = eta.ctx();
  const bool unit = abs(lambda) == BigReal(ctx, 1L);
  if (unit) {
    BigReal bound = pow_int(BigReal(ctx, 10L), -(ctx.decimal_digits() - 10));
    if (eta.coeff(0).modulus() > bound)
      throw CohomologyError("cohomology equation unsolvable: |lambda| = 1 with "
                            "nonzero average " +
                            eta.coeff(0).modulus().to_string(8));
  }
  auto mult = detail::shift_multipliers(ctx, eta.n_modes(), omega);
  PeriodicFunction phi(ctx, eta.n_modes());
  BigComplex d(ctx);
  for (std::size_t i = 0; i < eta.n_modes(); ++i) {
    if (eta.k_at(i) == 0 && unit) {
      phi.data()[i].set_zero();
      continue;
    }
    d = mult[i];
    mpfr_sub(d.re.raw(), d.re.raw(), lambda.raw(), MPFR_RNDN);
    phi.data()[i] = div(eta.data()[i], d);
  }
  return phi;
}

/// phi(theta) - phi(theta+om) = eta(theta): phi_k = eta_k/(1 - e^{2 pi i k om})
/// for k != 0, phi_0 = 0 (the average of the solution is free).
inline PeriodicFunction solve_cohomology_small_divisor(const PeriodicFunction& eta,
                                                       const BigReal& omega) {
  const PrecisionContext& ctx = eta.ctx();
  BigReal bound = pow_int(BigReal(ctx, 10L), -(ctx.decimal_digits() - 10));
  if (eta.coeff(0).modulus() > bound)
    throw CohomologyError("small-divisor equation unsolvable: average(eta) = " +
                          eta.coeff(0).modulus().to_string(8));
  auto mult = detail::shift_multipliers(ctx, eta.n_modes(), omega);
  PeriodicFunction phi(ctx, eta.n_modes());
  BigComplex d(ctx);
  for (std::size_t i = 0; i < eta.n_modes(); ++i) {
    if (eta.k_at(i) == 0) {
      phi.data()[i].set_zero();
      continue;
    }
    mpfr_ui_sub(d.re.raw(), 1, mult[i].re.raw(), MPFR_RNDN);
    mpfr_neg(d.im.raw(), mult[i].im.raw(), MPFR_RNDN);
    phi.data()[i] = div(eta.data()[i], d);
  }
  return phi;
}

/// Adapted frame of one Newton step (materialized form; the solver itself
/// works on grids and assembles this only on request).
struct FrameData {
  std::array<PeriodicFunction, 4> M;     // row-major 2x2
  std::array<PeriodicFunction, 4> Minv;  // pointwise inverse, cross-checked
  PeriodicFunction N;                    // (DK^T DK)^{-1}, scalar here
  PeriodicFunction S;
  std::array<PeriodicFunction, 2> A_tilde;
  PeriodicFunction B_a0;                 // zero average
  PeriodicFunction B_b0;                 // zero average
};

struct DriftSolution {
  BigReal W2_bar;
  BigReal sigma;
  BigReal twist_T0;  // matrix norm of the inverse system matrix
  BigReal det;
};

struct NewtonReport {
  BigReal residual_before;
  BigReal residual_after;
  BigReal sigma;
  BigReal w1_norm;
  BigReal w2_norm;
};

struct SolveResult {
  PeriodicFunction u;
  BigReal mu;
  bool converged = false;
  int iterations = 0;
  std::string failure;                    // empty when converged
  std::vector<BigReal> residual_history;  // one entry per error evaluation
};

struct SolverOptions {
  BigReal tol;
  BigReal residual_rho;  // radius for the convergence residual (0 = plain l1)
  BigReal w_cap;         // diverging-step cap on ||W||
  int max_iter = 40;

  explicit SolverOptions(const PrecisionContext& ctx)
      : tol(ctx, "1e-46"), residual_rho(ctx), w_cap(ctx, 1000L) {}
};

/// Preallocated buffers and tables for repeated Newton steps at fixed
/// (precision, mode count, frequency).  Grid work happens on the 2N
/// dealiasing grid; cohomology solves and the stored solution live on N
/// modes.  One instance is not thread-safe; distinct instances are
/// independent.
class NewtonWorkspace {
 public:
  NewtonWorkspace(const PrecisionContext& ctx, std::size_t n_modes, BigReal omega)
      : ctx_(ctx),
        n_(n_modes),
        m_(2 * n_modes),
        omega_(std::move(omega)),
        two_pi_(pi(ctx)),
        shift_fwd_(detail::shift_multipliers(ctx, n_modes, omega_)),
        v_(ctx, n_modes),
        du_(ctx, n_modes),
        dv_(ctx, n_modes),
        Ea_hat_(ctx, 2 * n_modes),
        Ei_hat_(ctx, 2 * n_modes),
        shifted_(ctx, n_modes),
        cbuf_(2 * n_modes, BigComplex(ctx)),
        t0_(ctx),
        t1_(ctx),
        t2_(ctx),
        t3_(ctx),
        t4_(ctx) {
    if (!is_pow2(n_modes)) throw DomainError("mode count must be a power of two");
    mpfr_mul_2ui(two_pi_.raw(), two_pi_.raw(), 1, MPFR_RNDN);
    auto real_grid = [&] { return std::vector<BigReal>(m_, BigReal(ctx_)); };
    gu_ = real_grid(); gv_ = real_grid(); gus_ = real_grid(); gvs_ = real_grid();
    gdu_ = real_grid(); gdv_ = real_grid(); gdus_ = real_grid(); gdvs_ = real_grid();
    sinb_ = real_grid(); cosb_ = real_grid(); Ea_ = real_grid(); Ei_ = real_grid();
    Ng_ = real_grid(); Ns_ = real_grid(); Sg_ = real_grid();
    Et1_ = real_grid(); Et2_ = real_grid(); A1_ = real_grid(); A2_ = real_grid();
    gBa_ = real_grid(); gBb_ = real_grid(); gW2_ = real_grid(); gW1_ = real_grid();
    theta2pi_.reserve(m_);
    for (std::size_t j = 0; j < m_; ++j) {
      BigReal th(ctx_, static_cast<long>(j));
      mpfr_div_ui(th.raw(), th.raw(), static_cast<unsigned long>(m_), MPFR_RNDN);
      mpfr_mul(th.raw(), th.raw(), two_pi_.raw(), MPFR_RNDN);
      theta2pi_.push_back(std::move(th));
    }
  }

  const PrecisionContext& ctx() const { return ctx_; }
  std::size_t n_modes() const { return n_; }
  const BigReal& omega() const { return omega_; }

  /// Build E = f o K - K o T_om at (u, p.mu); fills the error grids and
  /// their 2N-mode coefficients.
  void eval_error(const PeriodicFunction& u, const MapParams& p) {
    require_modes(u);
    v_ = make_v(u);
    grid_from(u, gu_);
    grid_from(v_, gv_);
    shifted_ = shift_n(u);
    grid_from(shifted_, gus_);
    shifted_ = shift_n(v_);
    grid_from(shifted_, gvs_);
    BigReal eps2pi = p.eps / two_pi_;
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_fma(t0_.raw(), two_pi_.raw(), gu_[j].raw(), theta2pi_[j].raw(), MPFR_RNDN);
      mpfr_sin_cos(sinb_[j].raw(), cosb_[j].raw(), t0_.raw(), MPFR_RNDN);
      // I' = lambda v + mu + (eps/2pi) sin
      mpfr_fma(t0_.raw(), p.lambda.raw(), gv_[j].raw(), p.mu.raw(), MPFR_RNDN);
      mpfr_fma(t0_.raw(), eps2pi.raw(), sinb_[j].raw(), t0_.raw(), MPFR_RNDN);
      mpfr_sub(Ei_[j].raw(), t0_.raw(), gvs_[j].raw(), MPFR_RNDN);   // I' - v o T_om
      mpfr_add(t0_.raw(), t0_.raw(), gu_[j].raw(), MPFR_RNDN);       // u + I'
      mpfr_sub(t0_.raw(), t0_.raw(), omega_.raw(), MPFR_RNDN);
      mpfr_sub(Ea_[j].raw(), t0_.raw(), gus_[j].raw(), MPFR_RNDN);
    }
    pf_from_grid(Ea_, Ea_hat_);
    pf_from_grid(Ei_, Ei_hat_);
    have_error_ = true;
  }

  /// ||E|| of the last eval_error, vector norm = sum of component norms.
  BigReal residual(const BigReal& rho) const {
    return analytic_norm(Ea_hat_, rho) + analytic_norm(Ei_hat_, rho);
  }
  const PeriodicFunction& error_angle() const { return Ea_hat_; }
  const PeriodicFunction& error_action() const { return Ei_hat_; }
  const PeriodicFunction& derived_v() const { return v_; }

  struct Correction {
    PeriodicFunction u;
    BigReal mu;
    BigReal sigma;
    BigReal w1_norm;
    BigReal w2_norm;
    DriftSolution drift;
  };

  /// Algorithm steps 2-13 applied to the error from the last eval_error.
  Correction correct(const PeriodicFunction& u, const MapParams& p, const BigReal& w_cap) {
    if (!have_error_) throw Error("correct() called before eval_error()");
    require_modes(u);
    frame_grids(u);
    // Etilde = (Minv o T_om) E with Minv = [[N(1+u'), N v'], [-v', 1+u']]
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_add_ui(t0_.raw(), gdus_[j].raw(), 1, MPFR_RNDN);  // 1 + u' o T_om
      mpfr_fmma(t1_.raw(), t0_.raw(), Ea_[j].raw(), gdvs_[j].raw(), Ei_[j].raw(), MPFR_RNDN);
      mpfr_mul(Et1_[j].raw(), Ns_[j].raw(), t1_.raw(), MPFR_RNDN);
      mpfr_fmms(Et2_[j].raw(), t0_.raw(), Ei_[j].raw(), gdvs_[j].raw(), Ea_[j].raw(), MPFR_RNDN);
    }
    fill_S_A(p);
    PeriodicFunction Et1n = truncate_to(pf_from_grid_tmp(Et1_), n_);
    PeriodicFunction Et2n = truncate_to(pf_from_grid_tmp(Et2_), n_);
    PeriodicFunction A1n = truncate_to(pf_from_grid_tmp(A1_), n_);
    PeriodicFunction A2n = truncate_to(pf_from_grid_tmp(A2_), n_);
    // step 8: lambda B - B o T_om = -(zero-average part), i.e. the
    // dissipative equation B o T_om - lambda B = (...)^0
    PeriodicFunction Ba = solve_cohomology_dissipative(zero_average(Et2n), p.lambda, omega_);
    PeriodicFunction Bb = solve_cohomology_dissipative(zero_average(A2n), p.lambda, omega_);
    grid_from(Ba, gBa_);
    grid_from(Bb, gBb_);
    DriftSolution drift = drift_solve_grids(p, average(Et1n), average(Et2n),
                                            average(A1n), average(A2n));
    // W2 = (B_a + sigma B_b) + W2bar
    PeriodicFunction W2 = add(Ba, scale(Bb, drift.sigma));
    mpfr_add(W2.coeff(0).re.raw(), W2.coeff(0).re.raw(), drift.W2_bar.raw(), MPFR_RNDN);
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_fma(t0_.raw(), drift.sigma.raw(), gBb_[j].raw(), gBa_[j].raw(), MPFR_RNDN);
      mpfr_add(gW2_[j].raw(), t0_.raw(), drift.W2_bar.raw(), MPFR_RNDN);
      mpfr_mul(Et2_[j].raw(), Sg_[j].raw(), gW2_[j].raw(), MPFR_RNDN);  // reuse: S W2
    }
    PeriodicFunction SW2 = truncate_to(pf_from_grid_tmp(Et2_), n_);
    // step 12 right-hand side: -(S W2)^0 - (Et1)^0 - sigma (A1)^0
    PeriodicFunction rhs1(ctx_, n_);
    for (std::size_t i = 0; i < n_; ++i) {
      if (rhs1.k_at(i) == 0) continue;
      BigComplex& o = rhs1.data()[i];
      mpfr_fma(o.re.raw(), drift.sigma.raw(), A1n.data()[i].re.raw(),
               SW2.data()[i].re.raw(), MPFR_RNDN);
      mpfr_add(o.re.raw(), o.re.raw(), Et1n.data()[i].re.raw(), MPFR_RNDN);
      mpfr_neg(o.re.raw(), o.re.raw(), MPFR_RNDN);
      mpfr_fma(o.im.raw(), drift.sigma.raw(), A1n.data()[i].im.raw(),
               SW2.data()[i].im.raw(), MPFR_RNDN);
      mpfr_add(o.im.raw(), o.im.raw(), Et1n.data()[i].im.raw(), MPFR_RNDN);
      mpfr_neg(o.im.raw(), o.im.raw(), MPFR_RNDN);
    }
    PeriodicFunction W1 = solve_cohomology_small_divisor(rhs1, omega_);
    BigReal zero_rho(ctx_);
    BigReal w1n = analytic_norm(W1, zero_rho), w2n = analytic_norm(W2, zero_rho);
    if (w1n + w2n > w_cap)
      throw DivergenceError("diverging step: ||W|| = " + (w1n + w2n).to_string(8));
    grid_from(W1, gW1_);
    // Delta-phi = (1+u') W1 - v' N W2, folded into u
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_add_ui(t0_.raw(), gdu_[j].raw(), 1, MPFR_RNDN);
      mpfr_mul(t1_.raw(), gdv_[j].raw(), Ng_[j].raw(), MPFR_RNDN);
      mpfr_fmms(Et1_[j].raw(), t0_.raw(), gW1_[j].raw(), t1_.raw(), gW2_[j].raw(), MPFR_RNDN);
    }
    PeriodicFunction dphi = truncate_to(pf_from_grid_tmp(Et1_), n_);
    Correction out{add(u, dphi), p.mu + drift.sigma, drift.sigma, w1n, w2n, drift};
    symmetrize_real(out.u);
    have_error_ = false;
    return out;
  }

  /// Materialized frame at (u, p); reference path for certification and
  /// tests.  Entries carry the full 2N product bandwidth.
  FrameData build_frame(const PeriodicFunction& u, const MapParams& p) {
    eval_error(u, p);
    frame_grids(u);
    fill_S_A(p);
    std::vector<BigReal> g(m_, BigReal(ctx_));
    // M = [DK | J^{-1} DK N] = [[1+u', -v'N], [v', (1+u')N]]
    for (std::size_t j = 0; j < m_; ++j) mpfr_add_ui(g[j].raw(), gdu_[j].raw(), 1, MPFR_RNDN);
    PeriodicFunction m11 = pf_from_grid_tmp(g);
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_mul(g[j].raw(), gdv_[j].raw(), Ng_[j].raw(), MPFR_RNDN);
      mpfr_neg(g[j].raw(), g[j].raw(), MPFR_RNDN);
    }
    PeriodicFunction m12 = pf_from_grid_tmp(g);
    for (std::size_t j = 0; j < m_; ++j) mpfr_set(g[j].raw(), gdv_[j].raw(), MPFR_RNDN);
    PeriodicFunction m21 = pf_from_grid_tmp(g);
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_add_ui(t0_.raw(), gdu_[j].raw(), 1, MPFR_RNDN);
      mpfr_mul(g[j].raw(), t0_.raw(), Ng_[j].raw(), MPFR_RNDN);
    }
    PeriodicFunction m22 = pf_from_grid_tmp(g);
    // pointwise 2x2 inversion on the grid, cross-checked against the
    // Lagrangian closed form [[N(1+u'), N v'], [-v', 1+u']]
    BigReal degen = pow_int(BigReal(ctx_, 10L), -(ctx_.decimal_digits() / 2));
    BigReal xtol = pow_int(BigReal(ctx_, 10L), -(ctx_.decimal_digits() - 12));
    std::vector<BigReal> i11(m_, BigReal(ctx_)), i12(m_, BigReal(ctx_)),
        i21(m_, BigReal(ctx_)), i22(m_, BigReal(ctx_));
    BigReal maxdiff(ctx_);
    for (std::size_t j = 0; j < m_; ++j) {
      // det M = (1+u')^2 N + v'^2 N = 1 up to roundoff; invert literally
      mpfr_add_ui(t0_.raw(), gdu_[j].raw(), 1, MPFR_RNDN);
      mpfr_mul(t1_.raw(), t0_.raw(), t0_.raw(), MPFR_RNDN);
      mpfr_fma(t1_.raw(), gdv_[j].raw(), gdv_[j].raw(), t1_.raw(), MPFR_RNDN);
      mpfr_mul(t2_.raw(), t1_.raw(), Ng_[j].raw(), MPFR_RNDN);  // det
      if (abs(t2_) < degen) throw FrameError("frame degenerate: det M vanishes");
      // inv = [[m22, -m12], [-m21, m11]]/det with the entry grids
      mpfr_mul(t3_.raw(), t0_.raw(), Ng_[j].raw(), MPFR_RNDN);  // (1+u')N
      mpfr_div(i11[j].raw(), t3_.raw(), t2_.raw(), MPFR_RNDN);
      mpfr_mul(t4_.raw(), gdv_[j].raw(), Ng_[j].raw(), MPFR_RNDN);  // v'N
      mpfr_div(i12[j].raw(), t4_.raw(), t2_.raw(), MPFR_RNDN);      // -(-v'N)/det
      mpfr_div(i21[j].raw(), gdv_[j].raw(), t2_.raw(), MPFR_RNDN);
      mpfr_neg(i21[j].raw(), i21[j].raw(), MPFR_RNDN);
      mpfr_div(i22[j].raw(), t0_.raw(), t2_.raw(), MPFR_RNDN);
      // cross-check first row against N(1+u'), N v'
      mpfr_sub(t3_.raw(), t3_.raw(), i11[j].raw(), MPFR_RNDN);
      mpfr_abs(t3_.raw(), t3_.raw(), MPFR_RNDN);
      if (t3_ > maxdiff) maxdiff = t3_;
      mpfr_sub(t4_.raw(), t4_.raw(), i12[j].raw(), MPFR_RNDN);
      mpfr_abs(t4_.raw(), t4_.raw(), MPFR_RNDN);
      if (t4_ > maxdiff) maxdiff = t4_;
    }
    if (maxdiff > xtol)
      throw FrameError("pointwise M^-1 disagrees with the Lagrangian formula by " +
                       maxdiff.to_string(8));
    for (std::size_t j = 0; j < m_; ++j) mpfr_set(g[j].raw(), Ng_[j].raw(), MPFR_RNDN);
    PeriodicFunction Nf = pf_from_grid_tmp(g);
    PeriodicFunction Sf = pf_from_grid_tmp(Sg_);
    PeriodicFunction A1f = pf_from_grid_tmp(A1_);
    PeriodicFunction A2f = pf_from_grid_tmp(A2_);
    // Etilde(2) for B_a0 (second row of Minv o T_om carries no N factor)
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_add_ui(t0_.raw(), gdus_[j].raw(), 1, MPFR_RNDN);
      mpfr_fmms(g[j].raw(), t0_.raw(), Ei_[j].raw(), gdvs_[j].raw(), Ea_[j].raw(), MPFR_RNDN);
    }
    PeriodicFunction Et2f = truncate_to(pf_from_grid_tmp(g), n_);
    PeriodicFunction Ba = solve_cohomology_dissipative(zero_average(Et2f), p.lambda, omega_);
    PeriodicFunction Bb = solve_cohomology_dissipative(
        zero_average(truncate_to(A2f, n_)), p.lambda, omega_);
    return FrameData{{m11, m12, m21, m22},
                     {pf_from_grid_tmp(i11), pf_from_grid_tmp(i12),
                      pf_from_grid_tmp(i21), pf_from_grid_tmp(i22)},
                     Nf, Sf, {A1f, A2f}, Ba, Bb};
  }

  /// Everything certification consumes, produced with a single trigonometric
  /// pass: the frame, the error, sin/cos of the composed angle, the
  /// reciprocal-N function and the drift solve (for the twist constant).
  struct CertifyPass {
    FrameData frame;
    PeriodicFunction E_angle, E_action;  // 2N modes
    PeriodicFunction sinK, cosK;         // 2N modes
    PeriodicFunction Ninv;               // (1+u')^2 + v'^2
    DriftSolution drift;
  };

  CertifyPass certify_pass(const PeriodicFunction& u, const MapParams& p) {
    FrameData frame = build_frame(u, p);
    PeriodicFunction sinK = pf_from_grid_tmp(sinb_);
    PeriodicFunction cosK = pf_from_grid_tmp(cosb_);
    std::vector<BigReal> q(m_, BigReal(ctx_));
    for (std::size_t j = 0; j < m_; ++j)
      mpfr_ui_div(q[j].raw(), 1, Ng_[j].raw(), MPFR_RNDN);
    PeriodicFunction Ninv = pf_from_grid_tmp(q);
    grid_from(frame.B_a0, gBa_);
    grid_from(frame.B_b0, gBb_);
    // Etilde averages from the error grids (first row carries N o T_om)
    BigReal et1(ctx_), et2(ctx_);
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_add_ui(t0_.raw(), gdus_[j].raw(), 1, MPFR_RNDN);
      mpfr_fmma(t1_.raw(), t0_.raw(), Ea_[j].raw(), gdvs_[j].raw(), Ei_[j].raw(), MPFR_RNDN);
      mpfr_fma(et1.raw(), Ns_[j].raw(), t1_.raw(), et1.raw(), MPFR_RNDN);
      mpfr_fmms(t1_.raw(), t0_.raw(), Ei_[j].raw(), gdvs_[j].raw(), Ea_[j].raw(), MPFR_RNDN);
      mpfr_add(et2.raw(), et2.raw(), t1_.raw(), MPFR_RNDN);
    }
    const unsigned long lg = static_cast<unsigned long>(__builtin_ctzll(m_));
    mpfr_div_2ui(et1.raw(), et1.raw(), lg, MPFR_RNDN);
    mpfr_div_2ui(et2.raw(), et2.raw(), lg, MPFR_RNDN);
    DriftSolution drift = drift_solve_grids(p, et1, et2, average(frame.A_tilde[0]),
                                            average(frame.A_tilde[1]));
    return CertifyPass{std::move(frame), Ea_hat_, Ei_hat_, std::move(sinK),
                       std::move(cosK), std::move(Ninv), std::move(drift)};
  }

  /// Averages of the grid quantities and the 2x2 drift solve; the public
  /// overload below works from a materialized frame instead.
  DriftSolution drift_solve_grids(const MapParams& p, const BigReal& Et1_avg,
                                  const BigReal& Et2_avg, const BigReal& A1_avg,
                                  const BigReal& A2_avg) {
    BigReal Sb = grid_mean(Sg_);
    BigReal SBa = grid_mean_prod(Sg_, gBa_);
    BigReal SBb = grid_mean_prod(Sg_, gBb_);
    return drift_solve_averages(ctx_, p.lambda, Sb, SBa, SBb, A1_avg, A2_avg,
                                Et1_avg, Et2_avg);
  }

  static DriftSolution drift_solve_averages(const PrecisionContext& ctx,
                                            const BigReal& lambda, const BigReal& S_avg,
                                            const BigReal& SBa_avg, const BigReal& SBb_avg,
                                            const BigReal& A1_avg, const BigReal& A2_avg,
                                            const BigReal& Et1_avg, const BigReal& Et2_avg) {
    BigReal a11 = S_avg, a12 = SBb_avg + A1_avg;
    BigReal a21 = lambda - BigReal(ctx, 1L), a22 = A2_avg;
    BigReal r1 = -SBa_avg - Et1_avg, r2 = -Et2_avg;
    BigReal det = a11 * a22 - a12 * a21;
    BigReal degen = pow_int(BigReal(ctx, 10L), -(ctx.decimal_digits() / 2));
    if (abs(det) < degen)
      throw TwistError("degenerate twist: |det| = " + abs(det).to_string(8));
    // inverse entries and its matrix norm (max column sum, Eq.-normm style)
    BigReal j11 = a22 / det, j12 = -a12 / det, j21 = -a21 / det, j22 = a11 / det;
    BigReal T0 = max(abs(j11) + abs(j21), abs(j12) + abs(j22));
    DriftSolution out{j11 * r1 + j12 * r2, j21 * r1 + j22 * r2, T0, det};
    return out;
  }

 private:
  void require_modes(const PeriodicFunction& u) const {
    if (u.n_modes() != n_) throw DomainError("workspace/mode count mismatch");
  }

  PeriodicFunction make_v(const PeriodicFunction& u) const {
    PeriodicFunction v(ctx_, n_);
    for (std::size_t i = 0; i < n_; ++i) {
      BigComplex d = shift_fwd_[i].conj();   // e^{-2 pi i k om}
      mpfr_neg(d.re.raw(), d.re.raw(), MPFR_RNDN);
      mpfr_neg(d.im.raw(), d.im.raw(), MPFR_RNDN);
      mpfr_add_ui(d.re.raw(), d.re.raw(), 1, MPFR_RNDN);
      v.data()[i] = u.data()[i] * d;          // u_k (1 - e^{-2 pi i k om})
    }
    v.coeff(0).set_zero();
    mpfr_set(v.coeff(0).re.raw(), omega_.raw(), MPFR_RNDN);
    return v;
  }

  PeriodicFunction shift_n(const PeriodicFunction& f) const {
    PeriodicFunction out(ctx_, n_);
    for (std::size_t i = 0; i < n_; ++i) out.data()[i] = f.data()[i] * shift_fwd_[i];
    return out;
  }

  /// Derivative grids and the N, N o T_om reciprocals for the current u.
  void frame_grids(const PeriodicFunction& u) {
    du_ = derivative(u);
    dv_ = derivative(v_);
    grid_from(du_, gdu_);
    grid_from(dv_, gdv_);
    shifted_ = shift_n(du_);
    grid_from(shifted_, gdus_);
    shifted_ = shift_n(dv_);
    grid_from(shifted_, gdvs_);
    BigReal degen = pow_int(BigReal(ctx_, 10L), -(ctx_.decimal_digits() / 2));
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_add_ui(t0_.raw(), gdu_[j].raw(), 1, MPFR_RNDN);
      mpfr_fmma(t1_.raw(), t0_.raw(), t0_.raw(), gdv_[j].raw(), gdv_[j].raw(), MPFR_RNDN);
      if (t1_ < degen)
        throw FrameError("frame degenerate: |DK|^2 below 10^(-digits/2) on the grid");
      mpfr_ui_div(Ng_[j].raw(), 1, t1_.raw(), MPFR_RNDN);
      mpfr_add_ui(t0_.raw(), gdus_[j].raw(), 1, MPFR_RNDN);
      mpfr_fmma(t1_.raw(), t0_.raw(), t0_.raw(), gdvs_[j].raw(), gdvs_[j].raw(), MPFR_RNDN);
      mpfr_ui_div(Ns_[j].raw(), 1, t1_.raw(), MPFR_RNDN);
    }
  }

  /// S = ((DK N) o T_om)^T Df(K) J^{-1} (DK N) and A = (Minv o T_om)(1,1)^T.
  void fill_S_A(const MapParams& p) {
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_add_ui(t2_.raw(), gdu_[j].raw(), 1, MPFR_RNDN);
      mpfr_mul(t3_.raw(), t2_.raw(), Ng_[j].raw(), MPFR_RNDN);       // P1 = (1+u')N
      mpfr_mul(t4_.raw(), gdv_[j].raw(), Ng_[j].raw(), MPFR_RNDN);   // P2 = v'N
      mpfr_mul(t2_.raw(), p.eps.raw(), cosb_[j].raw(), MPFR_RNDN);   // c
      // base = lambda P1 - c P2;  (Df J^{-1}P) = (base - P2, base)
      mpfr_mul(t0_.raw(), p.lambda.raw(), t3_.raw(), MPFR_RNDN);
      mpfr_fms(t1_.raw(), t2_.raw(), t4_.raw(), t0_.raw(), MPFR_RNDN);
      mpfr_neg(t1_.raw(), t1_.raw(), MPFR_RNDN);                     // base
      mpfr_sub(t0_.raw(), t1_.raw(), t4_.raw(), MPFR_RNDN);          // base - P2
      // S = Ns[(1+u's)(base-P2) + v's base]
      mpfr_add_ui(t2_.raw(), gdus_[j].raw(), 1, MPFR_RNDN);
      mpfr_fmma(t3_.raw(), t2_.raw(), t0_.raw(), gdvs_[j].raw(), t1_.raw(), MPFR_RNDN);
      mpfr_mul(Sg_[j].raw(), Ns_[j].raw(), t3_.raw(), MPFR_RNDN);
      mpfr_add(t3_.raw(), t2_.raw(), gdvs_[j].raw(), MPFR_RNDN);
      mpfr_mul(A1_[j].raw(), Ns_[j].raw(), t3_.raw(), MPFR_RNDN);
      mpfr_sub(A2_[j].raw(), t2_.raw(), gdvs_[j].raw(), MPFR_RNDN);
    }
  }

  /// coeffs (own mode count) -> real values on the m_ grid
  void grid_from(const PeriodicFunction& f, std::vector<BigReal>& out) {
    for (auto& z : cbuf_) z.set_zero();
    const long m = static_cast<long>(m_);
    for (std::size_t i = 0; i < f.n_modes(); ++i) {
      long k = f.k_at(i);
      std::size_t slot = static_cast<std::size_t>(k >= 0 ? k : k + m);
      mpfr_set(cbuf_[slot].re.raw(), f.data()[i].re.raw(), MPFR_RNDN);
      mpfr_set(cbuf_[slot].im.raw(), f.data()[i].im.raw(), MPFR_RNDN);
    }
    detail::fft_in_place(cbuf_, ctx_, +1);
    for (std::size_t j = 0; j < m_; ++j) mpfr_set(out[j].raw(), cbuf_[j].re.raw(), MPFR_RNDN);
  }

  void pf_from_grid(const std::vector<BigReal>& gvals, PeriodicFunction& dst) {
    const unsigned long lg = static_cast<unsigned long>(__builtin_ctzll(m_));
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_set(cbuf_[j].re.raw(), gvals[j].raw(), MPFR_RNDN);
      mpfr_set_zero(cbuf_[j].im.raw(), 1);
    }
    detail::fft_in_place(cbuf_, ctx_, -1);
    for (std::size_t j = 0; j < m_; ++j) {
      mpfr_div_2ui(dst.data()[j].re.raw(), cbuf_[j].re.raw(), lg, MPFR_RNDN);
      mpfr_div_2ui(dst.data()[j].im.raw(), cbuf_[j].im.raw(), lg, MPFR_RNDN);
    }
  }

  PeriodicFunction pf_from_grid_tmp(const std::vector<BigReal>& gvals) {
    PeriodicFunction out(ctx_, m_);
    pf_from_grid(gvals, out);
    return out;
  }

  BigReal grid_mean(const std::vector<BigReal>& gvals) {
    BigReal acc(ctx_);
    for (std::size_t j = 0; j < m_; ++j) mpfr_add(acc.raw(), acc.raw(), gvals[j].raw(), MPFR_RNDN);
    mpfr_div_2ui(acc.raw(), acc.raw(), static_cast<unsigned long>(__builtin_ctzll(m_)), MPFR_RNDN);
    return acc;
  }

  BigReal grid_mean_prod(const std::vector<BigReal>& a, const std::vector<BigReal>& b) {
    BigReal acc(ctx_);
    for (std::size_t j = 0; j < m_; ++j)
      mpfr_fma(acc.raw(), a[j].raw(), b[j].raw(), acc.raw(), MPFR_RNDN);
    mpfr_div_2ui(acc.raw(), acc.raw(), static_cast<unsigned long>(__builtin_ctzll(m_)), MPFR_RNDN);
    return acc;
  }

  PrecisionContext ctx_;
  std::size_t n_, m_;
  BigReal omega_, two_pi_;
  std::vector<BigComplex> shift_fwd_;
  PeriodicFunction v_, du_, dv_, Ea_hat_, Ei_hat_, shifted_;
  std::vector<BigComplex> cbuf_;
  std::vector<BigReal> theta2pi_;
  std::vector<BigReal> gu_, gv_, gus_, gvs_, gdu_, gdv_, gdus_, gdvs_;
  std::vector<BigReal> sinb_, cosb_, Ea_, Ei_, Ng_, Ns_, Sg_;
  std::vector<BigReal> Et1_, Et2_, A1_, A2_, gBa_, gBb_, gW2_, gW1_;
  BigReal t0_, t1_, t2_, t3_, t4_;
  bool have_error_ = false;
};

/// Spec-level frame construction from an embedding.
inline FrameData build_frame(const TorusEmbedding& K, const MapParams& p) {
  NewtonWorkspace ws(K.u.ctx(), K.u.n_modes(), K.omega);
  return ws.build_frame(K.u, p);
}

/// Drift/average 2x2 solve from a materialized frame and error transform.
inline DriftSolution solve_drift_system(const FrameData& frame,
                                        const PeriodicFunction& Et1,
                                        const PeriodicFunction& Et2,
                                        const BigReal& lambda) {
  const PrecisionContext& ctx = frame.S.ctx();
  auto avg_prod = [&](const PeriodicFunction& a, const PeriodicFunction& b) {
    PeriodicFunction bp = b.n_modes() < a.n_modes() ? pad_to(b, a.n_modes()) : b;
    PeriodicFunction ap = a.n_modes() < bp.n_modes() ? pad_to(a, bp.n_modes()) : a;
    return average(multiply(ap, bp));
  };
  return NewtonWorkspace::drift_solve_averages(
      ctx, lambda, average(frame.S), avg_prod(frame.S, frame.B_a0),
      avg_prod(frame.S, frame.B_b0), average(frame.A_tilde[0]),
      average(frame.A_tilde[1]), average(Et1), average(Et2));
}

struct NewtonStepResult {
  TorusEmbedding K;
  BigReal mu;
  NewtonReport report;
};

/// One quasi-Newton step (Algorithm steps 1-13).  The residuals in the
/// report are measured at radius rho (0 = plain coefficient l1 norm).
inline NewtonStepResult newton_step(const TorusEmbedding& K, const MapParams& p,
                                    const BigReal& rho) {
  NewtonWorkspace ws(K.u.ctx(), K.u.n_modes(), K.omega);
  SolverOptions opt(K.u.ctx());
  ws.eval_error(K.u, p);
  BigReal before = ws.residual(rho);
  auto corr = ws.correct(K.u, p, opt.w_cap);
  MapParams p1(p.eps, p.lambda, corr.mu);
  ws.eval_error(corr.u, p1);
  BigReal after = ws.residual(rho);
  return {embedding_from_u(corr.u, K.omega), corr.mu,
          {before, after, corr.sigma, corr.w1_norm, corr.w2_norm}};
}

inline NewtonStepResult newton_step(const TorusEmbedding& K, const MapParams& p) {
  return newton_step(K, p, BigReal(K.u.ctx()));
}

/// Iterate newton steps until the residual (at opt.residual_rho) drops to
/// opt.tol.  Failure is data: the result carries converged = false and the
/// reason, with the residual history.
inline SolveResult newton_solve(NewtonWorkspace& ws, const PeriodicFunction& u0,
                                const BigReal& mu0, const MapParams& p0,
                                const SolverOptions& opt) {
  SolveResult res{u0, mu0};
  PeriodicFunction u = u0;
  BigReal mu = mu0;
  int stall = 0;
  MapParams p(p0.eps, p0.lambda, mu);
  ws.eval_error(u, p);
  BigReal r = ws.residual(opt.residual_rho);
  res.residual_history.push_back(r);
  for (int it = 0;; ++it) {
    if (r <= opt.tol) {
      res.u = u;
      res.mu = mu;
      res.converged = true;
      res.iterations = it;
      return res;
    }
    if (it >= opt.max_iter) {
      res.failure = "no convergence within max_iter";
      res.iterations = it;
      return res;
    }
    try {
      auto corr = ws.correct(u, p, opt.w_cap);
      u = std::move(corr.u);
      mu = corr.mu;
    } catch (const Error& e) {
      res.failure = e.what();
      res.iterations = it;
      return res;
    }
    p = MapParams(p0.eps, p0.lambda, mu);
    ws.eval_error(u, p);
    BigReal rn = ws.residual(opt.residual_rho);
    res.residual_history.push_back(rn);
    // stalling: less than 2x decay twice in a row while above tolerance
    BigReal half = r;
    mpfr_div_2ui(half.raw(), half.raw(), 1, MPFR_RNDN);
    if (rn > half && rn > opt.tol) {
      if (++stall >= 2) {
        res.u = u;
        res.mu = mu;
        res.failure = "residual stalled at " + rn.to_string(8);
        res.iterations = it + 1;
        return res;
      }
    } else {
      stall = 0;
    }
    r = rn;
  }
}

inline SolveResult newton_solve(const TorusEmbedding& K, const MapParams& p,
                                const BigReal& tol, int max_iter) {
  NewtonWorkspace ws(K.u.ctx(), K.u.n_modes(), K.omega);
  SolverOptions opt(K.u.ctx());
  opt.tol = tol;
  opt.max_iter = max_iter;
  return newton_solve(ws, K.u, p.mu, p, opt);
}

struct ContinuationPoint {
  BigReal eps;
  BigReal mu;
  BigReal residual;
  int iterations;
};

struct ContinuationOptions {
  BigReal eps_target;
  BigReal step_init;
  BigReal step_max;
  BigReal step_floor;
  SolverOptions solver;

  explicit ContinuationOptions(const PrecisionContext& ctx)
      : eps_target(ctx, 1L),
        step_init(ctx, "0.1"),
        step_max(ctx, "0.1"),
        step_floor(ctx, "1e-8"),
        solver(ctx) {}
};

struct ContinuationState {
  PeriodicFunction u;
  BigReal mu;
  BigReal eps_current;
  BigReal step;
  std::vector<ContinuationPoint> history;  // strictly increasing in eps
  bool reached_target = false;
  std::string stop_reason;
};

/// Zeroth-order continuation in eps: reuse the previous (u, mu), halve the
/// step on failure, double it after two consecutive successes, stop at the
/// target or when the step underflows the floor.
inline ContinuationState continuation(NewtonWorkspace& ws, const MapParams& base,
                                      const ContinuationOptions& opt) {
  const PrecisionContext& ctx = ws.ctx();
  BigReal one(ctx, 1L);
  ContinuationState st{PeriodicFunction(ctx, ws.n_modes()),
                       (one - base.lambda) * ws.omega(), BigReal(ctx), opt.step_init};
  st.history.push_back({BigReal(ctx), st.mu, BigReal(ctx), 0});
  if (opt.eps_target.sign() == 0) {
    st.reached_target = true;
    st.stop_reason = "reached target";
    return st;
  }
  int successes = 0;
  while (true) {
    if (st.eps_current >= opt.eps_target) {
      st.reached_target = true;
      st.stop_reason = "reached target";
      return st;
    }
    if (st.step < opt.step_floor) {
      st.stop_reason = "step underflow at eps = " + st.eps_current.to_string(12);
      return st;
    }
    BigReal eps_try = min(st.eps_current + st.step, opt.eps_target);
    MapParams p(eps_try, base.lambda, st.mu);
    SolveResult r = newton_solve(ws, st.u, st.mu, p, opt.solver);
    if (r.converged) {
      st.u = r.u;
      st.mu = r.mu;
      st.eps_current = eps_try;
      st.history.push_back({eps_try, r.mu, r.residual_history.back(), r.iterations});
      if (++successes >= 2) {
        st.step = min(st.step + st.step, opt.step_max);
        successes = 0;
      }
    } else {
      mpfr_div_2ui(st.step.raw(), st.step.raw(), 1, MPFR_RNDN);
      successes = 0;
    }
  }
}

}  // namespace kam
