#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kam/kam_solver.hpp"

namespace kam {

/// Russmann small-divisor constant of the cohomology estimate:
///   C0 = (2 pi)^-tau * pi/(2^tau (1+lambda)) * sqrt(Gamma(2 tau + 1)/3).
inline BigReal russmann_constant(const BigReal& tau, const BigReal& lambda) {
  BigReal two(BigReal::nullptr_tag{}, tau.bits());
  mpfr_set_ui(two.raw(), 2, MPFR_RNDN);
  BigReal one(BigReal::nullptr_tag{}, tau.bits());
  mpfr_set_ui(one.raw(), 1, MPFR_RNDN);
  BigReal p(BigReal::nullptr_tag{}, tau.bits());
  mpfr_const_pi(p.raw(), MPFR_RNDN);
  BigReal two_pi = two * p;
  BigReal three(BigReal::nullptr_tag{}, tau.bits());
  mpfr_set_ui(three.raw(), 3, MPFR_RNDN);
  return pow(two_pi, -tau) * p / (pow(two, tau) * (one + lambda)) *
         sqrt(gamma(two * tau + one) / three);
}

/// Cauchy constant for derivatives of order l >= 1 on a shrunk strip,
/// C_{c,l} = l!/(2 pi).  Exposed for completeness; the certifier measures
/// second derivatives spectrally instead.
inline BigReal cauchy_constant(const PrecisionContext& ctx, long l) {
  BigReal f(ctx, 1L);
  for (long i = 2; i <= l; ++i) f *= BigReal(ctx, i);
  BigReal two_pi = pi(ctx);
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  return f / two_pi;
}

/// Measured analytic norms of the converged solution, all at radius rho0.
struct NormReport {
  PrecisionContext ctx;
  BigReal norm_M;
  BigReal norm_Minv;
  BigReal norm_Df;
  BigReal norm_D2f;
  BigReal norm_S;
  BigReal norm_N;
  BigReal norm_Ninv;
  BigReal norm_DK;
  BigReal norm_D2K;
  BigReal norm_DKinv;
  BigReal twist_T0;
  BigReal norm_E0;
  BigReal norm_D2E0;
  bool under_resolved = false;

  explicit NormReport(const PrecisionContext& c)
      : ctx(c), norm_M(c), norm_Minv(c), norm_Df(c), norm_D2f(c), norm_S(c),
        norm_N(c), norm_Ninv(c), norm_DK(c), norm_D2K(c), norm_DKinv(c),
        twist_T0(c), norm_E0(c), norm_D2E0(c) {}
};

/// All constants of the KAM theorem, evaluated in dependency order.  When a
/// guard fails (the C_N denominator or T0 * C_tau < 1) the downstream
/// constants are +inf and ct_finite is cleared: that is a failed
/// precondition, not a number.
struct ConstantLedger {
  PrecisionContext ctx;
  BigReal C0, Cc;
  BigReal C_sigma0, C_W20, C_W20_bar, C_W10, C_W0;
  BigReal C_eta0, Q_E0, C_R0, C_E0, C_d0;
  BigReal kappa0, kappaK, kappaMu;
  BigReal D_K, D_2K;
  BigReal C_N, C_M, C_Minv;
  BigReal C_S, C_SB, C_tau, C_T;
  BigReal C_sigma, C_W2_bar, C_W2, C_W1, C_W, C_Q, C_R;
  bool ct_finite = true;

  explicit ConstantLedger(const PrecisionContext& c)
      : ctx(c), C0(c), Cc(c, 1L), C_sigma0(c), C_W20(c), C_W20_bar(c),
        C_W10(c), C_W0(c), C_eta0(c), Q_E0(c), C_R0(c), C_E0(c), C_d0(c),
        kappa0(c), kappaK(c), kappaMu(c), D_K(c), D_2K(c), C_N(c), C_M(c),
        C_Minv(c), C_S(c), C_SB(c), C_tau(c), C_T(c), C_sigma(c), C_W2_bar(c),
        C_W2(c), C_W1(c), C_W(c), C_Q(c), C_R(c) {}
};

struct ConditionEntry {
  std::string name;
  BigReal lhs;
  BigReal rhs;
  bool strict;  // '<' when true, '<=' when false
  bool pass;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;  // C1 C2 C3 C4 condbT Cnew1 Cnew2 C8 C9 C10
  bool overall = false;
  BigReal bound_dK;   // ||K_e - K_0||_{rho0-delta0} <= 4 C_d0 nu^-1 delta0^-tau eps0
  BigReal bound_dmu;  // |mu_e - mu_0| <= 4 C_sigma0 eps0

  explicit ConditionReport(const PrecisionContext& ctx)
      : bound_dK(ctx), bound_dmu(ctx) {}

  const ConditionEntry& operator[](const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw DomainError("no such condition: " + name);
  }
};

namespace detail {
inline BigReal plus_inf(const PrecisionContext& ctx) {
  BigReal r(ctx);
  mpfr_set_inf(r.raw(), 1);
  return r;
}
}  // namespace detail

/// Evaluate the full constant list.  Pure function of the measured norms,
/// the map derivative sups, the Diophantine pair (nu, tau) and the radii.
inline ConstantLedger compute_constants(const NormReport& rep, const DerivativeBounds& b,
                                        const BigReal& nu, const BigReal& tau,
                                        const BigReal& rho0, const BigReal& delta0,
                                        const BigReal& lambda, const BigReal& eps0) {
  (void)rho0;
  const PrecisionContext& ctx = rep.ctx;
  ConstantLedger L(ctx);
  const BigReal one(ctx, 1L), two(ctx, 2L), four(ctx, 4L), Je(ctx, 1L);
  const BigReal labs = abs(abs(lambda) - one);
  if (labs.sign() == 0)
    throw DomainError("certification requires |lambda| != 1");
  const BigReal l1 = abs(lambda - one);
  const BigReal& T0 = rep.twist_T0;
  const BigReal& S = rep.norm_S;
  const BigReal& M = rep.norm_M;
  const BigReal& Mi = rep.norm_Minv;
  const BigReal& Nn = rep.norm_N;
  const BigReal& DK = rep.norm_DK;
  const BigReal& D2K = rep.norm_D2K;
  const BigReal& Qmu = b.Q_mu0;
  const BigReal dtau = pow(delta0, tau);

  L.C0 = russmann_constant(tau, lambda);
  L.C_sigma0 = T0 * (l1 * (S / labs + one) + S) * Mi;
  L.C_W20 = (one / labs) * (one + L.C_sigma0 * Qmu) * Mi;
  L.C_W20_bar = two * T0 * (S / labs + one) * Qmu * Mi * Mi;
  L.C_W10 = L.C0 * (S * (L.C_W20 + L.C_W20_bar) + Mi + Qmu * Mi * L.C_sigma0);
  L.C_W0 = L.C_W10 + (L.C_W20 + L.C_W20_bar) * nu * dtau;
  L.C_eta0 = L.C_W0 * M + L.C_sigma0 * nu * dtau;
  L.Q_E0 = max(rep.norm_D2E0, max(b.sup_DmuDf, b.sup_Dmu2f));
  mpfr_div_2ui(L.Q_E0.raw(), L.Q_E0.raw(), 1, MPFR_RNDN);
  L.C_R0 = L.Q_E0 * (M * M * L.C_W0 * L.C_W0 +
                     L.C_sigma0 * L.C_sigma0 * nu * nu * dtau * dtau);
  L.C_E0 = L.Cc * L.C_W0 * nu * pow(delta0, tau - one) + L.C_R0;
  L.C_d0 = L.C_W0 * M;
  L.kappa0 = pow(two, two * tau + one) * L.C_E0 / (nu * nu * dtau * dtau);
  L.kappaK = four * L.C_d0 / (nu * dtau);
  L.kappaMu = four * L.C_sigma0;
  L.D_K = four * L.C_d0 * L.Cc / (nu * dtau * delta0) * eps0;
  L.D_2K = four * L.C_d0 * L.Cc * L.Cc / (nu * dtau * delta0 * delta0) * eps0;

  BigReal denomN = one - Nn * L.D_K * (two * DK + L.D_K);
  if (denomN.sign() <= 0) {
    // the condbT guard fails: every D_K-perturbed constant is unusable
    L.ct_finite = false;
    L.C_N = L.C_M = L.C_Minv = L.C_S = L.C_SB = L.C_tau = L.C_T = L.C_sigma =
        L.C_W2_bar = L.C_W2 = L.C_W1 = L.C_W = L.C_Q = L.C_R = detail::plus_inf(ctx);
    return L;
  }
  L.C_N = Nn * Nn * (two * DK + L.D_K) / denomN;
  L.C_M = one + Je * (L.C_N * (DK + L.D_K) + Nn);
  L.C_Minv = L.C_N * (DK + L.D_K) + Nn + Je;
  {
    const BigReal& Q0 = b.Q0;
    BigReal n_cd = Nn + L.C_N * L.D_K;
    BigReal br = L.D_K * n_cd + DK * Nn + DK * L.C_N * L.D_K;
    L.C_S = two * Je * Q0 *
            (n_cd * br + L.C_N * DK * br + Nn * DK * n_cd + L.C_N * Nn * DK * DK);
    L.C_SB = (one / labs) * Qmu * Mi * L.C_S +
             two * Je * Q0 * Nn * Nn * DK * DK * (one / labs) * L.C_Minv * Qmu +
             two * L.C_S * (one / labs) * L.C_Minv * Qmu * L.D_K;
    L.C_tau = max(L.C_S, L.C_SB + two * L.C_Minv * Qmu) * L.D_K;
  }
  if (one - T0 * L.C_tau <= BigReal(ctx)) {
    L.ct_finite = false;
    L.C_T = L.C_sigma = L.C_W2_bar = L.C_W2 = L.C_W1 = L.C_W = L.C_Q = L.C_R =
        detail::plus_inf(ctx);
    return L;
  }
  L.C_T = T0 * T0 / (one - T0 * L.C_tau) * max(L.C_S, L.C_SB + two * L.C_Minv * Qmu);
  BigReal s_cd = S + L.C_S * L.D_K;
  L.C_sigma = L.C_T * (l1 * (s_cd / labs + one) + s_cd) * (Mi + L.C_Minv * L.D_K) +
              T0 * (l1 * (s_cd / labs + one) * L.C_Minv +
                    l1 * (one / labs) * Mi * L.C_S +
                    L.C_S * (Mi + L.C_Minv * L.D_K) + L.C_Minv * S);
  L.C_W2_bar = four * L.C_T * (s_cd / labs + one) * Qmu * (Mi + L.D_K) * (Mi + L.D_K) +
               four * T0 * Qmu * (one / labs) * L.C_S * (Mi + L.D_K) * (Mi + L.D_K) +
               four * T0 * Qmu * (s_cd / labs + one) * (L.D_K + two * Mi);
  L.C_W2 = (one / labs) * (one + two * Qmu * Mi * L.C_sigma + two * Qmu * L.C_sigma0 +
                           two * Qmu * L.C_sigma * L.D_K);
  L.C_W1 = L.C0 * (S * L.C_W2 + L.C_S * L.C_W20 + L.C_S * L.C_W2 * L.D_K +
                   S * L.C_W2_bar + L.C_S * L.C_W20_bar + L.C_S * L.C_W2_bar * L.D_K +
                   one + two * Qmu * Mi * L.C_sigma + two * Qmu * L.C_sigma0 +
                   two * Qmu * L.C_sigma * L.D_K);
  L.C_W = L.C_W1 + L.C_W2 * nu * dtau + L.C_W2_bar * nu * dtau;
  {
    // C_Q: only the first max-group survives for this map family; every
    // term carrying a mu-derivative sup vanishes identically
    const BigReal& Q0 = b.Q0;
    const BigReal& D2f = b.sup_D2f;
    const BigReal& D3f = b.sup_D3f;
    BigReal big1 = one + D3f * DK * DK * delta0 * delta0 / (L.Cc * L.Cc) +
                   D2f * DK * delta0 / L.Cc +
                   D3f * DK * four * L.C_d0 * delta0 / (L.Cc * nu * dtau) * eps0 +
                   D2f * D2K * D2K * delta0 * delta0 / (L.Cc * L.Cc) +
                   D2f * (DK + L.D_K) * delta0 / L.Cc +
                   D3f * (DK + L.D_K) * four * L.C_d0 * delta0 / (L.Cc * nu * dtau) * eps0 +
                   Q0 + D2f * L.kappaK * eps0;
    mpfr_div_2ui(big1.raw(), big1.raw(), 1, MPFR_RNDN);
    L.C_Q = big1;
  }
  L.C_R = L.Q_E0 * ((two * L.C_M * M + L.C_M * L.C_M * L.D_K) *
                        (L.C_W0 + L.C_W * L.D_K) * (L.C_W0 + L.C_W * L.D_K) +
                    M * M * (L.C_W * L.C_W * L.D_K + two * L.C_W0 * L.C_W) +
                    (L.C_sigma * L.C_sigma * L.D_K + two * L.C_sigma0 * L.C_sigma) *
                        nu * nu * dtau * dtau) +
          L.C_Q * ((M + L.C_M * L.D_K) * (M + L.C_M * L.D_K) *
                       (L.C_W0 + L.C_W * L.D_K) * (L.C_W0 + L.C_W * L.D_K) +
                   (L.C_sigma0 + L.C_sigma * L.D_K) * (L.C_sigma0 + L.C_sigma * L.D_K) *
                       nu * nu * dtau * dtau) *
              L.Cc / delta0;
  return L;
}

/// The ten smallness conditions, exactly as stated (strict and non-strict
/// comparisons per the theorem), plus the closeness bounds on (K_e, mu_e).
inline ConditionReport check_conditions(const ConstantLedger& L, const BigReal& eps0,
                                        const BigReal& zeta, const BigReal& nu,
                                        const BigReal& tau, const BigReal& rho0,
                                        const BigReal& delta0, const NormReport& rep,
                                        const DerivativeBounds& b) {
  (void)rho0;
  const PrecisionContext& ctx = L.ctx;
  ConditionReport out(ctx);
  const BigReal one(ctx, 1L), two(ctx, 2L), three(ctx, 3L), four(ctx, 4L);
  const BigReal dtau = pow(delta0, tau);
  auto push = [&](const std::string& name, const BigReal& lhs, const BigReal& rhs,
                  bool strict) {
    bool pass = strict ? lhs < rhs : lhs <= rhs;
    out.entries.push_back({name, lhs, rhs, strict, pass});
  };
  push("C1", L.C_eta0 / (nu * dtau) * eps0, zeta, true);
  push("C2", pow(two, three * tau + four) * L.C_E0 / (nu * nu * dtau * dtau) * eps0,
       one, false);
  push("C3", four * L.C_d0 / (nu * dtau) * eps0, zeta, true);
  push("C4", four * L.C_sigma0 * eps0, zeta, true);
  push("condbT", rep.norm_N * (two * rep.norm_DK + L.D_K) * L.D_K, one, true);
  push("Cnew1", four * b.Q_zmu0 * L.C_sigma0 * eps0, b.Q0, true);
  push("Cnew2", four * b.Q_mumu0 * L.C_sigma0 * eps0, b.Q_mu0, true);
  push("C8", L.C_sigma * L.D_K, L.C_sigma0, false);
  push("C9", L.D_K * (L.C_W0 + rep.norm_M * L.C_W + L.C_W * L.D_K), L.C_d0, false);
  push("C10", L.D_K * (L.C_W * L.Cc * nu * pow(delta0, tau - one) + L.C_R), L.C_E0,
       false);
  out.overall = true;
  for (const auto& e : out.entries) out.overall = out.overall && e.pass;
  out.bound_dK = four * L.C_d0 / (nu * dtau) * eps0;
  out.bound_dmu = four * L.C_sigma0 * eps0;
  return out;
}

struct CertifyOptions {
  BigReal rho0;
  BigReal delta0;
  BigReal zeta;
  BigReal nu;
  BigReal tau;
  double tail_threshold = 1e-20;

  /// Defaults per the verified instance: delta0 = rho0/4, zeta = rho0,
  /// golden-mean Diophantine pair.
  CertifyOptions(const PrecisionContext& ctx, const BigReal& rho0_in)
      : rho0(rho0_in), delta0(rho0_in), zeta(rho0_in), nu(golden_nu(ctx)),
        tau(golden_tau(ctx)) {
    mpfr_div_2ui(delta0.raw(), delta0.raw(), 2, MPFR_RNDN);
  }
};

/// Reference breakdown threshold for lambda = 0.9 golden-mean circle.
inline BigReal eps_critical(const PrecisionContext& ctx) {
  return BigReal(ctx, "0.97198");
}

struct CertifyResult {
  NormReport report;
  DerivativeBounds bounds;
  ConstantLedger ledger;
  ConditionReport conditions;
  BigReal eps0;
  BigReal agreement_percent;  // 100 eps / eps_c
};

struct SolutionMeasurements {
  NormReport report;
  DerivativeBounds bounds;
};

/// Measure every norm of the report (and the map-derivative sups) from the
/// converged solution in one fused grid pass.
inline SolutionMeasurements measure_solution(NewtonWorkspace& ws,
                                             const PeriodicFunction& u,
                                             const MapParams& p,
                                             const CertifyOptions& opt) {
  const PrecisionContext& ctx = ws.ctx();
  auto pass = ws.certify_pass(u, p);
  NormReport rep(ctx);
  const BigReal& rho = opt.rho0;
  bool tail = false;
  auto nrm = [&](const PeriodicFunction& f) {
    auto est = analytic_norm_ex(f, rho, opt.tail_threshold);
    tail = tail || est.under_resolved;
    return est.value;
  };
  BigReal m11 = nrm(pass.frame.M[0]), m12 = nrm(pass.frame.M[1]);
  BigReal m21 = nrm(pass.frame.M[2]), m22 = nrm(pass.frame.M[3]);
  rep.norm_M = max(m11, m12) + max(m21, m22);
  BigReal i11 = nrm(pass.frame.Minv[0]), i12 = nrm(pass.frame.Minv[1]);
  BigReal i21 = nrm(pass.frame.Minv[2]), i22 = nrm(pass.frame.Minv[3]);
  rep.norm_Minv = max(i11, i12) + max(i21, i22);
  rep.norm_DK = m11 + m21;
  rep.norm_D2K = nrm(derivative(pass.frame.M[0])) + nrm(derivative(pass.frame.M[2]));
  rep.norm_S = nrm(pass.frame.S);
  rep.norm_N = nrm(pass.frame.N);
  rep.norm_Ninv = nrm(pass.Ninv);
  rep.norm_DKinv = rep.norm_N * rep.norm_DK;  // pseudo-inverse product bound
  // Df o K = [[1 + eps cosK, lambda], [eps cosK, lambda]] row-wise
  PeriodicFunction c_pf = scale(pass.cosK, p.eps);
  PeriodicFunction one_c = c_pf;
  mpfr_add_ui(one_c.coeff(0).re.raw(), one_c.coeff(0).re.raw(), 1, MPFR_RNDN);
  BigReal nc = nrm(c_pf), n1c = nrm(one_c), al = abs(p.lambda);
  rep.norm_Df = max(n1c, al) + max(nc, al);
  BigReal two_pi = pi(ctx);
  mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
  rep.norm_D2f = BigReal(ctx, 2L) * two_pi * p.eps * nrm(pass.sinK);
  rep.twist_T0 = pass.drift.twist_T0;
  rep.norm_E0 = nrm(pass.E_angle) + nrm(pass.E_action);
  rep.norm_D2E0 =
      nrm(derivative(derivative(pass.E_angle))) + nrm(derivative(derivative(pass.E_action)));
  rep.under_resolved = tail;
  BigReal zero(ctx), one(ctx, 1L);
  DerivativeBounds bounds{rep.norm_Df, one, zero, zero, rep.norm_D2f,
                          BigReal(ctx, 2L) * two_pi * two_pi * nc,
                          zero, zero, zero, zero, zero};
  return {std::move(rep), std::move(bounds)};
}

inline NormReport compute_norm_report(NewtonWorkspace& ws, const PeriodicFunction& u,
                                      const MapParams& p, const CertifyOptions& opt) {
  return measure_solution(ws, u, p, opt).report;
}

/// Full a-posteriori certification of a solution (u, mu) at parameters p.
inline CertifyResult certify(NewtonWorkspace& ws, const PeriodicFunction& u,
                             const MapParams& p, const CertifyOptions& opt) {
  auto meas = measure_solution(ws, u, p, opt);
  const NormReport& rep = meas.report;
  ConstantLedger L = compute_constants(rep, meas.bounds, opt.nu, opt.tau, opt.rho0,
                                       opt.delta0, p.lambda, rep.norm_E0);
  ConditionReport cond = check_conditions(L, rep.norm_E0, opt.zeta, opt.nu, opt.tau,
                                          opt.rho0, opt.delta0, rep, meas.bounds);
  BigReal hundred(ws.ctx(), 100L);
  return CertifyResult{rep, meas.bounds, L, cond, rep.norm_E0,
                       hundred * p.eps / eps_critical(ws.ctx())};
}

struct EpsKamConfig {
  PrecisionContext ctx;
  std::size_t n_modes;
  BigReal lambda;
  BigReal omega;
  CertifyOptions cert;
  ContinuationOptions cont;
  BigReal bracket;  // final bisection bracket width

  EpsKamConfig(const PrecisionContext& c, std::size_t n, const BigReal& lam,
               const BigReal& rho0)
      : ctx(c), n_modes(n), lambda(lam), omega(golden_mean(c)), cert(c, rho0),
        cont(c), bracket(c, "1e-8") {}
};

struct EpsKamPoint {
  BigReal eps;
  bool newton_converged;
  bool certified;
};

struct EpsKamResult {
  bool found = false;
  BigReal eps_kam;
  BigReal mu;
  PeriodicFunction u;
  CertifyResult cert;
  std::vector<ContinuationPoint> branch;
  std::vector<EpsKamPoint> probes;
};

/// Drive the continuation toward breakdown, certify every converged point,
/// and refine the pass/fail boundary by bisection to the configured bracket.
inline EpsKamResult find_eps_kam(const EpsKamConfig& cfg) {
  const PrecisionContext& ctx = cfg.ctx;
  if (!(cfg.lambda > BigReal(ctx, 0L)) || !(cfg.lambda < BigReal(ctx, 1L)))
    throw DomainError("find_eps_kam requires lambda in (0,1)");
  NewtonWorkspace ws(ctx, cfg.n_modes, cfg.omega);
  BigReal one(ctx, 1L);
  PeriodicFunction u(ctx, cfg.n_modes);
  BigReal mu = (one - cfg.lambda) * cfg.omega;
  BigReal eps(ctx);

  // state of the best certified point
  PeriodicFunction u_best = u;
  BigReal mu_best = mu, eps_best(ctx);
  bool have_best = false;
  std::optional<CertifyResult> cert_best;
  std::optional<BigReal> first_fail;

  EpsKamResult out{false, BigReal(ctx), mu, u,
                   certify(ws, u, MapParams(eps, cfg.lambda, mu), cfg.cert),
                   {}, {}};
  if (out.cert.conditions.overall) {
    have_best = true;
    cert_best = out.cert;
  }
  out.branch.push_back({eps, mu, BigReal(ctx), 0});

  auto probe = [&](const BigReal& eps_try) -> bool {
    MapParams p(eps_try, cfg.lambda, mu_best);
    SolveResult r = newton_solve(ws, u_best, mu_best, p, cfg.cont.solver);
    bool ok = false;
    std::optional<CertifyResult> cert;
    if (r.converged) {
      cert = certify(ws, r.u, MapParams(eps_try, cfg.lambda, r.mu), cfg.cert);
      ok = cert->conditions.overall;
    }
    out.probes.push_back({eps_try, r.converged, ok});
    if (ok) {
      u_best = r.u;
      mu_best = r.mu;
      eps_best = eps_try;
      have_best = true;
      cert_best = std::move(cert);
      out.branch.push_back({eps_try, r.mu, r.residual_history.back(), r.iterations});
    } else {
      if (!first_fail || eps_try < *first_fail) first_fail = eps_try;
    }
    return ok;
  };

  // continuation phase
  BigReal step = cfg.cont.step_init;
  int successes = 0;
  while (step >= cfg.cont.step_floor && eps_best < cfg.cont.eps_target) {
    BigReal eps_try = min(eps_best + step, cfg.cont.eps_target);
    if (probe(eps_try)) {
      if (++successes >= 2) {
        step = min(step + step, cfg.cont.step_max);
        successes = 0;
      }
    } else {
      mpfr_div_2ui(step.raw(), step.raw(), 1, MPFR_RNDN);
      successes = 0;
    }
  }
  // bisection phase between the last pass and the first fail
  if (first_fail) {
    int guard = 0;
    while (*first_fail - eps_best > cfg.bracket && guard++ < 80) {
      BigReal mid = eps_best + (*first_fail - eps_best) / BigReal(ctx, 2L);
      if (!(mid > eps_best) || !(mid < *first_fail)) break;  // bracket exhausted
      probe(mid);
    }
  }
  if (first_fail && eps_best.sign() == 0)
    throw TwistError("no certified eps > 0: even the smallest continuation step failed");
  out.found = have_best;
  out.eps_kam = eps_best;
  out.mu = mu_best;
  out.u = u_best;
  if (cert_best) out.cert = *cert_best;
  return out;
}

}  // namespace kam
