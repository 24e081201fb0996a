#include <catch2/catch_amalgamated.hpp>

#include "kam/certifier.hpp"
#include "paper_values.hpp"

using namespace kam;

namespace {

BigReal relerr(const BigReal& got, const BigReal& want) {
  return abs(got - want) / abs(want);
}

}  // namespace

TEST_CASE("Russmann constant") {
  auto ctx = make_context(60);
  BigReal one(ctx, 1L);
  SECTION("independently evaluated reference values") {
    // frozen from a 80-digit evaluation of the closed formula
    BigReal want09(ctx, "0.107433760648385004306898424329205762805524012");
    BigReal want10(ctx, "0.102062072615965754091553503112745474665247812");
    BigReal want2(ctx, "0.0296156682946416470248420786515375191665978339");
    CHECK(relerr(russmann_constant(one, BigReal(ctx, "0.9")), want09) <
          BigReal(ctx, "1e-40"));
    CHECK(relerr(russmann_constant(one, one), want10) < BigReal(ctx, "1e-40"));
    CHECK(relerr(russmann_constant(BigReal(ctx, 2L), BigReal(ctx, "0.9")), want2) <
          BigReal(ctx, "1e-40"));
  }
  SECTION("monotone decreasing in lambda") {
    BigReal prev = russmann_constant(one, BigReal(ctx, "0.1"));
    for (const char* l : {"0.3", "0.5", "0.7", "0.9", "1.0"}) {
      BigReal cur = russmann_constant(one, BigReal(ctx, l));
      CHECK(cur < prev);
      prev = cur;
    }
  }
  SECTION("Cauchy derivative constants") {
    auto two_pi = pi(ctx);
    mpfr_mul_2ui(two_pi.raw(), two_pi.raw(), 1, MPFR_RNDN);
    CHECK(relerr(cauchy_constant(ctx, 2), BigReal(ctx, 2L) / two_pi) <
          BigReal(ctx, "1e-55"));
    CHECK(relerr(cauchy_constant(ctx, 4), BigReal(ctx, 24L) / two_pi) <
          BigReal(ctx, "1e-55"));
  }
}

TEST_CASE("constant ledger at the flagship norm report") {
  auto ctx = make_context(115);
  NormReport rep = flagship_norm_report(ctx);
  DerivativeBounds b = flagship_bounds(ctx);
  BigReal nu = golden_nu(ctx), tau = golden_tau(ctx);
  BigReal rho0(ctx, "3e-5");
  BigReal delta0 = rho0 / BigReal(ctx, 4L);
  BigReal lam(ctx, "0.9");
  BigReal eps0 = rep.norm_E0;
  ConstantLedger L = compute_constants(rep, b, nu, tau, rho0, delta0, lam, eps0);
  BigReal rt(ctx, "1e-24");
  SECTION("head of the chain against an independent evaluation") {
    CHECK(L.Cc == BigReal(ctx, 1L));
    CHECK(relerr(L.C_sigma0, BigReal(ctx, "131420.5206820129038849959401227095391697")) < rt);
    CHECK(relerr(L.C_W20, BigReal(ctx, "52477505.35111427459347387511397891652526")) < rt);
    CHECK(relerr(L.C_W20_bar, BigReal(ctx, "52489293.17546012816661638965643664992063")) < rt);
    CHECK(relerr(L.C_W10, BigReal(ctx, "2427901790.967707313680676936993895004288")) < rt);
    CHECK(relerr(L.C_W0, BigReal(ctx, "2427902091.670827415348470906592723393264")) < rt);
    CHECK(relerr(L.C_eta0, BigReal(ctx, "109078554416.1603153305606458409492460224")) < rt);
    CHECK(relerr(L.Q_E0, BigReal(ctx, "2.5788150246425903482197765003e-24")) < rt);
    CHECK(relerr(L.C_R0, BigReal(ctx, "0.03068307907419389976954426418217026128457")) < rt);
    CHECK(relerr(L.C_E0, BigReal(ctx, "927376077.6919761731660229285071709675203")) < rt);
    CHECK(relerr(L.C_d0, BigReal(ctx, "109078554415.7838290399507427087866057122")) < rt);
    CHECK(relerr(L.D_K, BigReal(ctx, "1.567013280352893022542072725873219131652e-13")) < rt);
    CHECK(relerr(L.C_N, BigReal(ctx, "2201695.735111721584923613414185956070698")) < rt);
    CHECK(relerr(L.C_S, BigReal(ctx, "14122864142612.73128792815959287724992")) < rt);
    CHECK(relerr(L.C_SB, BigReal(ctx, "502243738121902663.485740921124704713868")) < rt);
  }
  SECTION("Q_E0 is half the measured second derivative of the error") {
    CHECK(relerr(L.Q_E0, rep.norm_D2E0 / BigReal(ctx, 2L)) < BigReal(ctx, "1e-30"));
  }
  SECTION("the C_T precondition fails at the published eps0") {
    // T0 C_tau = 6.0155e5 >= 1: C_T and its dependents are not numbers
    CHECK_FALSE(L.ct_finite);
    CHECK_FALSE(L.C_T.is_finite());
    CHECK(relerr(rep.twist_T0 * L.C_tau,
                 BigReal(ctx, "601554.9506465711854114966948136444936071")) < rt);
  }
  SECTION("ledger evaluation is deterministic") {
    ConstantLedger L2 = compute_constants(rep, b, nu, tau, rho0, delta0, lam, eps0);
    CHECK(L.C_sigma0.to_string(115) == L2.C_sigma0.to_string(115));
    CHECK(L.C_W0.to_string(115) == L2.C_W0.to_string(115));
    CHECK(L.C_S.to_string(115) == L2.C_S.to_string(115));
  }
}

TEST_CASE("conditions at the flagship report") {
  auto ctx = make_context(115);
  NormReport rep = flagship_norm_report(ctx);
  DerivativeBounds b = flagship_bounds(ctx);
  BigReal nu = golden_nu(ctx), tau = golden_tau(ctx);
  BigReal rho0(ctx, "3e-5");
  BigReal delta0 = rho0 / BigReal(ctx, 4L);
  BigReal zeta = rho0;
  BigReal lam(ctx, "0.9");
  SECTION("overall pass at the solver-tolerance error level") {
    BigReal eps0(ctx, "1e-46");
    ConstantLedger L = compute_constants(rep, b, nu, tau, rho0, delta0, lam, eps0);
    ConditionReport cond =
        check_conditions(L, eps0, zeta, nu, tau, rho0, delta0, rep, b);
    CHECK(cond.overall);
    BigReal rt(ctx, "1e-24");
    CHECK(relerr(cond["C1"].lhs,
                 BigReal(ctx, "3.807618172069501973313167072806147309435e-30")) < rt);
    CHECK(relerr(cond["C2"].lhs,
                 BigReal(ctx, "1.446418249400659991794713179009063110563e-24")) < rt);
    CHECK(relerr(cond["C3"].lhs,
                 BigReal(ctx, "1.523047268822543968497986312967059086169e-29")) < rt);
    CHECK(relerr(cond["C4"].lhs,
                 BigReal(ctx, "5.25682082728051615539983760490838156679e-41")) < rt);
    CHECK(cond["C1"].strict);
    CHECK_FALSE(cond["C2"].strict);
    CHECK(cond["condbT"].strict);
    CHECK_FALSE(cond["C8"].strict);
  }
  SECTION("gross violation: eps0 = 1 fails the zeta conditions") {
    BigReal eps0(ctx, 1L);
    ConstantLedger L = compute_constants(rep, b, nu, tau, rho0, delta0, lam, eps0);
    ConditionReport cond =
        check_conditions(L, eps0, zeta, nu, tau, rho0, delta0, rep, b);
    CHECK_FALSE(cond.overall);
    CHECK_FALSE(cond["C1"].pass);
    CHECK_FALSE(cond["C3"].pass);
    CHECK_FALSE(cond["C4"].pass);
    // the vanishing mu-derivatives keep the Cnew pair true no matter what
    CHECK(cond["Cnew1"].pass);
    CHECK(cond["Cnew2"].pass);
    CHECK(cond["Cnew1"].lhs.sign() == 0);
  }
  SECTION("monotone degradation when a norm is inflated") {
    BigReal eps0(ctx, "1e-46");
    ConstantLedger L = compute_constants(rep, b, nu, tau, rho0, delta0, lam, eps0);
    NormReport worse = rep;
    worse.norm_S = worse.norm_S * BigReal(ctx, 2L);
    ConstantLedger Lw = compute_constants(worse, b, nu, tau, rho0, delta0, lam, eps0);
    CHECK(Lw.C_sigma0 > L.C_sigma0);
    CHECK(Lw.C_W0 > L.C_W0);
    CHECK(Lw.C_eta0 > L.C_eta0);
    ConditionReport c1 = check_conditions(L, eps0, zeta, nu, tau, rho0, delta0, rep, b);
    ConditionReport c2 =
        check_conditions(Lw, eps0, zeta, nu, tau, rho0, delta0, worse, b);
    CHECK(c2["C1"].lhs > c1["C1"].lhs);
    CHECK(c2["C3"].lhs > c1["C3"].lhs);
  }
  SECTION("lambda = 1 is rejected by certification") {
    BigReal eps0(ctx, "1e-46");
    CHECK_THROWS_AS(compute_constants(rep, b, nu, tau, rho0, delta0,
                                      BigReal(ctx, 1L), eps0),
                    DomainError);
  }
}

TEST_CASE("kemu bounds recorded") {
  auto ctx = make_context(115);
  NormReport rep = flagship_norm_report(ctx);
  DerivativeBounds b = flagship_bounds(ctx);
  BigReal nu = golden_nu(ctx), tau = golden_tau(ctx);
  BigReal rho0(ctx, "3e-5");
  BigReal delta0 = rho0 / BigReal(ctx, 4L);
  BigReal lam(ctx, "0.9");
  BigReal eps0(ctx, "1e-46");
  ConstantLedger L = compute_constants(rep, b, nu, tau, rho0, delta0, lam, eps0);
  ConditionReport cond = check_conditions(L, eps0, rho0, nu, tau, rho0, delta0, rep, b);
  CHECK(cond.bound_dK.is_finite());
  CHECK(cond.bound_dmu.is_finite());
  CHECK(cond.bound_dK < BigReal(ctx, "1e-10"));
  CHECK(cond.bound_dmu < BigReal(ctx, "1e-10"));
  CHECK(cond.bound_dK == cond["C3"].lhs);
  CHECK(cond.bound_dmu == cond["C4"].lhs);
}

TEST_CASE("certification of the trivial solution") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx);
  BigReal lam(ctx, "0.9");
  const std::size_t n = 64;
  NewtonWorkspace ws(ctx, n, om);
  PeriodicFunction u(ctx, n);
  MapParams p(BigReal(ctx), lam, (BigReal(ctx, 1L) - lam) * om);
  CertifyOptions opt(ctx, BigReal(ctx, "3e-5"));
  CertifyResult res = certify(ws, u, p, opt);
  CHECK(res.conditions.overall);
  CHECK(res.eps0 < BigReal(ctx, "1e-54"));
  // margins on the zeta conditions exceed ten orders of magnitude
  for (const char* name : {"C1", "C2", "C3", "C4"}) {
    const auto& e = res.conditions[name];
    CHECK(e.pass);
    CHECK(e.lhs * BigReal(ctx, "1e10") < e.rhs);
  }
  // norms of the trivial frame are exactly the closed-form ones
  CHECK(relerr(res.report.norm_DK, BigReal(ctx, 1L)) < BigReal(ctx, "1e-50"));
  CHECK(relerr(res.report.norm_N, BigReal(ctx, 1L)) < BigReal(ctx, "1e-50"));
  CHECK(relerr(res.report.norm_S, lam) < BigReal(ctx, "1e-50"));
  CHECK(res.report.norm_D2K < BigReal(ctx, "1e-50"));
  CHECK(relerr(res.report.norm_Df, BigReal(ctx, 1L) + lam) < BigReal(ctx, "1e-50"));
}

TEST_CASE("find_eps_kam at reduced resolution") {
  auto ctx = make_context(60);
  BigReal lam(ctx, "0.9");
  EpsKamConfig cfg(ctx, 256, lam, BigReal(ctx, "3e-5"));
  cfg.cont.solver.tol = BigReal(ctx, "1e-40");
  cfg.bracket = BigReal(ctx, "1e-3");  // coarse bracket keeps the test fast
  EpsKamResult r = find_eps_kam(cfg);
  CHECK(r.found);
  CHECK(r.eps_kam > BigReal(ctx, "0.2"));
  CHECK(r.eps_kam < BigReal(ctx, "0.9"));
  CHECK(r.cert.conditions.overall);
  CHECK(r.probes.size() >= 5);
  // branch history is strictly increasing in eps
  for (std::size_t i = 1; i < r.branch.size(); ++i)
    CHECK(r.branch[i].eps > r.branch[i - 1].eps);
  // mu stays in the physical window for lambda = 0.9
  CHECK(r.mu > BigReal(ctx, "0.0610"));
  CHECK(r.mu < BigReal(ctx, "0.0619"));
}
