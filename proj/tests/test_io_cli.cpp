#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "kam/reporting.hpp"
#include "paper_values.hpp"

using namespace kam;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& p) : path(p) {}
  ~TempFile() { std::remove(path.c_str()); }
};

ContinuationState small_branch(const PrecisionContext& ctx, std::size_t n,
                               const char* eps_target) {
  BigReal om = golden_mean(ctx), lam(ctx, "0.9");
  NewtonWorkspace ws(ctx, n, om);
  ContinuationOptions copt(ctx);
  copt.eps_target = BigReal(ctx, eps_target);
  MapParams base(BigReal(ctx), lam, BigReal(ctx));
  ContinuationState st = continuation(ws, base, copt);
  REQUIRE(st.reached_target);
  return st;
}

}  // namespace

TEST_CASE("solution file round trip") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx), lam(ctx, "0.9");
  ContinuationState st = small_branch(ctx, 128, "0.15");
  MapParams p(st.eps_current, lam, st.mu);
  BigReal rho0(ctx, "3e-5");
  TempFile f1("/tmp/kam_test_sol1.kam"), f2("/tmp/kam_test_sol2.kam");
  save_solution(f1.path, make_solution_file(st.u, p, om, rho0));
  SECTION("load then save is byte-identical") {
    SolutionFile loaded = load_solution(f1.path);
    save_solution(f2.path, loaded);
    CHECK(slurp(f1.path) == slurp(f2.path));
  }
  SECTION("state reconstructs and rechecks") {
    SolutionState ss = solution_to_state(load_solution(f1.path));
    CHECK(ss.ctx.decimal_digits() == 60);
    CHECK(ss.u.n_modes() == 128);
    NewtonWorkspace ws(ss.ctx, ss.u.n_modes(), ss.omega);
    ws.eval_error(ss.u, ss.params);
    // the stored run converged to 1e-46; the reloaded state must agree to
    // the d-digit serialization error propagated through one error pass
    CHECK(ws.residual(BigReal(ss.ctx)) < BigReal(ss.ctx, "1e-46") * BigReal(ss.ctx, 10L));
  }
  SECTION("tampering is caught by the residual recheck") {
    SolutionFile f = load_solution(f1.path);
    f.coeffs[66].first = "0.0";  // zero the k = 2 coefficient
    f.coeffs[66].second = "0.0";
    SolutionState ss = solution_to_state(f);
    NewtonWorkspace ws(ss.ctx, ss.u.n_modes(), ss.omega);
    ws.eval_error(ss.u, ss.params);
    CHECK(ws.residual(BigReal(ss.ctx)) > BigReal(ss.ctx, "1e-10"));
  }
  SECTION("format violations are rejected") {
    std::ofstream bad("/tmp/kam_test_bad.kam", std::ios::binary);
    bad << "not-a-solution\n";
    bad.close();
    TempFile fb("/tmp/kam_test_bad.kam");
    CHECK_THROWS_AS(load_solution(fb.path), IoError);
  }
}

TEST_CASE("run configuration") {
  TempFile cf("/tmp/kam_test_cfg");
  {
    std::ofstream out(cf.path);
    out << "# comment\n"
        << "lambda = 0.85\n"
        << "modes=256\n"
        << "digits = 55   # trailing comment\n";
  }
  RunConfig cfg = RunConfig::defaults();
  cfg.load_file(cf.path);
  CHECK(cfg.get("lambda") == "0.85");
  CHECK(cfg.get_int("modes") == 256);
  CHECK(cfg.get_int("digits") == 55);
  CHECK(cfg.get("rho0") == "3e-5");  // untouched default
  // flags override file values
  cfg.kv["lambda"] = "0.9";
  RunSetup s = make_setup(cfg);
  CHECK(s.ctx.decimal_digits() == 55);
  CHECK(s.n_modes == 256);
  CHECK(s.lambda.to_string(2) == "9.0e-01");
  // delta0 = rho0/4 and zeta = rho0 defaults
  CHECK(abs(s.cert.delta0 * BigReal(s.ctx, 4L) - s.cert.rho0).sign() == 0);
  CHECK(s.cert.zeta == s.cert.rho0);
}

TEST_CASE("report serialization round trip") {
  auto ctx = make_context(115);
  NormReport rep = flagship_norm_report(ctx);
  DerivativeBounds b = flagship_bounds(ctx);
  BigReal nu = golden_nu(ctx), tau = golden_tau(ctx);
  BigReal rho0(ctx, "3e-5");
  BigReal delta0 = rho0 / BigReal(ctx, 4L);
  BigReal eps0(ctx, "1e-46"), lam(ctx, "0.9");
  ConstantLedger L = compute_constants(rep, b, nu, tau, rho0, delta0, lam, eps0);
  ConditionReport cond = check_conditions(L, eps0, rho0, nu, tau, rho0, delta0, rep, b);
  // through JSON: 30-digit strings in, recomputed conditions out
  nlohmann::json jr = norm_report_to_json(rep);
  nlohmann::json jb = bounds_to_json(b);
  NormReport rep2 = norm_report_from_json(jr, ctx);
  DerivativeBounds b2 = bounds_from_json(jb, ctx);
  ConstantLedger L2 = compute_constants(rep2, b2, nu, tau, rho0, delta0, lam, eps0);
  ConditionReport cond2 =
      check_conditions(L2, eps0, rho0, nu, tau, rho0, delta0, rep2, b2);
  REQUIRE(cond.entries.size() == cond2.entries.size());
  for (std::size_t i = 0; i < cond.entries.size(); ++i) {
    CHECK(cond.entries[i].name == cond2.entries[i].name);
    CHECK(cond.entries[i].pass == cond2.entries[i].pass);
    CHECK(cond.entries[i].strict == cond2.entries[i].strict);
  }
  CHECK(cond.overall == cond2.overall);
  // all serialized numbers parse back within one ulp at 30 digits
  BigReal got(ctx, jr["norm_S"].get<std::string>());
  CHECK(abs(got - rep.norm_S) <= abs(rep.norm_S) * BigReal(ctx, "1e-29"));
}

TEST_CASE("determinism of a full run") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx), lam(ctx, "0.9");
  BigReal rho0(ctx, "3e-5");
  TempFile f1("/tmp/kam_det_1.kam"), f2("/tmp/kam_det_2.kam");
  for (const auto& path : {f1.path, f2.path}) {
    ContinuationState st = small_branch(ctx, 128, "0.1");
    MapParams p(st.eps_current, lam, st.mu);
    save_solution(path, make_solution_file(st.u, p, om, rho0));
  }
  CHECK(slurp(f1.path) == slurp(f2.path));
}

TEST_CASE("certification consumes saved solutions") {
  auto ctx = make_context(60);
  BigReal om = golden_mean(ctx), lam(ctx, "0.9");
  ContinuationState st = small_branch(ctx, 256, "0.3");
  MapParams p(st.eps_current, lam, st.mu);
  BigReal rho0(ctx, "3e-5");
  TempFile f1("/tmp/kam_cert_sol.kam");
  save_solution(f1.path, make_solution_file(st.u, p, om, rho0));
  SolutionState ss = solution_to_state(load_solution(f1.path));
  NewtonWorkspace ws(ss.ctx, ss.u.n_modes(), ss.omega);
  CertifyOptions opt(ss.ctx, ss.rho0);
  CertifyResult r = certify(ws, ss.u, ss.params, opt);
  CHECK(r.conditions.overall);
  CHECK(r.eps0 < BigReal(ctx, "1e-40"));
  // kemu closeness bounds are recorded and small at a certified point
  CHECK(r.conditions.bound_dK < BigReal(ctx, "1e-20"));
  CHECK(r.conditions.bound_dmu < BigReal(ctx, "1e-30"));
}
