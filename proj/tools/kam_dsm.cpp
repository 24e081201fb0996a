// Command-line front end: continuation runs, a-posteriori certification and
// table sweeps for the golden-mean attractor of the dissipative standard map.

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "kam/reporting.hpp"

using namespace kam;

namespace {

struct CommonFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value configuration file");
    auto bind = [this, cmd](const std::string& flag, const std::string& key,
                            const std::string& help) {
      cmd->add_option_function<std::string>(
             flag, [this, key](const std::string& v) { overrides[key] = v; }, help)
          ->expected(1);
    };
    bind("--lambda", "lambda", "dissipative parameter lambda in (0,1]");
    bind("--rho0", "rho0", "half-width of the analyticity strip");
    bind("--delta-frac", "delta_frac", "delta0 as a fraction of rho0 (default 0.25)");
    bind("--zeta", "zeta", "margin zeta of hypothesis H4 (default rho0)");
    bind("--modes", "modes", "number of Fourier modes (power of two)");
    bind("--digits", "digits", "working precision in decimal digits (default 115)");
    bind("--tol", "tol", "Newton residual tolerance (default 1e-46)");
    bind("--eps-target", "eps_target", "continuation target for eps");
    bind("--step-init", "step_init", "initial continuation step");
    bind("--step-max", "step_max", "continuation step cap");
    bind("--step-floor", "step_floor", "continuation step floor");
    bind("--max-iter", "max_iter", "Newton iteration cap per solve");
    bind("--w-cap", "w_cap", "diverging-step cap on ||W||");
    bind("--bracket", "bracket", "eps_KAM bisection bracket width");
  }

  RunConfig build() const {
    RunConfig cfg = RunConfig::defaults();
    cfg.kv["eps_target"] = "";
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [k, v] : overrides) cfg.kv[k] = v;
    return cfg;
  }
};

EpsKamConfig eps_kam_config(const RunSetup& s, const RunConfig& cfg) {
  EpsKamConfig kcfg(s.ctx, s.n_modes, s.lambda, s.cert.rho0);
  kcfg.cert = s.cert;
  kcfg.cont = s.cont;
  kcfg.bracket = s.bracket;
  if (cfg.get("eps_target").empty()) kcfg.cont.eps_target = BigReal(s.ctx, 1L);
  return kcfg;
}

int cmd_continue(const CommonFlags& flags, const std::string& out_path,
                 std::string branch_path) {
  RunConfig cfg = flags.build();
  if (cfg.get("eps_target").empty()) cfg.kv["eps_target"] = "0.9";
  RunSetup s = make_setup(cfg);
  NewtonWorkspace ws(s.ctx, s.n_modes, s.omega);
  MapParams base(BigReal(s.ctx), s.lambda, BigReal(s.ctx));
  ContinuationState st = continuation(ws, base, s.cont);
  MapParams p(st.eps_current, s.lambda, st.mu);
  save_solution(out_path, make_solution_file(st.u, p, s.omega, s.cert.rho0));
  if (branch_path.empty()) branch_path = out_path + ".branch.csv";
  write_branch_csv(branch_path, st.history, s.ctx.decimal_digits());
  std::cout << "continuation " << (st.reached_target ? "reached" : "stopped before")
            << " the target: eps = " << st.eps_current.to_fixed(10)
            << ", mu = " << st.mu.to_fixed(10) << "\n"
            << "solution written to " << out_path << ", branch to " << branch_path
            << "\n";
  if (!st.reached_target) {
    std::cerr << "error: " << st.stop_reason << "\n";
    return 3;
  }
  return 0;
}

int cmd_certify(const CommonFlags& flags, const std::string& solution_path,
                const std::string& out_path) {
  RunConfig cfg = flags.build();
  SolutionFile f = load_solution(solution_path);
  SolutionState ss = solution_to_state(f);
  NewtonWorkspace ws(ss.ctx, ss.u.n_modes(), ss.omega);
  // recheck the stored solution before trusting it
  ws.eval_error(ss.u, ss.params);
  BigReal res = ws.residual(BigReal(ss.ctx));
  BigReal tol = cfg.get_real(ss.ctx, "tol");
  if (res > BigReal(ss.ctx, 10L) * tol) {
    std::cerr << "error: residual recheck failed: ||E|| = " << res.to_string(8)
              << " exceeds 10*tol = " << (BigReal(ss.ctx, 10L) * tol).to_string(8)
              << " (stale or corrupted solution?)\n";
    return 4;
  }
  BigReal rho0 = flags.overrides.count("rho0") ? cfg.get_real(ss.ctx, "rho0") : ss.rho0;
  CertifyOptions opt(ss.ctx, rho0);
  opt.delta0 = cfg.get_real(ss.ctx, "delta_frac") * rho0;
  opt.zeta = cfg.get("zeta").empty() ? rho0 : cfg.get_real(ss.ctx, "zeta");
  opt.tail_threshold = std::stod(cfg.get("tail_frac"));
  CertifyResult r = certify(ws, ss.u, ss.params, opt);
  nlohmann::json j = certify_to_json(r, ss.params, ss.omega, opt,
                                     ss.ctx.decimal_digits(), ss.u.n_modes());
  j["residual_recheck"] = res.to_string(kReportDigits);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << j.dump(2) << "\n";
  }
  std::cout << "eps = " << ss.params.eps.to_fixed(10)
            << "  mu = " << ss.params.mu.to_fixed(10)
            << "  eps0 = ||E||_rho0 = " << r.eps0.to_string(8) << "\n"
            << "agreement with eps_c: " << r.agreement_percent.to_fixed(2) << "%\n"
            << conditions_table(r.conditions);
  if (!out_path.empty()) std::cout << "report written to " << out_path << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& axis, std::string values,
              const std::string& out_path) {
  RunConfig base_cfg = flags.build();
  if (values.empty()) {
    if (axis == "modes") values = "1024,2048,4096,8192";
    else if (axis == "digits") values = "50,60";
    else values = "1e-5,2e-5,3e-5,4e-5,5e-5,6e-5,7e-5,8e-5,9e-5,1e-4,2e-4";
  }
  std::vector<std::string> vals;
  for (std::size_t p = 0; p < values.size();) {
    auto c = values.find(',', p);
    if (c == std::string::npos) c = values.size();
    vals.push_back(values.substr(p, c - p));
    p = c + 1;
  }
  std::ostringstream csv;
  if (axis == "modes") csv << "n_modes,eps_kam,mu,agreement_percent,time_sec,status\n";
  else if (axis == "digits") csv << "digits,eps_kam,time_sec,status\n";
  else csv << "rho0,eps_kam,agreement_percent,mu,time_sec,status\n";
  bool all_ok = true;
  for (const auto& v : vals) {
    RunConfig cfg = base_cfg;
    cfg.kv[axis == "rho" ? "rho0" : axis] = v;
    auto t0 = std::chrono::steady_clock::now();
    std::string eps_s = "-", mu_s = "-", agree_s = "-", status = "ok";
    try {
      RunSetup s = make_setup(cfg);
      EpsKamResult r = find_eps_kam(eps_kam_config(s, cfg));
      eps_s = r.eps_kam.to_fixed(8);
      mu_s = r.mu.to_fixed(8);
      agree_s = r.cert.agreement_percent.to_fixed(2);
    } catch (const std::exception& e) {
      status = std::string("error: ") + e.what();
      all_ok = false;
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char tbuf[32];
    std::snprintf(tbuf, sizeof tbuf, "%.2f", secs);
    if (axis == "modes")
      csv << v << "," << eps_s << "," << mu_s << "," << agree_s << "," << tbuf << ","
          << status << "\n";
    else if (axis == "digits")
      csv << v << "," << eps_s << "," << tbuf << "," << status << "\n";
    else
      csv << v << "," << eps_s << "," << agree_s << "," << mu_s << "," << tbuf << ","
          << status << "\n";
    std::cout << axis << " = " << v << ": eps_KAM = " << eps_s << " mu = " << mu_s
              << " (" << tbuf << " s, " << status << ")" << std::endl;
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << csv.str();
    std::cout << "table written to " << out_path << "\n";
  }
  return all_ok ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-periodic invariant attractors of the dissipative standard map:\n"
               "FFT quasi-Newton continuation with a-posteriori KAM certification"};
  app.require_subcommand(1);

  CommonFlags cf_continue, cf_certify, cf_sweep;
  std::string out_path = "solution.kam", branch_path, cert_out = "report.json";
  std::string solution_path, axis, values, sweep_out = "sweep.csv";

  CLI::App* c1 =
      app.add_subcommand("continue", "continue the branch in eps and save the solution");
  cf_continue.attach(c1);
  c1->add_option("--out", out_path, "solution file path (default solution.kam)");
  c1->add_option("--branch-csv", branch_path,
                 "branch history CSV (default <out>.branch.csv)");

  CLI::App* c2 =
      app.add_subcommand("certify", "verify the KAM conditions on a saved solution");
  c2->add_option("solution", solution_path, "solution file to certify")->required();
  cf_certify.attach(c2);
  c2->add_option("--out", cert_out, "JSON report path (default report.json)");

  CLI::App* c3 = app.add_subcommand("sweep", "eps_KAM tables over rho/modes/digits");
  c3->add_option("--axis", axis, "sweep axis: rho, modes or digits")
      ->required()
      ->check(CLI::IsMember({"rho", "modes", "digits"}));
  c3->add_option("--values", values, "comma-separated axis values (default per axis)");
  cf_sweep.attach(c3);
  c3->add_option("--out", sweep_out, "CSV output path (default sweep.csv)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (c1->parsed()) return cmd_continue(cf_continue, out_path, branch_path);
    if (c2->parsed()) return cmd_certify(cf_certify, solution_path, cert_out);
    if (c3->parsed()) return cmd_sweep(cf_sweep, axis, values, sweep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
