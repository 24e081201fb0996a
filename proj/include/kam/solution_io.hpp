#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "kam/certifier.hpp"

namespace kam {

class IoError : public Error {
 public:
  using Error::Error;
};

/// On-disk solution: header with the run parameters as decimal strings plus
/// one line per Fourier mode of u.  The writer is canonical (fixed key
/// order, fixed digit count), so load followed by save reproduces the file
/// byte-identically.
struct SolutionFile {
  int format_version = 1;
  int digits = 0;
  std::size_t n_modes = 0;
  std::string lambda, eps, mu, omega, rho0;
  std::vector<std::pair<std::string, std::string>> coeffs;  // (re, im), k ascending
};

struct SolutionState {
  PrecisionContext ctx;
  PeriodicFunction u;
  BigReal omega;
  MapParams params;
  BigReal rho0;
};

inline SolutionFile make_solution_file(const PeriodicFunction& u, const MapParams& p,
                                       const BigReal& omega, const BigReal& rho0) {
  const PrecisionContext& ctx = u.ctx();
  const int d = ctx.decimal_digits();
  SolutionFile f;
  f.digits = d;
  f.n_modes = u.n_modes();
  f.lambda = p.lambda.to_string(d);
  f.eps = p.eps.to_string(d);
  f.mu = p.mu.to_string(d);
  f.omega = omega.to_string(d);
  f.rho0 = rho0.to_string(d);
  const long h = static_cast<long>(u.n_modes()) / 2;
  f.coeffs.reserve(u.n_modes());
  for (long k = -h; k < h; ++k)
    f.coeffs.emplace_back(u.coeff(k).re.to_string(d), u.coeff(k).im.to_string(d));
  return f;
}

inline void save_solution(const std::string& path, const SolutionFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "kamdsm-solution\n";
  out << "format_version " << f.format_version << "\n";
  out << "digits " << f.digits << "\n";
  out << "n_modes " << f.n_modes << "\n";
  out << "lambda " << f.lambda << "\n";
  out << "eps " << f.eps << "\n";
  out << "mu " << f.mu << "\n";
  out << "omega " << f.omega << "\n";
  out << "rho0 " << f.rho0 << "\n";
  out << "modes\n";
  const long h = static_cast<long>(f.n_modes) / 2;
  for (std::size_t i = 0; i < f.coeffs.size(); ++i)
    out << (static_cast<long>(i) - h) << " " << f.coeffs[i].first << " "
        << f.coeffs[i].second << "\n";
  if (!out) throw IoError("write failed: " + path);
}

inline SolutionFile load_solution(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "kamdsm-solution")
    throw IoError("not a kamdsm solution file: " + path);
  SolutionFile f;
  auto expect = [&](const std::string& key) {
    if (!std::getline(in, line)) throw IoError("truncated header: " + path);
    if (line.rfind(key + " ", 0) != 0)
      throw IoError("expected '" + key + "' in header, got: " + line);
    return line.substr(key.size() + 1);
  };
  f.format_version = std::stoi(expect("format_version"));
  if (f.format_version != 1)
    throw IoError("unsupported format_version " + std::to_string(f.format_version));
  f.digits = std::stoi(expect("digits"));
  f.n_modes = static_cast<std::size_t>(std::stoull(expect("n_modes")));
  f.lambda = expect("lambda");
  f.eps = expect("eps");
  f.mu = expect("mu");
  f.omega = expect("omega");
  f.rho0 = expect("rho0");
  if (!std::getline(in, line) || line != "modes")
    throw IoError("expected 'modes' section: " + path);
  const long h = static_cast<long>(f.n_modes) / 2;
  f.coeffs.reserve(f.n_modes);
  for (long k = -h; k < h; ++k) {
    if (!std::getline(in, line)) throw IoError("truncated mode list: " + path);
    std::istringstream ls(line);
    long kk;
    std::string re, im;
    if (!(ls >> kk >> re >> im) || kk != k)
      throw IoError("bad mode line (expected k=" + std::to_string(k) + "): " + line);
    f.coeffs.emplace_back(re, im);
  }
  return f;
}

inline SolutionState solution_to_state(const SolutionFile& f) {
  PrecisionContext ctx(f.digits);
  PeriodicFunction u(ctx, f.n_modes);
  const long h = static_cast<long>(f.n_modes) / 2;
  for (long k = -h; k < h; ++k) {
    const auto& [re, im] = f.coeffs[static_cast<std::size_t>(k + h)];
    u.coeff(k) = BigComplex(BigReal(ctx, re), BigReal(ctx, im));
  }
  return SolutionState{ctx, std::move(u), BigReal(ctx, f.omega),
                       MapParams(BigReal(ctx, f.eps), BigReal(ctx, f.lambda),
                                 BigReal(ctx, f.mu)),
                       BigReal(ctx, f.rho0)};
}

/// Flat key=value run configuration; '#' starts a comment, blank lines are
/// skipped.  Command-line flags override file entries of the same name.
struct RunConfig {
  std::map<std::string, std::string> kv;

  static RunConfig defaults() {
    RunConfig c;
    c.kv = {
        {"lambda", "0.9"},      {"rho0", "3e-5"},        {"delta_frac", "0.25"},
        {"zeta", ""},           {"modes", "8192"},       {"digits", "115"},
        {"tol", "1e-46"},       {"eps_target", "0.9"},   {"step_init", "0.1"},
        {"step_max", "0.1"},    {"step_floor", "1e-8"},  {"max_iter", "40"},
        {"w_cap", "1e3"},       {"bracket", "1e-8"},     {"tail_frac", "1e-20"},
    };
    return c;
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string line;
    while (std::getline(in, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        auto e = s.find_last_not_of(" \t");
        s.erase(e == std::string::npos ? 0 : e + 1);
        return s;
      };
      std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
      if (!key.empty()) kv[key] = val;
    }
  }

  const std::string& get(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError("missing config key: " + key);
    return it->second;
  }
  int get_int(const std::string& key) const { return std::stoi(get(key)); }
  BigReal get_real(const PrecisionContext& ctx, const std::string& key) const {
    return BigReal(ctx, get(key));
  }
};

/// Assemble the solver/certifier option structs from a config.
struct RunSetup {
  PrecisionContext ctx;
  std::size_t n_modes;
  BigReal lambda;
  BigReal omega;
  CertifyOptions cert;
  ContinuationOptions cont;
  BigReal bracket;
};

inline RunSetup make_setup(const RunConfig& c) {
  PrecisionContext ctx(c.get_int("digits"));
  std::size_t n = static_cast<std::size_t>(c.get_int("modes"));
  BigReal rho0 = c.get_real(ctx, "rho0");
  CertifyOptions cert(ctx, rho0);
  // delta0 = delta_frac * rho0; zeta defaults to rho0 when unset
  cert.delta0 = c.get_real(ctx, "delta_frac") * rho0;
  cert.zeta = c.get("zeta").empty() ? rho0 : c.get_real(ctx, "zeta");
  cert.tail_threshold = std::stod(c.get("tail_frac"));
  ContinuationOptions cont(ctx);
  cont.eps_target = c.get_real(ctx, "eps_target");
  cont.step_init = c.get_real(ctx, "step_init");
  cont.step_max = c.get_real(ctx, "step_max");
  cont.step_floor = c.get_real(ctx, "step_floor");
  cont.solver.tol = c.get_real(ctx, "tol");
  cont.solver.max_iter = c.get_int("max_iter");
  cont.solver.w_cap = c.get_real(ctx, "w_cap");
  return RunSetup{ctx,  n,    c.get_real(ctx, "lambda"), golden_mean(ctx),
                  cert, cont, c.get_real(ctx, "bracket")};
}

}  // namespace kam
