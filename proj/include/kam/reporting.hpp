#pragma once

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "kam/solution_io.hpp"

namespace kam {

/// Norm-report convention: quantities are printed with 30 decimal digits.
constexpr int kReportDigits = 30;

inline nlohmann::json norm_report_to_json(const NormReport& r) {
  nlohmann::json j;
  j["norm_M"] = r.norm_M.to_string(kReportDigits);
  j["norm_Minv"] = r.norm_Minv.to_string(kReportDigits);
  j["norm_Df"] = r.norm_Df.to_string(kReportDigits);
  j["norm_D2f"] = r.norm_D2f.to_string(kReportDigits);
  j["norm_S"] = r.norm_S.to_string(kReportDigits);
  j["norm_N"] = r.norm_N.to_string(kReportDigits);
  j["norm_Ninv"] = r.norm_Ninv.to_string(kReportDigits);
  j["norm_DK"] = r.norm_DK.to_string(kReportDigits);
  j["norm_D2K"] = r.norm_D2K.to_string(kReportDigits);
  j["norm_DKinv"] = r.norm_DKinv.to_string(kReportDigits);
  j["twist_T0"] = r.twist_T0.to_string(kReportDigits);
  j["norm_E0"] = r.norm_E0.to_string(kReportDigits);
  j["norm_D2E0"] = r.norm_D2E0.to_string(kReportDigits);
  j["under_resolved"] = r.under_resolved;
  return j;
}

inline NormReport norm_report_from_json(const nlohmann::json& j,
                                        const PrecisionContext& ctx) {
  NormReport r(ctx);
  auto get = [&](const char* k) { return BigReal(ctx, j.at(k).get<std::string>()); };
  r.norm_M = get("norm_M");
  r.norm_Minv = get("norm_Minv");
  r.norm_Df = get("norm_Df");
  r.norm_D2f = get("norm_D2f");
  r.norm_S = get("norm_S");
  r.norm_N = get("norm_N");
  r.norm_Ninv = get("norm_Ninv");
  r.norm_DK = get("norm_DK");
  r.norm_D2K = get("norm_D2K");
  r.norm_DKinv = get("norm_DKinv");
  r.twist_T0 = get("twist_T0");
  r.norm_E0 = get("norm_E0");
  r.norm_D2E0 = get("norm_D2E0");
  r.under_resolved = j.value("under_resolved", false);
  return r;
}

inline nlohmann::json bounds_to_json(const DerivativeBounds& b) {
  nlohmann::json j;
  j["Q0"] = b.Q0.to_string(kReportDigits);
  j["Q_mu0"] = b.Q_mu0.to_string(kReportDigits);
  j["Q_zmu0"] = b.Q_zmu0.to_string(kReportDigits);
  j["Q_mumu0"] = b.Q_mumu0.to_string(kReportDigits);
  j["sup_D2f"] = b.sup_D2f.to_string(kReportDigits);
  j["sup_D3f"] = b.sup_D3f.to_string(kReportDigits);
  return j;
}

inline DerivativeBounds bounds_from_json(const nlohmann::json& j,
                                         const PrecisionContext& ctx) {
  auto get = [&](const char* k) { return BigReal(ctx, j.at(k).get<std::string>()); };
  BigReal zero(ctx);
  return DerivativeBounds{get("Q0"),      get("Q_mu0"),  get("Q_zmu0"),
                          get("Q_mumu0"), get("sup_D2f"), get("sup_D3f"),
                          zero,           zero,           zero,
                          zero,           zero};
}

inline nlohmann::json ledger_to_json(const ConstantLedger& L) {
  nlohmann::json j;
  auto put = [&](const char* k, const BigReal& v) {
    j[k] = v.is_finite() ? v.to_string(kReportDigits) : std::string("inf");
  };
  put("C0", L.C0); put("Cc", L.Cc);
  put("C_sigma0", L.C_sigma0); put("C_W20", L.C_W20); put("C_W20_bar", L.C_W20_bar);
  put("C_W10", L.C_W10); put("C_W0", L.C_W0);
  put("C_eta0", L.C_eta0); put("Q_E0", L.Q_E0); put("C_R0", L.C_R0);
  put("C_E0", L.C_E0); put("C_d0", L.C_d0);
  put("kappa0", L.kappa0); put("kappaK", L.kappaK); put("kappaMu", L.kappaMu);
  put("D_K", L.D_K); put("D_2K", L.D_2K);
  put("C_N", L.C_N); put("C_M", L.C_M); put("C_Minv", L.C_Minv);
  put("C_S", L.C_S); put("C_SB", L.C_SB); put("C_tau", L.C_tau); put("C_T", L.C_T);
  put("C_sigma", L.C_sigma); put("C_W2_bar", L.C_W2_bar); put("C_W2", L.C_W2);
  put("C_W1", L.C_W1); put("C_W", L.C_W); put("C_Q", L.C_Q); put("C_R", L.C_R);
  j["ct_finite"] = L.ct_finite;
  return j;
}

inline nlohmann::json conditions_to_json(const ConditionReport& c) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : c.entries) {
    nlohmann::json je;
    je["name"] = e.name;
    je["lhs"] = e.lhs.is_finite() ? e.lhs.to_string(kReportDigits) : std::string("inf");
    je["rhs"] = e.rhs.to_string(kReportDigits);
    je["strict"] = e.strict;
    je["pass"] = e.pass;
    arr.push_back(je);
  }
  nlohmann::json j;
  j["conditions"] = arr;
  j["overall"] = c.overall;
  j["bound_dK"] = c.bound_dK.to_string(kReportDigits);
  j["bound_dmu"] = c.bound_dmu.to_string(kReportDigits);
  return j;
}

inline nlohmann::json certify_to_json(const CertifyResult& r, const MapParams& p,
                                      const BigReal& omega, const CertifyOptions& opt,
                                      int digits, std::size_t n_modes) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["digits"] = digits;
  j["n_modes"] = n_modes;
  j["lambda"] = p.lambda.to_string(kReportDigits);
  j["eps"] = p.eps.to_string(kReportDigits);
  j["mu"] = p.mu.to_string(kReportDigits);
  j["omega"] = omega.to_string(kReportDigits);
  j["rho0"] = opt.rho0.to_string(kReportDigits);
  j["delta0"] = opt.delta0.to_string(kReportDigits);
  j["zeta"] = opt.zeta.to_string(kReportDigits);
  j["eps0"] = r.eps0.to_string(kReportDigits);
  j["agreement_percent"] = r.agreement_percent.to_string(8);
  j["norm_report"] = norm_report_to_json(r.report);
  j["derivative_bounds"] = bounds_to_json(r.bounds);
  j["constant_ledger"] = ledger_to_json(r.ledger);
  j.update(conditions_to_json(r.conditions));
  return j;
}

/// Aligned condition table for terminal output.
inline std::string conditions_table(const ConditionReport& c) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "cond" << std::setw(26) << "lhs"
     << std::setw(4) << "op" << std::setw(26) << "rhs" << "result\n";
  for (const auto& e : c.entries) {
    os << std::left << std::setw(8) << e.name << std::setw(26)
       << (e.lhs.is_finite() ? e.lhs.to_string(16) : std::string("inf"))
       << std::setw(4) << (e.strict ? "<" : "<=") << std::setw(26)
       << e.rhs.to_string(16) << (e.pass ? "PASS" : "FAIL") << "\n";
  }
  os << "overall: " << (c.overall ? "PASS" : "FAIL") << "\n";
  return os.str();
}

inline void write_branch_csv(const std::string& path,
                             const std::vector<ContinuationPoint>& history,
                             int digits) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "eps,mu,residual,iterations\n";
  for (const auto& p : history)
    out << p.eps.to_string(digits) << "," << p.mu.to_string(digits) << ","
        << p.residual.to_string(8) << "," << p.iterations << "\n";
}

}  // namespace kam
