#include "midl/harness/verify.hpp"

#include "midl/tabular/suites.hpp"

#include <json.hpp>

namespace midl::harness {

VerifySummary verify_theorem(int theorem, int instances, std::uint64_t seed, std::ostream& out) {
  if (theorem < 1 || theorem > 3) throw Error(ErrorCode::Argument, "theorem must be 1, 2 or 3");
  if (instances < 1) throw Error(ErrorCode::Argument, "instances must be positive");
  VerifySummary sum;
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    nlohmann::ordered_json j;
    j["theorem"] = theorem;
    j["seed"] = s;
    bool applicable = true, pass = false;
    if (theorem == 1) {
      const auto r = tabular::run_theorem1_instance(s);
      applicable = r.premise_all && r.lambda_ok && !r.unsatisfiable;
      pass = r.holds && r.converged;
      j["premise_scale"] = r.premise_scale;
      j["unsatisfiable"] = r.unsatisfiable;
      j["premise"] = r.premise_all;
      j["lambda"] = r.lambda;
      j["delta_l"] = r.delta_l;
      j["lambda_ge_delta_l"] = r.lambda_ok;
      j["margin"] = r.min_margin;
      j["converged"] = r.converged;
      j["iterations"] = r.iterations;
      j["max_contraction"] = r.max_contraction;
    } else if (theorem == 2) {
      const auto r = tabular::run_theorem2_instance(s, tabular::Theorem2Family::Concentrated, false);
      const auto eq = tabular::run_theorem2_instance(s, tabular::Theorem2Family::Concentrated, true);
      applicable = r.flag;
      pass = r.holds && eq.holds;
      j["family"] = tabular::family_name(tabular::Theorem2Family::Concentrated);
      j["flag"] = r.flag;
      j["flag_lhs"] = r.flag_lhs;
      j["flag_rhs"] = r.flag_rhs;
      j["kappa1"] = r.kappa1;
      j["kappa2"] = r.kappa2;
      j["margin"] = r.kappa1 - r.kappa2;
      j["rho_kappa_gap"] = std::abs(eq.kappa1 - eq.kappa2);
    } else {
      const auto r = tabular::run_theorem3_instance(s);
      const auto& rep = r.report;
      pass = rep.bound_holds;
      j["c_r"] = r.c_r;
      j["c_t"] = r.c_t;
      j["varpi_star"] = rep.varpi_star;
      j["varpi_b"] = rep.varpi_b;
      j["mu1"] = rep.mu1;
      j["mu2"] = rep.mu2;
      j["mu3"] = rep.mu3;
      j["zeta"] = rep.zeta;
      j["j_star"] = rep.j_star;
      j["j_b"] = rep.j_b;
      j["margin"] = rep.j_diff - rep.zeta;
    }
    j["applicable"] = applicable;
    j["pass"] = pass;
    out << j.dump() << '\n';
    ++sum.instances;
    if (applicable) ++sum.applicable;
    if (pass) ++sum.passed;
  }
  return sum;
}

}  // namespace midl::harness
