#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tvflow/calibration.hpp"
#include "tvflow/errors.hpp"
#include "tvflow/scenario.hpp"
#include "tvflow/verify.hpp"

using namespace tvflow;

namespace {

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kBadInput = 2;
constexpr int kNotCalibrable = 3;
constexpr int kIntegrationFailure = 4;

const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  verify: at least one check failed\n"
    "  2  invalid input (flags, scenario, domain error)\n"
    "  3  calibrate: the region is not calibrable\n"
    "  4  evolve: integration failure or unsupported configuration";

const char* reason_name(VerdictReason r) {
  switch (r) {
    case VerdictReason::Admissible: return "admissible";
    case VerdictReason::ViolatesUnitBound: return "violates |z| <= 1";
    case VerdictReason::NoBoundedSolution: return "no bounded solution";
  }
  return "?";
}

struct CalibrateArgs {
  int n = 2;
  double r0 = 1.0;
  std::string r1 = "5";
  std::string signature = "const";
  int samples = 0;
  std::string csv;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const Dimension dim(a.n);
  const double r1 = (a.r1 == "inf" || a.r1 == "infinity") ? kInfinity : std::stod(a.r1);
  const GeneralizedAnnulus domain(dim, a.r0, r1);
  SignatureSpec sig;
  switch (domain.kind()) {
    case DomainKind::Ball: sig = SignatureSpec::ball(); break;
    case DomainKind::ComplementOfBall: sig = SignatureSpec::complement(); break;
    case DomainKind::Annulus:
      if (a.signature == "const") {
        sig = SignatureSpec::constant();
      } else if (a.signature == "nonconst") {
        sig = SignatureSpec::alternating();
      } else {
        throw domain_error("--signature must be const or nonconst");
      }
      break;
    case DomainKind::WholeSpace: break;
  }
  const CalibrabilityVerdict v = classify(domain, sig);
  std::printf("domain      n=%d  R0=%.10g  R1=%.10g\n", a.n, a.r0, r1);
  if (!v.witness) {
    std::printf("verdict     NOT CALIBRABLE (%s)\n", reason_name(v.reason));
    return kNotCalibrable;
  }
  const Calibration& c = *v.witness;
  const auto& k = c.profile.coefficients();
  std::printf("basis       %s\n", dim.planar() ? "r^3, r log r, r, 1/r" : "r^3, r^(3-n), r, r^(1-n)");
  std::printf("c           %.17g %.17g %.17g %.17g\n", k[0], k[1], k[2], k[3]);
  std::printf("lambda      %.17g\n", c.lambda);
  std::printf("sup|z|      %.17g at r=%.10g\n", c.admissibility.sup_abs_z, c.admissibility.argmax);
  std::printf("verdict     %s (%s)\n", v.calibrable ? "CALIBRABLE" : "NOT CALIBRABLE", reason_name(v.reason));
  if (v.violation_radius) std::printf("violation   r=%.10g\n", *v.violation_radius);

  if (a.samples > 0 && !a.csv.empty()) {
    std::ofstream out(a.csv);
    if (!out) throw domain_error("cannot write " + a.csv);
    const double lo = a.r0 > 0.0 ? a.r0 : 0.0;
    const double hi = std::isfinite(r1) ? r1 : 10.0 * a.r0;
    out << "r,z,admissible\n";
    for (int i = 0; i < a.samples; ++i) {
      const double r = a.samples == 1 ? lo : lo + (hi - lo) * i / (a.samples - 1);
      out << format_number(r) << ',' << format_number(c.profile.z(r)) << ',' << (v.calibrable ? 1 : 0) << '\n';
    }
    std::printf("wrote       %s\n", a.csv.c_str());
  }
  return v.calibrable ? kOk : kNotCalibrable;
}

int cmd_qstar(bool table) {
  const double q = compute_qstar();
  std::printf("Q* = %.10f\n", q);
  std::printf("m(Q*) = %.3e\n", m_function(q));
  if (table) {
    std::printf("Q,m\n");
    for (double x = 3.0; x <= 20.0 + 1e-12; x += 0.5) std::printf("%.17g,%.17g\n", x, m_function(x));
  }
  return kOk;
}

int cmd_evolve(const std::string& path, const std::string& prefix) {
  const Scenario sc = load_scenario(path);
  const Trajectory tr = run_scenario(sc);
  for (const std::string& f : write_outputs(prefix, sc, tr)) std::printf("wrote %s\n", f.c_str());
  std::printf("events %zu\n", tr.events.size());
  if (tr.extinction_time) std::printf("extinction_time %.17g\n", *tr.extinction_time);
  return kOk;
}

int cmd_verify(const std::string& suite) {
  const auto results = run_verify(suite);
  int failed = 0;
  for (const CheckResult& r : results) {
    failed += !r.pass;
    std::printf("%s %s/%s value=%.6e bound=%.3e%s%s\n", r.pass ? "PASS" : "FAIL", r.suite.c_str(),
                r.name.c_str(), r.value, r.threshold, r.detail.empty() ? "" : " ", r.detail.c_str());
  }
  std::printf("summary checks=%zu failed=%d\n", results.size(), failed);
  return failed ? kVerifyFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial fourth-order total variation flow: calibrations, Q*, stack evolution"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Solve and classify the calibration of a ball, annulus or exterior");
  cal->add_option("--n", ca.n, "dimension")->required();
  cal->add_option("--r0", ca.r0, "inner radius (0 for a ball)")->required();
  cal->add_option("--r1", ca.r1, "outer radius ('inf' for the exterior of a ball)")->required();
  cal->add_option("--signature", ca.signature, "const or nonconst (annuli only)")
      ->check(CLI::IsMember({"const", "nonconst"}));
  cal->add_option("--samples", ca.samples, "number of (r, z) rows for --csv");
  cal->add_option("--csv", ca.csv, "write the sampled profile here");

  bool table = false;
  auto* qs = app.add_subcommand("qstar", "Print the critical ratio Q*");
  qs->add_flag("--table", table, "also print m(Q) on [3, 20]");

  std::string scenario, prefix = "tvflow";
  auto* ev = app.add_subcommand("evolve", "Evolve a scenario JSON and write CSV/JSON output");
  ev->add_option("scenario", scenario, "scenario JSON file")->required();
  ev->add_option("--out", prefix, "output file prefix");

  std::string suite = "all";
  auto* ver = app.add_subcommand("verify", "Run the built-in verification suites");
  ver->add_option("--suite", suite, "all, calibration, dynamics or oracle")
      ->check(CLI::IsMember({"all", "calibration", "dynamics", "oracle"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*cal) return cmd_calibrate(ca);
    if (*qs) return cmd_qstar(table);
    if (*ev) return cmd_evolve(scenario, prefix);
    if (*ver) return cmd_verify(suite);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.kind()) {
      case ErrorKind::Domain:
      case ErrorKind::Range: return kBadInput;
      case ErrorKind::Unsupported:
        return *cal ? kBadInput : kIntegrationFailure;
      default: return kIntegrationFailure;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: bad number: %s\n", e.what());
    return kBadInput;
  }
  return kOk;
}
