#pragma once

#include <string>
#include <vector>

namespace tvflow {

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // bound it is compared against
  std::string detail;
};

/// suite: "all", "calibration", "dynamics" or "oracle". Unknown names raise a
/// Domain error.
std::vector<CheckResult> run_verify(const std::string& suite);

}  // namespace tvflow
