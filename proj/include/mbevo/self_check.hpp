#pragma once

#include <string>
#include <vector>

namespace mbevo {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Fast oracle and property checks over the core modules, for `mbevo validate`.
std::vector<CheckResult> run_self_checks();

}  // namespace mbevo
