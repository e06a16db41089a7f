#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nora {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant, lemma and gradient property suite. Output depends only on
/// `seed` (no timings), so two runs with the same seed print identically.
std::vector<CheckResult> run_property_suite(std::uint64_t seed);

}  // namespace nora
