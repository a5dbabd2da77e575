#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pbnn::cli {

struct SelftestOptions {
  std::vector<std::string> faults;  // test hook: names of checks to sabotage ("ssim")
};

struct SelftestResult {
  std::vector<std::string> failed;
  double seconds = 0.0;
};

/// Library vs independent oracles: max-flow, moves, gradients, SSIM, PGM.
/// Writes one PASS/FAIL line per check to `out`.
SelftestResult run_selftest(const SelftestOptions& opts, std::ostream& out);

}  // namespace pbnn::cli
