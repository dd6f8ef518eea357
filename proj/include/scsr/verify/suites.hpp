#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Finite-difference and oracle suites packaged for the command line and the
// acceptance run. Each check repeats over seeded cases and keeps the worst.
namespace scsr::verify {

struct SuiteCheck {
  std::string name;
  std::size_t cases = 0;
  double worst = 0.0;  // largest relative (gradients) or absolute (oracles) error
  double tolerance = 0.0;
  bool passed = true;
  std::string detail;  // worst coordinate of the worst case
};

struct SuiteReport {
  std::string module;
  std::vector<SuiteCheck> checks;

  bool passed() const;
  /// One line per check: PASS/FAIL, name, cases, worst error vs tolerance.
  std::string to_text() const;
};

/// Modules accepted by run_suite: tensor, scconv, losses, networks.
std::vector<std::string> suite_modules();

/// Gradient checks for the differentiable operations of `module`.
SuiteReport run_gradient_suite(const std::string& module, int cases = 10);

/// Loop-oracle comparisons (tolerance 1e-10) and the conv/transposed-conv
/// adjoint identity (tolerance 1e-8).
SuiteReport run_oracle_suite(int cases = 10);

/// Gradient suite of `module` plus the oracles that belong to it.
SuiteReport run_suite(const std::string& module, int cases = 10);

}  // namespace scsr::verify
