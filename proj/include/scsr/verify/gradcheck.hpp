#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scsr/tensor.hpp"

namespace scsr::verify {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;  // relative
  // Denominator floor, so entries whose true derivative is ~0 are judged on
  // absolute error instead of amplifying roundoff: the larger of `floor` and
  // `scale_floor` times the largest analytic magnitude seen in the check.
  double floor = 1e-6;
  double scale_floor = 1e-3;
  // Per input, at most this many coordinates are probed (seeded choice);
  // 0 probes all of them.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = true;
  std::string worst;  // location and values of the worst coordinate
};

/// Scalar-valued function of a list of tensors.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of f at `inputs` with central differences
/// (f(x + h) - f(x - h)) / 2h, coordinate by coordinate.
/// rel = |analytic - numeric| / max(|analytic|, |numeric|, effective floor).
GradCheckResult check_gradients(const std::string& name, const ScalarFn& f, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options = {});

/// Same comparison for gradients that land in Parameters: f is evaluated as
/// is, and each probed parameter entry is nudged in place and restored.
GradCheckResult check_parameter_gradients(const std::string& name, const std::function<Tensor()>& f,
                                          const std::vector<Parameter*>& params, const GradCheckOptions& options = {});

std::string format_result(const GradCheckResult& result);

/// Seeded normal tensor, handy for building gradient-check cases.
Tensor random_tensor(Shape shape, std::uint64_t seed, double stddev = 1.0, double mean = 0.0);

/// Seeded tensor whose entries keep at least `margin` away from zero, for
/// inputs that feed kinks (ReLU, PReLU).
Tensor random_tensor_away_from_zero(Shape shape, std::uint64_t seed, double margin = 0.05);

}  // namespace scsr::verify
