#include "scsr/verify/gradcheck.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scsr/errors.hpp"
#include "scsr/rng.hpp"

namespace scsr::verify {

namespace {

// Indices to probe in a buffer of n values.
std::vector<std::size_t> probe_indices(std::size_t n, const GradCheckOptions& options, std::uint64_t salt) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (options.max_coords == 0 || options.max_coords >= n) return all;
  Rng rng(options.seed ^ (salt * 0x9E3779B97F4A7C15ULL));
  for (std::size_t i = 0; i < options.max_coords; ++i) std::swap(all[i], all[i + rng.below(n - i)]);
  all.resize(options.max_coords);
  std::sort(all.begin(), all.end());
  return all;
}

struct Sample {
  double analytic;
  double numeric;
  std::string where;
};

GradCheckResult score(const std::string& name, const std::vector<Sample>& samples, const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = name;
  double largest = 0.0;
  for (const Sample& s : samples) largest = std::max(largest, std::abs(s.analytic));
  const double floor = std::max(options.floor, options.scale_floor * largest);
  for (const Sample& s : samples) {
    const double denom = std::max({std::abs(s.analytic), std::abs(s.numeric), floor});
    double rel = std::abs(s.analytic - s.numeric) / denom;
    if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
    ++result.checked;
    if (rel > options.tolerance) result.passed = false;
    if (rel > result.max_rel_error || result.worst.empty()) {
      result.max_rel_error = rel;
      result.worst = fmt::format("{}: analytic {:.10g} numeric {:.10g}", s.where, s.analytic, s.numeric);
    }
  }
  return result;
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, const ScalarFn& f, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options) {
  std::vector<Sample> samples;
  std::vector<std::vector<double>> values;
  for (const Tensor& t : inputs) values.push_back(t.to_vector());

  auto leaves = [&](bool grad) {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back(Tensor::from_data(inputs[i].shape(), values[i], grad));
    return out;
  };

  const std::vector<Tensor> tracked = leaves(true);
  const Tensor y = f(tracked);
  if (y.size() != 1) throw DimensionError("check_gradients: function must return a scalar");
  backward(y);

  NoGradGuard no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto grad = tracked[i].grad();
    for (std::size_t k : probe_indices(values[i].size(), options, i + 1)) {
      const double saved = values[i][k];
      values[i][k] = saved + options.step;
      const double up = f(leaves(false)).item();
      values[i][k] = saved - options.step;
      const double down = f(leaves(false)).item();
      values[i][k] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = grad.empty() ? 0.0 : grad[k];
      samples.push_back({analytic, numeric, fmt::format("input {} index {}", i, k)});
    }
  }
  return score(name, samples, options);
}

GradCheckResult check_parameter_gradients(const std::string& name, const std::function<Tensor()>& f,
                                          const std::vector<Parameter*>& params, const GradCheckOptions& options) {
  std::vector<Sample> samples;
  for (Parameter* p : params) p->zero_grad();
  const Tensor y = f();
  if (y.size() != 1) throw DimensionError("check_parameter_gradients: function must return a scalar");
  backward(y);
  std::vector<std::vector<double>> analytic;
  for (Parameter* p : params) analytic.emplace_back(p->grad().begin(), p->grad().end());

  NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i]->mutable_data();
    for (std::size_t k : probe_indices(data.size(), options, i + 1)) {
      const double saved = data[k];
      data[k] = saved + options.step;
      const double up = f().item();
      data[k] = saved - options.step;
      const double down = f().item();
      data[k] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      samples.push_back({analytic[i][k], numeric, fmt::format("{}[{}]", params[i]->name(), k)});
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return score(name, samples, options);
}

std::string format_result(const GradCheckResult& r) {
  return fmt::format("{} {}: {} coords, max rel error {:.3e}{}", r.passed ? "PASS" : "FAIL", r.name, r.checked,
                     r.max_rel_error, r.passed ? "" : " (worst " + r.worst + ")");
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double stddev, double mean) {
  Rng rng(seed);
  std::vector<double> v(shape.size());
  for (double& x : v) x = rng.normal(mean, stddev);
  return Tensor::from_data(shape, std::move(v));
}

Tensor random_tensor_away_from_zero(Shape shape, std::uint64_t seed, double margin) {
  Rng rng(seed);
  std::vector<double> v(shape.size());
  for (double& x : v) {
    const double magnitude = margin + rng.uniform(0.0, 1.0);
    x = rng.uniform() < 0.5 ? -magnitude : magnitude;
  }
  return Tensor::from_data(shape, std::move(v));
}

}  // namespace scsr::verify
