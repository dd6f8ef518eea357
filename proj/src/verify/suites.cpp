#include "scsr/verify/suites.hpp"

#include <algorithm>
#include <functional>

#include <fmt/format.h>

#include "scsr/errors.hpp"
#include "scsr/losses.hpp"
#include "scsr/networks.hpp"
#include "scsr/ops.hpp"
#include "scsr/scconv.hpp"
#include "scsr/verify/gradcheck.hpp"
#include "scsr/verify/reference.hpp"

namespace scsr::verify {

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kOracleTolerance = 1e-10;
constexpr double kAdjointTolerance = 1e-8;

Tensor bias(int channels, std::uint64_t seed) { return random_tensor({1, channels, 1, 1}, seed); }

Tensor uniform_tensor(Shape s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(s.size());
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(s, std::move(v));
}

void perturb(const std::vector<Parameter*>& params, std::uint64_t seed, double stddev) {
  Rng rng(seed);
  for (Parameter* p : params) {
    for (double& v : p->mutable_data()) v += rng.normal(0.0, stddev);
  }
}

// Runs `one_case(seed)` for every seed; each case may yield several results.
SuiteCheck gradient_check(const std::string& name, int cases,
                          const std::function<std::vector<GradCheckResult>(std::uint64_t)>& one_case) {
  SuiteCheck check{name, 0, 0.0, kGradTolerance, true, {}};
  for (int s = 0; s < cases; ++s) {
    for (const GradCheckResult& r : one_case(static_cast<std::uint64_t>(s))) {
      if (r.max_rel_error >= check.worst) {
        check.worst = r.max_rel_error;
        check.detail = fmt::format("seed {} {}: {}", s, r.name, r.worst);
      }
      check.passed = check.passed && r.passed;
    }
    ++check.cases;
  }
  return check;
}

SuiteCheck difference_check(const std::string& name, int cases, double tolerance,
                            const std::function<double(std::uint64_t)>& one_case) {
  SuiteCheck check{name, 0, 0.0, tolerance, true, {}};
  for (int s = 0; s < cases; ++s) {
    const double d = one_case(static_cast<std::uint64_t>(s));
    if (d >= check.worst) {
      check.worst = d;
      check.detail = fmt::format("seed {}", s);
    }
    check.passed = check.passed && d <= tolerance;
    ++check.cases;
  }
  return check;
}

std::vector<SuiteCheck> tensor_gradients(int n) {
  std::vector<SuiteCheck> out;
  out.push_back(gradient_check("conv2d", n, [](std::uint64_t s) {
    const int stride = 1 + static_cast<int>(s % 2);
    return std::vector{check_gradients(
        "conv2d",
        [stride](const std::vector<Tensor>& in) {
          return ops::sum(ops::square(ops::conv2d(in[0], in[1], in[2], stride, 1)));
        },
        {random_tensor({2, 2, 5, 5}, s), random_tensor({3, 2, 3, 3}, s + 1), bias(3, s + 2)})};
  }));
  out.push_back(gradient_check("conv2d_transposed", n, [](std::uint64_t s) {
    return std::vector{check_gradients(
        "conv2d_transposed",
        [](const std::vector<Tensor>& in) {
          return ops::sum(ops::square(ops::conv2d_transposed(in[0], in[1], in[2], 2, 1)));
        },
        {random_tensor({1, 2, 3, 3}, s), random_tensor({2, 3, 4, 4}, s + 1), bias(3, s + 2)})};
  }));
  out.push_back(gradient_check("avg_pool2d", n, [](std::uint64_t s) {
    const Tensor probe = random_tensor({1, 2, 2, 2}, s + 9);
    return std::vector{check_gradients(
        "avg_pool2d",
        [probe](const std::vector<Tensor>& in) { return ops::sum(ops::mul(ops::avg_pool2d(in[0], 4), probe)); },
        {random_tensor({1, 2, 8, 8}, s)})};
  }));
  out.push_back(gradient_check("upsample_bilinear", n, [](std::uint64_t s) {
    const Tensor probe = random_tensor({1, 2, 9, 6}, s + 9);
    return std::vector{check_gradients(
        "upsample_bilinear",
        [probe](const std::vector<Tensor>& in) {
          return ops::sum(ops::mul(ops::upsample_bilinear(in[0], 3), probe));
        },
        {random_tensor({1, 2, 3, 2}, s)})};
  }));
  out.push_back(gradient_check("sigmoid", n, [](std::uint64_t s) {
    return std::vector{check_gradients(
        "sigmoid", [](const std::vector<Tensor>& in) { return ops::sum(ops::square(ops::sigmoid(in[0]))); },
        {random_tensor({1, 2, 3, 3}, s, 2.0)})};
  }));
  out.push_back(gradient_check("prelu", n, [](std::uint64_t s) {
    return std::vector{check_gradients(
        "prelu", [](const std::vector<Tensor>& in) { return ops::sum(ops::square(ops::prelu(in[0], in[1]))); },
        {random_tensor_away_from_zero({1, 2, 3, 3}, s), Tensor::scalar(0.1 + 0.05 * static_cast<double>(s))})};
  }));
  out.push_back(gradient_check("leaky_relu", n, [](std::uint64_t s) {
    return std::vector{check_gradients(
        "leaky_relu",
        [](const std::vector<Tensor>& in) { return ops::sum(ops::square(ops::leaky_relu(in[0], 0.2))); },
        {random_tensor_away_from_zero({1, 2, 3, 3}, s)})};
  }));
  return out;
}

std::vector<SuiteCheck> scconv_gradients(int n) {
  std::vector<SuiteCheck> out;
  out.push_back(gradient_check("sc_block end-to-end", n, [](std::uint64_t s) {
    Rng rng(s);
    SCBlockParams p = make_sc_block("b", 4, 2, rng);
    perturb(p.parameters(), s + 50, 0.1);
    const Tensor x = random_tensor({1, 4, 4, 4}, s + 1);
    const Tensor probe = random_tensor({1, 4, 4, 4}, s + 2);
    auto loss = [&](const Tensor& in) { return ops::sum(ops::mul(sc_block_forward(in, p), probe)); };
    return std::vector{
        check_gradients("input", [&](const std::vector<Tensor>& in) { return loss(in[0]); }, {x}),
        check_parameter_gradients("params", [&] { return loss(x); }, p.parameters())};
  }));
  return out;
}

std::vector<SuiteCheck> loss_gradients(int n) {
  std::vector<SuiteCheck> out;
  out.push_back(gradient_check("robust loss (residual, alpha, c)", n, [](std::uint64_t s) {
    const double k = static_cast<double>(s);
    RobustLossParams p = RobustLossParams::create(0.2 + 0.17 * k, 0.05 + 0.1 * k);
    const Tensor x = random_tensor({1, 2, 3, 3}, s, 0.5);
    return std::vector{
        check_gradients("residual", [&](const std::vector<Tensor>& in) { return robust_loss(in[0], p); }, {x}),
        check_parameter_gradients("alpha/c", [&] { return robust_loss(x, p); }, p.parameters()),
        check_gradients(
            "alpha/c direct", [](const std::vector<Tensor>& in) { return robust_loss(in[0], in[1], in[2]); },
            {x, Tensor::scalar(0.3 + 0.15 * k), Tensor::scalar(0.2 + 0.05 * k)})};
  }));
  out.push_back(gradient_check("adversarial losses", n, [](std::uint64_t s) {
    return std::vector{check_gradients(
        "adversarial",
        [](const std::vector<Tensor>& in) {
          return ops::add(adversarial_d_loss(in[0], in[1]), adversarial_g_loss(in[1]));
        },
        {uniform_tensor({3, 1, 1, 1}, s, 0.05, 0.95), uniform_tensor({3, 1, 1, 1}, s + 1, 0.05, 0.95)})};
  }));
  out.push_back(gradient_check("perceptual loss", n, [](std::uint64_t s) {
    const FeatureExtractor fe(s);
    const Tensor hr = uniform_tensor({1, 3, 8, 8}, s + 3);
    return std::vector{check_gradients(
        "perceptual", [&](const std::vector<Tensor>& in) { return perceptual_loss(in[0], hr, fe); },
        {uniform_tensor({1, 3, 8, 8}, s)})};
  }));
  out.push_back(gradient_check("tv loss", n, [](std::uint64_t s) {
    return std::vector{check_gradients(
        "tv", [](const std::vector<Tensor>& in) { return tv_loss(in[0]); }, {random_tensor({1, 3, 4, 5}, s)})};
  }));
  out.push_back(gradient_check("mse loss", n, [](std::uint64_t s) {
    return std::vector{check_gradients(
        "mse", [](const std::vector<Tensor>& in) { return mse_loss(in[0], in[1]); },
        {random_tensor({1, 3, 4, 5}, s), random_tensor({1, 3, 4, 5}, s + 1)})};
  }));
  return out;
}

std::vector<SuiteCheck> network_gradients(int n) {
  std::vector<SuiteCheck> out;
  out.push_back(gradient_check("tiny generator end-to-end", n, [](std::uint64_t s) {
    GeneratorConfig c;
    c.scale = 2;
    c.n_sc_blocks = 1;
    c.base_channels = 8;
    c.pool_rate = 4;
    GeneratorParams g = init_generator(c, s);
    perturb(g.parameters(), s + 100, 0.05);
    const Tensor x = uniform_tensor({1, 3, 8, 8}, s);
    const Tensor probe = random_tensor({1, 3, 16, 16}, s + 1);
    auto loss = [&](const Tensor& in) { return ops::sum(ops::mul(generator_forward(in, g), probe)); };
    return std::vector{
        check_parameter_gradients("params", [&] { return loss(x); }, g.parameters(), {.max_coords = 60, .seed = s}),
        check_gradients("input", [&](const std::vector<Tensor>& in) { return loss(in[0]); }, {x})};
  }));
  out.push_back(gradient_check("tiny discriminator end-to-end", n, [](std::uint64_t s) {
    DiscriminatorConfig c;
    c.channels = {4, 8};
    DiscriminatorParams d = init_discriminator(c, s);
    perturb(d.parameters(), s + 100, 0.05);
    const Tensor x = uniform_tensor({2, 3, 16, 16}, s);
    auto loss = [&](const Tensor& in) { return ops::sum(discriminator_forward(in, d)); };
    return std::vector{check_parameter_gradients("params", [&] { return loss(x); }, d.parameters()),
                       check_gradients("input", [&](const std::vector<Tensor>& in) { return loss(in[0]); }, {x})};
  }));
  return out;
}

std::vector<SuiteCheck> tensor_oracles(int n) {
  std::vector<SuiteCheck> out;
  out.push_back(difference_check("conv2d vs loop oracle", n, kOracleTolerance, [](std::uint64_t s) {
    const Tensor x = random_tensor({2, 3, 7, 6}, s);
    const Tensor w = random_tensor({4, 3, 3, 3}, s + 1);
    const Tensor b = bias(4, s + 2);
    double worst = 0.0;
    for (int stride : {1, 2}) {
      for (int pad : {0, 1, 2}) {
        worst = std::max(worst, max_abs_diff(ops::conv2d(x, w, b, stride, pad), conv2d_loops(x, w, b, stride, pad)));
      }
    }
    return worst;
  }));
  out.push_back(difference_check("conv2d_transposed vs zero-stuffing oracle", n, kOracleTolerance, [](std::uint64_t s) {
    const Tensor x = random_tensor({2, 3, 4, 5}, s);
    const Tensor w = random_tensor({3, 2, 4, 4}, s + 50);
    const Tensor b = bias(2, s + 60);
    double worst = 0.0;
    for (int stride : {1, 2, 3}) {
      for (int pad : {0, 1}) {
        worst = std::max(worst, max_abs_diff(ops::conv2d_transposed(x, w, b, stride, pad),
                                             conv2d_transposed_stuffed(x, w, b, stride, pad)));
      }
    }
    return worst;
  }));
  out.push_back(difference_check("avg_pool2d vs loop oracle", n, kOracleTolerance, [](std::uint64_t s) {
    const Tensor x = random_tensor({2, 3, 8, 12}, s);
    double worst = 0.0;
    for (int r : {1, 2, 4}) worst = std::max(worst, max_abs_diff(ops::avg_pool2d(x, r), avg_pool_loops(x, r)));
    return worst;
  }));
  out.push_back(difference_check("upsample_bilinear vs scalar oracle", n, kOracleTolerance, [](std::uint64_t s) {
    const Tensor x = random_tensor({1, 2, 3, 5}, s);
    double worst = 0.0;
    for (int r : {1, 2, 3, 4}) {
      worst = std::max(worst, max_abs_diff(ops::upsample_bilinear(x, r), upsample_bilinear_loops(x, r)));
    }
    return worst;
  }));
  out.push_back(difference_check("conv/transposed adjoint identity", n, kAdjointTolerance, [](std::uint64_t s) {
    double worst = 0.0;
    for (int stride : {1, 2}) {
      const Tensor x = random_tensor({2, 3, 8, 8}, s);
      const Tensor w = random_tensor({4, 3, 4, 4}, s + 7);
      const Tensor cx = ops::conv2d(x, w, Tensor::zeros({1, 4, 1, 1}), stride, 1);
      const Tensor y = random_tensor(cx.shape(), s + 9);
      const Tensor ty = ops::conv2d_transposed(y, w, Tensor::zeros({1, 3, 1, 1}), stride, 1);
      worst = std::max(worst, std::abs(inner_product(cx, y) - inner_product(x, ty)));
    }
    return worst;
  }));
  return out;
}

std::vector<SuiteCheck> scconv_oracles(int n) {
  return {difference_check("sc_block vs straight-line oracle", n, kOracleTolerance, [](std::uint64_t s) {
    Rng rng(s);
    SCBlockParams p = make_sc_block("b", 4, 2, rng);
    perturb(p.parameters(), s + 1000, 0.1);
    const Tensor x = random_tensor({1, 4, 8, 8}, s + 1);
    return max_abs_diff(sc_block_forward(x, p), sc_block_loops(x, p));
  })};
}

void append(std::vector<SuiteCheck>& to, std::vector<SuiteCheck> from) {
  for (auto& c : from) to.push_back(std::move(c));
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.passed; });
}

std::string SuiteReport::to_text() const {
  std::string out;
  for (const auto& c : checks) {
    out += fmt::format("{} {:<42} cases {:>2}  worst {:.3e}  tol {:.0e}", c.passed ? "PASS" : "FAIL", c.name, c.cases,
                       c.worst, c.tolerance);
    if (!c.passed) out += "  (" + c.detail + ")";
    out += "\n";
  }
  return out;
}

std::vector<std::string> suite_modules() { return {"tensor", "scconv", "losses", "networks"}; }

SuiteReport run_gradient_suite(const std::string& module, int cases) {
  SuiteReport report{module, {}};
  if (module == "tensor") {
    report.checks = tensor_gradients(cases);
  } else if (module == "scconv") {
    report.checks = scconv_gradients(cases);
  } else if (module == "losses") {
    report.checks = loss_gradients(cases);
  } else if (module == "networks") {
    report.checks = network_gradients(cases);
  } else {
    throw InvalidArgument(fmt::format("unknown module '{}' (expected tensor, scconv, losses or networks)", module));
  }
  return report;
}

SuiteReport run_oracle_suite(int cases) {
  SuiteReport report{"oracles", tensor_oracles(cases)};
  append(report.checks, scconv_oracles(cases));
  return report;
}

SuiteReport run_suite(const std::string& module, int cases) {
  SuiteReport report = run_gradient_suite(module, cases);
  if (module == "tensor") append(report.checks, tensor_oracles(cases));
  if (module == "scconv") append(report.checks, scconv_oracles(cases));
  return report;
}

}  // namespace scsr::verify
