#include "scsr/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "scsr/errors.hpp"
#include "scsr/ops.hpp"

namespace scsr {

namespace {

using detail::Node;

Tensor make_scalar_result(const char* op, double value, std::initializer_list<Tensor> inputs,
                          std::function<void(Node&)> backward_fn) {
  if (!std::isfinite(value)) throw NumericError(fmt::format("{}: non-finite output", op));
  auto node = std::make_shared<Node>();
  node->shape = {1, 1, 1, 1};
  node->value = {value};
  node->op = op;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void check_scale(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument(fmt::format("robust loss scale c must be positive, got {}", c));
}

double clamp_score(double d) { return std::clamp(d, kScoreEpsilon, 1.0 - kScoreEpsilon); }

}  // namespace

double robust_loss_value(double x, double alpha, double c) {
  check_scale(c);
  const double z = (x / c) * (x / c);
  if (std::abs(alpha) < kRobustBranchWidth) return std::log1p(0.5 * z);
  if (std::abs(alpha - 2.0) < kRobustBranchWidth) return 0.5 * z;
  const double b = std::abs(alpha - 2.0);
  return (b / alpha) * std::expm1(0.5 * alpha * std::log1p(z / b));
}

RobustLossGradient robust_loss_gradient(double x, double alpha, double c) {
  check_scale(c);
  const double z = (x / c) * (x / c);
  if (std::abs(alpha) < kRobustBranchWidth) {
    const double d = 1.0 / (0.5 * z + 1.0);
    return {d * x / (c * c), 0.0, -d * z / c};
  }
  if (std::abs(alpha - 2.0) < kRobustBranchWidth) return {x / (c * c), 0.0, -z / c};

  const double b = std::abs(alpha - 2.0);
  const double db = alpha > 2.0 ? 1.0 : -1.0;
  const double log_u = std::log1p(z / b);
  const double u = 1.0 + z / b;
  const double u_pow = std::exp(0.5 * alpha * log_u);          // u^(alpha/2)
  const double u_pow_m1 = std::exp((0.5 * alpha - 1.0) * log_u);  // u^(alpha/2 - 1)

  // df/dz = u^(alpha/2 - 1) / 2
  const double df_dz = 0.5 * u_pow_m1;
  const double dx = df_dz * 2.0 * x / (c * c);
  const double dc = -df_dz * 2.0 * z / c;

  const double ratio = b / alpha;
  const double dratio = (db * alpha - b) / (alpha * alpha);
  const double du = -z * db / (b * b);
  const double dpow = u_pow * (0.5 * log_u + 0.5 * alpha * du / u);
  const double dalpha = dratio * std::expm1(0.5 * alpha * log_u) + ratio * dpow;
  return {dx, dalpha, dc};
}

Tensor robust_loss(const Tensor& residual, const Tensor& alpha, const Tensor& c) {
  if (!residual.defined() || residual.size() == 0) throw DimensionError("robust_loss: empty residual");
  if (alpha.size() != 1 || c.size() != 1) throw DimensionError("robust_loss: alpha and c must be single values");
  const double a = alpha.item();
  const double scale = c.item();
  check_scale(scale);
  double acc = 0.0;
  for (double x : residual.data()) acc += robust_loss_value(x, a, scale);
  const double inv = 1.0 / static_cast<double>(residual.size());
  return make_scalar_result("robust_loss", acc * inv, {residual, alpha, c}, [a, scale, inv](Node& self) {
    Node& px = *self.parents[0];
    Node& pa = *self.parents[1];
    Node& pc = *self.parents[2];
    const double g = self.grad[0] * inv;
    double da = 0.0;
    double dc = 0.0;
    for (std::size_t i = 0; i < px.value.size(); ++i) {
      const RobustLossGradient d = robust_loss_gradient(px.value[i], a, scale);
      if (px.requires_grad) px.grad[i] += g * d.dx;
      da += d.dalpha;
      dc += d.dc;
    }
    if (pa.requires_grad) pa.grad[0] += g * da;
    if (pc.requires_grad) pc.grad[0] += g * dc;
  });
}

RobustLossParams RobustLossParams::create(double alpha_init, double c_init, double alpha_lo, double alpha_hi) {
  if (!(alpha_lo < alpha_hi) || alpha_lo < 0.0) throw InvalidArgument("robust loss alpha range must satisfy 0 <= lo < hi");
  if (!(alpha_init > alpha_lo && alpha_init < alpha_hi)) {
    throw InvalidArgument(fmt::format("alpha init {} outside ({}, {})", alpha_init, alpha_lo, alpha_hi));
  }
  if (!(c_init > 1e-5)) throw InvalidArgument(fmt::format("c init {} must exceed 1e-5", c_init));
  const double t = (alpha_init - alpha_lo) / (alpha_hi - alpha_lo);
  const double alpha_raw = std::log(t / (1.0 - t));
  const double c_raw = std::log(std::expm1(c_init - 1e-5));
  RobustLossParams p;
  p.alpha_lo = alpha_lo;
  p.alpha_hi = alpha_hi;
  p.alpha_raw = Parameter("robust.alpha_raw", Tensor::scalar(alpha_raw));
  p.c_raw = Parameter("robust.c_raw", Tensor::scalar(c_raw));
  return p;
}

Tensor RobustLossParams::alpha() const {
  return ops::add_scalar(ops::scale(ops::sigmoid(alpha_raw.value()), alpha_hi - alpha_lo), alpha_lo);
}

Tensor RobustLossParams::c() const { return ops::add_scalar(ops::softplus(c_raw.value()), 1e-5); }

RobustLossParams RobustLossParams::clone() const {
  RobustLossParams p = *this;
  p.alpha_raw = alpha_raw.clone();
  p.c_raw = c_raw.clone();
  return p;
}

Tensor robust_loss(const Tensor& residual, const RobustLossParams& params) {
  return robust_loss(residual, params.alpha(), params.c());
}

Tensor adversarial_g_loss(const Tensor& d_fake) {
  if (!d_fake.defined() || d_fake.size() == 0) throw DimensionError("adversarial_g_loss: empty scores");
  double acc = 0.0;
  for (double d : d_fake.data()) acc += std::log1p(-clamp_score(d));
  const double inv = 1.0 / static_cast<double>(d_fake.size());
  return make_scalar_result("adversarial_g_loss", acc * inv, {d_fake}, [inv](Node& self) {
    Node& p = *self.parents[0];
    const double g = self.grad[0] * inv;
    for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] -= g / (1.0 - clamp_score(p.value[i]));
  });
}

Tensor adversarial_d_loss(const Tensor& d_real, const Tensor& d_fake) {
  if (!d_real.defined() || !d_fake.defined() || d_real.size() == 0 || d_fake.size() == 0) {
    throw DimensionError("adversarial_d_loss: empty scores");
  }
  double real_acc = 0.0;
  for (double d : d_real.data()) real_acc += std::log(clamp_score(d));
  double fake_acc = 0.0;
  for (double d : d_fake.data()) fake_acc += std::log1p(-clamp_score(d));
  const double inv_real = 1.0 / static_cast<double>(d_real.size());
  const double inv_fake = 1.0 / static_cast<double>(d_fake.size());
  const double value = -(real_acc * inv_real + fake_acc * inv_fake);
  return make_scalar_result("adversarial_d_loss", value, {d_real, d_fake}, [inv_real, inv_fake](Node& self) {
    Node& pr = *self.parents[0];
    Node& pf = *self.parents[1];
    const double g = self.grad[0];
    if (pr.requires_grad) {
      for (std::size_t i = 0; i < pr.value.size(); ++i) pr.grad[i] -= g * inv_real / clamp_score(pr.value[i]);
    }
    if (pf.requires_grad) {
      for (std::size_t i = 0; i < pf.value.size(); ++i) pf.grad[i] += g * inv_fake / (1.0 - clamp_score(pf.value[i]));
    }
  });
}

FeatureExtractor::FeatureExtractor(std::uint64_t seed, int tap_layer) : tap_layer_(tap_layer) {
  if (tap_layer < 1 || tap_layer > 4) throw InvalidArgument(fmt::format("feature tap layer must be in 1..4, got {}", tap_layer));
  Rng rng(seed);
  const int channels[] = {3, 16, 32, 64, 64};
  for (int i = 0; i < 4; ++i) {
    layers_.push_back(make_conv2d(fmt::format("features.conv{}", i + 1), channels[i], channels[i + 1], 3, 1, 1, rng,
                                  /*learnable=*/false));
  }
}

void FeatureExtractor::load_weights(const std::vector<Conv2d>& layers) {
  if (layers.size() != layers_.size()) throw DimensionError("feature extractor: layer count mismatch");
  std::vector<Conv2d> frozen;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!(layers[i].weight.shape() == layers_[i].weight.shape()) || !(layers[i].bias.shape() == layers_[i].bias.shape())) {
      throw DimensionError(fmt::format("feature extractor: layer {} shape mismatch", i + 1));
    }
    frozen.push_back(Conv2d{Parameter(layers_[i].weight.name(), layers[i].weight.value(), false),
                            Parameter(layers_[i].bias.name(), layers[i].bias.value(), false), 1, 1});
  }
  layers_ = std::move(frozen);
}

Tensor FeatureExtractor::features(const Tensor& image) const {
  Tensor x = image;
  for (int i = 0; i < tap_layer_; ++i) {
    if (i > 0) x = ops::avg_pool2d(x, 2);
    x = ops::relu(layers_[i](x));
  }
  return x;
}

Tensor perceptual_loss(const Tensor& sr, const Tensor& hr, const FeatureExtractor& extractor) {
  if (!(sr.shape() == hr.shape())) {
    throw DimensionError(fmt::format("perceptual_loss: shape mismatch {} vs {}", sr.shape().str(), hr.shape().str()));
  }
  return ops::mean(ops::square(ops::sub(extractor.features(sr), extractor.features(hr))));
}

Tensor tv_loss(const Tensor& x) {
  const Shape s = x.shape();
  if (s.size() == 0 || (s.h < 2 && s.w < 2)) throw DimensionError(fmt::format("tv_loss: degenerate extent {}", s.str()));
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const double n_vertical = static_cast<double>(planes) * (s.h - 1) * s.w;
  const double n_horizontal = static_cast<double>(planes) * s.h * (s.w - 1);
  const double inv_v = n_vertical > 0 ? 1.0 / n_vertical : 0.0;
  const double inv_h = n_horizontal > 0 ? 1.0 / n_horizontal : 0.0;
  auto v = x.data();
  double acc_v = 0.0;
  double acc_h = 0.0;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* img = v.data() + p * s.plane();
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        const double here = img[i * s.w + j];
        if (i + 1 < s.h) acc_v += (img[(i + 1) * s.w + j] - here) * (img[(i + 1) * s.w + j] - here);
        if (j + 1 < s.w) acc_h += (img[i * s.w + j + 1] - here) * (img[i * s.w + j + 1] - here);
      }
    }
  }
  return make_scalar_result("tv_loss", acc_v * inv_v + acc_h * inv_h, {x}, [s, planes, inv_v, inv_h](Node& self) {
    Node& px = *self.parents[0];
    const double g = self.grad[0];
    for (std::size_t p = 0; p < planes; ++p) {
      const double* img = px.value.data() + p * s.plane();
      double* grad = px.grad.data() + p * s.plane();
      for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
          const double here = img[i * s.w + j];
          if (i + 1 < s.h) {
            const double d = 2.0 * g * inv_v * (img[(i + 1) * s.w + j] - here);
            grad[(i + 1) * s.w + j] += d;
            grad[i * s.w + j] -= d;
          }
          if (j + 1 < s.w) {
            const double d = 2.0 * g * inv_h * (img[i * s.w + j + 1] - here);
            grad[i * s.w + j + 1] += d;
            grad[i * s.w + j] -= d;
          }
        }
      }
    }
  });
}

Tensor mse_loss(const Tensor& a, const Tensor& b) { return ops::mean(ops::square(ops::sub(a, b))); }

void LossWeights::validate() const {
  for (double w : {adversarial, content, perceptual, tv}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("loss weights must be finite and non-negative");
  }
}

GeneratorLoss total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights) {
  weights.validate();
  const std::pair<const char*, const Tensor*> terms[] = {
      {"adversarial", &parts.adversarial}, {"content", &parts.content}, {"perceptual", &parts.perceptual}, {"tv", &parts.tv}};
  for (const auto& [name, t] : terms) {
    if (!t->defined() || t->size() != 1) throw DimensionError(fmt::format("generator loss term '{}' must be a scalar", name));
    if (!std::isfinite(t->item())) throw TrainingAbort(name, fmt::format("non-finite generator loss term '{}'", name));
  }
  Tensor total = ops::add(ops::add(ops::scale(parts.adversarial, weights.adversarial), ops::scale(parts.content, weights.content)),
                          ops::add(ops::scale(parts.perceptual, weights.perceptual), ops::scale(parts.tv, weights.tv)));
  return {total, parts.adversarial.item(), parts.content.item(), parts.perceptual.item(), parts.tv.item()};
}

}  // namespace scsr
