#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scsr/layers.hpp"
#include "scsr/tensor.hpp"

namespace scsr {

// ---------------------------------------------------------------------------
// Adaptive robust loss
//
//   f(x, alpha, c) = |alpha - 2| / alpha * (((x / c)^2 / |alpha - 2| + 1)^(alpha / 2) - 1)
//
// with the removable singularities replaced by their limits:
//   |alpha| < 1e-4      ->  log(0.5 (x/c)^2 + 1)
//   |alpha - 2| < 1e-4  ->  0.5 (x/c)^2

inline constexpr double kRobustBranchWidth = 1e-4;

/// Pointwise value.
double robust_loss_value(double x, double alpha, double c);

struct RobustLossGradient {
  double dx;
  double dalpha;
  double dc;
};

/// Pointwise partial derivatives. Inside the limit branches dalpha is 0.
RobustLossGradient robust_loss_gradient(double x, double alpha, double c);

/// Mean of f over the elements of `residual`; alpha and c are single-element
/// tensors and receive gradients.
Tensor robust_loss(const Tensor& residual, const Tensor& alpha, const Tensor& c);

/// Learnable shape and scale, stored unconstrained:
///   alpha = alpha_lo + (alpha_hi - alpha_lo) * sigmoid(alpha_raw)
///   c     = softplus(c_raw) + 1e-5
struct RobustLossParams {
  double alpha_lo = 0.001;
  double alpha_hi = 2.0;
  Parameter alpha_raw;
  Parameter c_raw;

  /// Starts at alpha = alpha_init and c = c_init.
  static RobustLossParams create(double alpha_init = 1.0, double c_init = 0.1, double alpha_lo = 0.001,
                                 double alpha_hi = 2.0);

  Tensor alpha() const;
  Tensor c() const;
  std::vector<Parameter*> parameters() { return {&alpha_raw, &c_raw}; }
  RobustLossParams clone() const;
};

Tensor robust_loss(const Tensor& residual, const RobustLossParams& params);

// ---------------------------------------------------------------------------
// Adversarial losses. Scores are clamped to [eps, 1 - eps]; the gradient is
// evaluated at the clamped value so it stays finite and keeps its sign.

inline constexpr double kScoreEpsilon = 1e-7;

/// mean(log(1 - D(G(lr)))), minimized by the generator.
Tensor adversarial_g_loss(const Tensor& d_fake);

/// -mean(log D(hr) + log(1 - D(G(lr)))), minimized by the discriminator.
Tensor adversarial_d_loss(const Tensor& d_real, const Tensor& d_fake);

// ---------------------------------------------------------------------------
// Perceptual loss

/// Frozen feature network: four 3x3 conv + ReLU stages with channels
/// 3 -> 16 -> 32 -> 64 -> 64 and a 2x average pool between stages. Weights are
/// drawn once from `seed` (or supplied externally) and never trained.
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5C5EED;
  static constexpr int kDefaultTap = 3;

  explicit FeatureExtractor(std::uint64_t seed = kDefaultSeed, int tap_layer = kDefaultTap);

  /// Replaces the weights with externally supplied ones of identical shapes.
  void load_weights(const std::vector<Conv2d>& layers);

  /// Activations after the ReLU of conv layer `tap_layer` (1-based).
  Tensor features(const Tensor& image) const;

  int tap_layer() const { return tap_layer_; }
  const std::vector<Conv2d>& layers() const { return layers_; }

 private:
  std::vector<Conv2d> layers_;
  int tap_layer_;
};

/// Mean squared difference of tap-layer feature maps.
Tensor perceptual_loss(const Tensor& sr, const Tensor& hr, const FeatureExtractor& extractor);

// ---------------------------------------------------------------------------

/// Anisotropic squared total variation: mean of squared vertical neighbour
/// differences plus mean of squared horizontal ones. A direction with no
/// neighbour pairs contributes nothing; a 1x1 image is rejected.
Tensor tv_loss(const Tensor& x);

/// Mean squared pixel error; the content term of the MSE ablation arm.
Tensor mse_loss(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------

struct LossWeights {
  double adversarial = 1e-3;
  double content = 1.0;  // robust (or MSE) pixel term
  double perceptual = 6e-3;
  double tv = 2e-8;

  void validate() const;
};

struct GeneratorLossParts {
  Tensor adversarial;
  Tensor content;
  Tensor perceptual;
  Tensor tv;
};

struct GeneratorLoss {
  Tensor total;
  double adversarial;
  double content;
  double perceptual;
  double tv;
};

/// Weighted sum of the four terms with a per-term breakdown. Throws
/// TrainingAbort naming the first non-finite term.
GeneratorLoss total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace scsr
