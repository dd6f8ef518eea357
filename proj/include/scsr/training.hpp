#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scsr/config.hpp"
#include "scsr/image.hpp"
#include "scsr/losses.hpp"
#include "scsr/metrics.hpp"
#include "scsr/networks.hpp"
#include "scsr/rng.hpp"

namespace scsr {

// ---------------------------------------------------------------------------
// RMSprop

/// s <- decay * s + (1 - decay) * g^2;  p <- p - lr * g / (sqrt(s) + eps)
void rmsprop_step(std::span<double> params, std::span<const double> grads, std::span<double> state, double lr,
                  double decay, double eps);

class RmsProp {
 public:
  RmsProp(std::vector<Parameter*> params, double decay, double eps);

  void step(double lr);
  void zero_grad();
  const std::vector<std::vector<double>>& state() const { return state_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> state_;
  double decay_;
  double eps_;
};

// ---------------------------------------------------------------------------

enum class ContentLoss { Robust, Mse };

std::string to_string(ContentLoss loss);
ContentLoss parse_content_loss(const std::string& text);

struct TrainConfig {
  int scale = 4;
  int batch_size = 8;  // reference setting 64
  int crop_size = 128;
  int epochs = 1;
  int max_iterations = 0;  // 0 = no cap
  double lr_initial = 5e-4;
  double lr_after = 1e-4;
  int switch_epoch = 20;
  double rmsprop_decay = 0.9;
  double rmsprop_eps = 1e-8;
  std::uint64_t seed = 1;
  LossWeights weights;
  ContentLoss content_loss = ContentLoss::Robust;
  double alpha_init = 1.0;
  double c_init = 0.1;
  double alpha_lo = 0.001;
  double alpha_hi = 2.0;
  std::uint64_t feature_seed = FeatureExtractor::kDefaultSeed;
  int feature_tap = FeatureExtractor::kDefaultTap;
  int checkpoint_every = 1;  // epochs; 0 disables intermediate checkpoints
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  void validate() const;

  /// Tiny CPU configuration: x2, 32 px crops, 2 SC blocks of 16 channels,
  /// a three-layer discriminator and a 200-iteration cap.
  static TrainConfig desk();

  /// Flat key/value form. `from_map` starts from defaults, overrides the keys
  /// present and rejects unknown keys.
  ConfigMap to_map() const;
  static TrainConfig from_map(const ConfigMap& map);
  static std::vector<std::string> known_keys();

  /// Lines describing where this config departs from the reference training
  /// setup (batch 64, crop 128, generator kernels 3x3).
  std::vector<std::string> reference_divergences() const;
};

/// lr_initial before switch_epoch, lr_after from then on.
double lr_schedule(int epoch, const TrainConfig& config);

struct TrainLogRow {
  long iteration = 0;
  int epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double adversarial = 0.0;
  double content = 0.0;
  double perceptual = 0.0;
  double tv = 0.0;
  double lr = 0.0;
  double alpha = 0.0;
  double c = 0.0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;

  /// Deterministic columns only; timing goes to `timing_csv`.
  std::string to_csv() const;
  std::string timing_csv() const;
};

struct Batch {
  std::vector<Image> lr;
  std::vector<Image> hr;
};

struct GeneratorStep {
  double total = 0.0;
  double adversarial = 0.0;
  double content = 0.0;
  double perceptual = 0.0;
  double tv = 0.0;
};

/// Alternating discriminator/generator optimization over a corpus of images.
/// All randomness (init, crops, batch order) derives from config.seed.
class Trainer {
 public:
  Trainer(TrainConfig config, std::vector<Image> corpus);
  // The optimizers hold pointers into the parameter members.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// Next seeded batch of random crops and their bicubic LR versions.
  Batch next_batch();

  /// G(lr) with the graph recorded, so it can feed generator_update.
  Tensor forward_generator(const Batch& batch);

  /// One discriminator update on real HR crops vs. the detached fake images.
  double discriminator_update(const Tensor& hr, const Tensor& sr_detached);

  /// One generator update through `sr` (which must come from forward_generator).
  GeneratorStep generator_update(const Tensor& sr, const Tensor& hr);

  /// D update then G update on the next batch; appends and returns a log row.
  TrainLogRow iterate();

  /// Runs until the configured epochs (or max_iterations) are done. When
  /// out_dir is non-empty, writes checkpoints, train_log.csv, timing and the
  /// run header there.
  void run(const std::filesystem::path& out_dir = {});

  const TrainConfig& config() const { return config_; }
  GeneratorParams& generator() { return generator_; }
  DiscriminatorParams& discriminator() { return discriminator_; }
  RobustLossParams& robust() { return robust_; }
  const TrainLog& log() const { return log_; }
  long iteration() const { return iteration_; }
  int epoch() const { return epoch_; }
  int batches_per_epoch() const;

  /// Text dump of the resolved config plus reference divergences.
  std::string run_header() const;

 private:
  void start_epoch();
  void write_checkpoints(const std::filesystem::path& out_dir, const std::string& suffix) const;

  TrainConfig config_;
  std::vector<Image> corpus_;
  GeneratorParams generator_;
  DiscriminatorParams discriminator_;
  RobustLossParams robust_;
  FeatureExtractor extractor_;
  RmsProp g_optimizer_;
  RmsProp d_optimizer_;
  Rng rng_;
  TrainLog log_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  long iteration_ = 0;
  int epoch_ = -1;
  int batch_in_epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Inference helpers

/// G applied to one image; dims must be divisible by the pool rate.
Image super_resolve(const GeneratorParams& g, const Image& lr);

/// As super_resolve, but reflect-pads the input up to a multiple of the pool
/// rate and crops the result back to scale x the original size.
Image super_resolve_padded(const GeneratorParams& g, const Image& lr);

/// Evaluation pair from a full image: HR cropped to a multiple of `multiple`
/// (which must itself be a multiple of scale), LR = bicubic downscale.
ImagePair make_eval_pair(const Image& image, int scale, int multiple);

struct EvalSet {
  std::string name;
  std::vector<ImagePair> pairs;
};

struct QualityScore {
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Mean PSNR/SSIM of G over the pairs (RGB, Gaussian SSIM unless overridden).
QualityScore evaluate_generator(const GeneratorParams& g, std::span<const ImagePair> pairs,
                                const MetricOptions& options = {});

// ---------------------------------------------------------------------------
// Content-loss ablation

struct AblationArmResult {
  std::string label;
  ContentLoss loss = ContentLoss::Robust;
  std::vector<QualityScore> scores;  // one per evaluation set; empty when aborted
  bool completed = false;
  std::string abort_reason;
};

struct AblationReport {
  int scale = 0;
  std::vector<std::string> datasets;
  std::vector<AblationArmResult> arms;

  /// Loss x dataset table with PSNR/SSIM cells.
  std::string to_table() const;
  std::string to_csv() const;
};

std::string content_loss_label(ContentLoss loss);

/// Trains one arm per entry of `arms` from identical seeds and data order;
/// configs differ only in the content-loss flag.
AblationReport ablation_run(const TrainConfig& base, const std::vector<Image>& corpus, std::span<const EvalSet> sets,
                            std::vector<ContentLoss> arms = {ContentLoss::Robust, ContentLoss::Mse});

}  // namespace scsr
