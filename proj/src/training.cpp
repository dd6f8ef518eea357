#include "scsr/training.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "scsr/errors.hpp"
#include "scsr/ops.hpp"

namespace scsr {

void rmsprop_step(std::span<double> params, std::span<const double> grads, std::span<double> state, double lr,
                  double decay, double eps) {
  if (params.size() != grads.size() || params.size() != state.size()) {
    throw DimensionError(fmt::format("rmsprop_step: sizes differ (params {}, grads {}, state {})", params.size(),
                                     grads.size(), state.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state[i] = decay * state[i] + (1.0 - decay) * g * g;
    // A zero gradient moves nothing; skipping it also avoids 0/0 when eps = 0.
    if (g != 0.0) params[i] -= lr * g / (std::sqrt(state[i]) + eps);
  }
}

RmsProp::RmsProp(std::vector<Parameter*> params, double decay, double eps)
    : params_(std::move(params)), decay_(decay), eps_(eps) {
  if (!(decay > 0.0 && decay < 1.0)) throw InvalidArgument(fmt::format("rmsprop decay must be in (0, 1), got {}", decay));
  if (!(eps >= 0.0)) throw InvalidArgument("rmsprop eps must be non-negative");
  state_.reserve(params_.size());
  for (const Parameter* p : params_) state_.emplace_back(p->shape().size(), 0.0);
}

void RmsProp::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    rmsprop_step(params_[i]->mutable_data(), params_[i]->grad(), state_[i], lr, decay_, eps_);
  }
}

void RmsProp::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

// ---------------------------------------------------------------------------

std::string to_string(ContentLoss loss) { return loss == ContentLoss::Robust ? "robust" : "mse"; }

ContentLoss parse_content_loss(const std::string& text) {
  if (text == "robust") return ContentLoss::Robust;
  if (text == "mse") return ContentLoss::Mse;
  throw ConfigError(fmt::format("content_loss must be 'robust' or 'mse', got '{}'", text));
}

std::string content_loss_label(ContentLoss loss) {
  return loss == ContentLoss::Robust ? "Adaptive robust loss" : "MSE";
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.scale = 2;
  c.generator.scale = 2;
  c.crop_size = 32;
  c.batch_size = 8;
  c.epochs = 0;
  c.max_iterations = 200;
  c.checkpoint_every = 0;
  c.generator.n_sc_blocks = 2;
  c.generator.base_channels = 16;
  c.generator.pool_rate = 4;
  c.discriminator.channels = {16, 32, 64};
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(lr_initial > 0.0) || !(lr_after > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) throw InvalidArgument("rmsprop_decay must be in (0, 1)");
  if (!(rmsprop_eps >= 0.0)) throw InvalidArgument("rmsprop_eps must be non-negative");
  if (epochs < 0 || max_iterations < 0) throw InvalidArgument("epochs and max_iterations must be non-negative");
  if (epochs == 0 && max_iterations == 0) throw InvalidArgument("nothing to train: epochs and max_iterations are 0");
  if (switch_epoch < 0) throw InvalidArgument("switch_epoch must be non-negative");
  if (checkpoint_every < 0) throw InvalidArgument("checkpoint_every must be non-negative");
  if (generator.scale != scale) {
    throw InvalidArgument(fmt::format("generator scale {} differs from training scale {}", generator.scale, scale));
  }
  PairSpec{scale, crop_size, 0}.validate();
  if ((crop_size / scale) % generator.pool_rate != 0) {
    throw InvalidArgument(fmt::format("LR crop {} must be divisible by pool_rate {}", crop_size / scale,
                                      generator.pool_rate));
  }
  if (crop_size < discriminator.min_input_size()) {
    throw InvalidArgument(fmt::format("crop_size {} below discriminator minimum {}", crop_size,
                                      discriminator.min_input_size()));
  }
  if (!(alpha_lo < alpha_hi) || !(alpha_init > alpha_lo && alpha_init < alpha_hi)) {
    throw InvalidArgument("alpha_init must lie strictly inside (alpha_lo, alpha_hi)");
  }
  if (!(c_init > 1e-5)) throw InvalidArgument("c_init must exceed 1e-5");
  weights.validate();
  generator.validate();
  discriminator.validate();
}

namespace {

struct KeyBinding {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  ConfigMap one{{key, value}};
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<T>(config_double(one, key));
  } else {
    return static_cast<T>(config_int(one, key));
  }
}

#define SCSR_INT_KEY(name, field)                                                       \
  {                                                                                     \
    name, {                                                                             \
      [](const TrainConfig& c) { return std::to_string(c.field); },                     \
          [](TrainConfig& c, const std::string& v) {                                    \
            c.field = parse_number<decltype(c.field)>(name, v);                         \
          }                                                                             \
    }                                                                                   \
  }
#define SCSR_DOUBLE_KEY(name, field)                                                    \
  {                                                                                     \
    name, {                                                                             \
      [](const TrainConfig& c) { return format_double(c.field); },                      \
          [](TrainConfig& c, const std::string& v) { c.field = parse_number<double>(name, v); } \
    }                                                                                   \
  }

const std::map<std::string, KeyBinding>& bindings() {
  static const std::map<std::string, KeyBinding> table = {
      {"scale",
       {[](const TrainConfig& c) { return std::to_string(c.scale); },
        [](TrainConfig& c, const std::string& v) {
          c.scale = parse_number<int>("scale", v);
          c.generator.scale = c.scale;
        }}},
      SCSR_INT_KEY("batch_size", batch_size),
      SCSR_INT_KEY("crop_size", crop_size),
      SCSR_INT_KEY("epochs", epochs),
      SCSR_INT_KEY("max_iterations", max_iterations),
      SCSR_DOUBLE_KEY("lr_initial", lr_initial),
      SCSR_DOUBLE_KEY("lr_after", lr_after),
      SCSR_INT_KEY("switch_epoch", switch_epoch),
      SCSR_DOUBLE_KEY("rmsprop_decay", rmsprop_decay),
      SCSR_DOUBLE_KEY("rmsprop_eps", rmsprop_eps),
      SCSR_INT_KEY("seed", seed),
      SCSR_DOUBLE_KEY("weight.adversarial", weights.adversarial),
      SCSR_DOUBLE_KEY("weight.content", weights.content),
      SCSR_DOUBLE_KEY("weight.perceptual", weights.perceptual),
      SCSR_DOUBLE_KEY("weight.tv", weights.tv),
      {"content_loss",
       {[](const TrainConfig& c) { return to_string(c.content_loss); },
        [](TrainConfig& c, const std::string& v) { c.content_loss = parse_content_loss(v); }}},
      SCSR_DOUBLE_KEY("robust.alpha_init", alpha_init),
      SCSR_DOUBLE_KEY("robust.c_init", c_init),
      SCSR_DOUBLE_KEY("robust.alpha_lo", alpha_lo),
      SCSR_DOUBLE_KEY("robust.alpha_hi", alpha_hi),
      SCSR_INT_KEY("perceptual.seed", feature_seed),
      SCSR_INT_KEY("perceptual.tap", feature_tap),
      SCSR_INT_KEY("checkpoint_every", checkpoint_every),
      SCSR_INT_KEY("generator.n_sc_blocks", generator.n_sc_blocks),
      SCSR_INT_KEY("generator.base_channels", generator.base_channels),
      SCSR_INT_KEY("generator.pool_rate", generator.pool_rate),
      SCSR_INT_KEY("generator.head_kernel", generator.head_kernel),
      SCSR_INT_KEY("generator.tail_kernel", generator.tail_kernel),
      {"discriminator.channels",
       {[](const TrainConfig& c) { return c.discriminator.to_map().at("channels"); },
        [](TrainConfig& c, const std::string& v) {
          ConfigMap m = c.discriminator.to_map();
          m["channels"] = v;
          c.discriminator = DiscriminatorConfig::from_map(m);
        }}},
      SCSR_INT_KEY("discriminator.kernel", discriminator.kernel),
      SCSR_INT_KEY("discriminator.padding", discriminator.padding),
      SCSR_DOUBLE_KEY("discriminator.leaky_slope", discriminator.leaky_slope),
  };
  return table;
}

#undef SCSR_INT_KEY
#undef SCSR_DOUBLE_KEY

}  // namespace

ConfigMap TrainConfig::to_map() const {
  ConfigMap out;
  for (const auto& [key, binding] : bindings()) out[key] = binding.get(*this);
  return out;
}

TrainConfig TrainConfig::from_map(const ConfigMap& map) {
  TrainConfig config;
  const auto& table = bindings();
  std::vector<std::string> unknown;
  for (const auto& [key, value] : map) {
    auto it = table.find(key);
    if (it == table.end()) {
      unknown.push_back(key);
      continue;
    }
    it->second.set(config, value);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError(fmt::format("unknown config key(s): {}", list));
  }
  return config;
}

std::vector<std::string> TrainConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, binding] : bindings()) keys.push_back(key);
  return keys;
}

std::vector<std::string> TrainConfig::reference_divergences() const {
  std::vector<std::string> out;
  if (batch_size != 64) out.push_back(fmt::format("batch_size {} (reference 64)", batch_size));
  if (crop_size != 128) out.push_back(fmt::format("crop_size {} (reference 128)", crop_size));
  if (lr_initial != 5e-4) out.push_back(fmt::format("lr_initial {} (reference 0.0005)", format_double(lr_initial)));
  if (lr_after != 1e-4) out.push_back(fmt::format("lr_after {} (reference 0.0001)", format_double(lr_after)));
  if (switch_epoch != 20) out.push_back(fmt::format("switch_epoch {} (reference 20)", switch_epoch));
  if (rmsprop_decay != 0.9) out.push_back(fmt::format("rmsprop_decay {} (reference 0.9)", format_double(rmsprop_decay)));
  if (content_loss != ContentLoss::Robust) out.push_back("content_loss mse (reference: adaptive robust loss)");
  if (generator.head_kernel != 3 || generator.tail_kernel != 3) out.push_back("generator head/tail kernels differ from 3x3");
  out.push_back("perceptual features from a frozen seeded extractor instead of pretrained VGG weights");
  return out;
}

double lr_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw InvalidArgument("lr_schedule: epoch must be non-negative");
  return epoch < config.switch_epoch ? config.lr_initial : config.lr_after;
}

// ---------------------------------------------------------------------------

std::string TrainLog::to_csv() const {
  std::string out = "iter,epoch,d_loss,g_loss,adversarial,content,perceptual,tv,lr,alpha,c\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.iteration, r.epoch, format_double(r.d_loss),
                       format_double(r.g_loss), format_double(r.adversarial), format_double(r.content),
                       format_double(r.perceptual), format_double(r.tv), format_double(r.lr), format_double(r.alpha),
                       format_double(r.c));
  }
  return out;
}

std::string TrainLog::timing_csv() const {
  std::string out = "iter,wall_ms\n";
  for (const auto& r : rows) out += fmt::format("{},{:.3f}\n", r.iteration, r.wall_ms);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Parameter*> generator_side(GeneratorParams& g, RobustLossParams& robust, ContentLoss loss) {
  auto params = g.parameters();
  if (loss == ContentLoss::Robust) {
    for (Parameter* p : robust.parameters()) params.push_back(p);
  }
  return params;
}

void check_finite(const std::string& term, double value) {
  if (!std::isfinite(value)) throw TrainingAbort(term, fmt::format("training aborted: {} is {}", term, value));
}

template <typename F>
auto guarded(const std::string& term, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw TrainingAbort(term, fmt::format("training aborted in {}: {}", term, e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

}  // namespace

Trainer::Trainer(TrainConfig config, std::vector<Image> corpus)
    : config_((config.validate(), std::move(config))),
      corpus_(std::move(corpus)),
      generator_(init_generator(config_.generator, Rng(config_.seed).fork())),
      discriminator_(init_discriminator(config_.discriminator, Rng(config_.seed ^ 0xD15C).fork())),
      robust_(RobustLossParams::create(config_.alpha_init, config_.c_init, config_.alpha_lo, config_.alpha_hi)),
      extractor_(config_.feature_seed, config_.feature_tap),
      g_optimizer_(generator_side(generator_, robust_, config_.content_loss), config_.rmsprop_decay,
                   config_.rmsprop_eps),
      d_optimizer_(discriminator_.parameters(), config_.rmsprop_decay, config_.rmsprop_eps),
      rng_(config_.seed ^ 0xBA7C4ULL) {
  if (corpus_.empty()) throw InvalidArgument("training corpus is empty");
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    if (corpus_[i].width() < config_.crop_size || corpus_[i].height() < config_.crop_size) {
      throw InvalidArgument(fmt::format("corpus image {} is {}x{}, smaller than crop {}", i, corpus_[i].width(),
                                        corpus_[i].height(), config_.crop_size));
    }
  }
}

int Trainer::batches_per_epoch() const {
  const std::size_t per = std::min<std::size_t>(config_.batch_size, corpus_.size());
  return static_cast<int>(std::max<std::size_t>(1, corpus_.size() / per));
}

void Trainer::start_epoch() {
  ++epoch_;
  batch_in_epoch_ = 0;
  cursor_ = 0;
  order_.resize(corpus_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng shuffle(rng_.fork());
  for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[shuffle.below(i)]);
}

Batch Trainer::next_batch() {
  if (epoch_ < 0 || batch_in_epoch_ >= batches_per_epoch()) start_epoch();
  const std::size_t per = std::min<std::size_t>(config_.batch_size, corpus_.size());
  Batch batch;
  for (std::size_t k = 0; k < per; ++k) {
    const Image& source = corpus_[order_[cursor_++]];
    ImagePair pair = make_pair(source, PairSpec{config_.scale, config_.crop_size, rng_.fork()});
    batch.lr.push_back(std::move(pair.lr));
    batch.hr.push_back(std::move(pair.hr));
  }
  ++batch_in_epoch_;
  return batch;
}

Tensor Trainer::forward_generator(const Batch& batch) {
  const Tensor lr = to_tensor(batch.lr);
  return guarded("generator_forward", [&] { return generator_forward(lr, generator_); });
}

double Trainer::discriminator_update(const Tensor& hr, const Tensor& sr_detached) {
  d_optimizer_.zero_grad();
  const Tensor loss = guarded("d_loss", [&] {
    const Tensor real = discriminator_forward(hr, discriminator_);
    const Tensor fake = discriminator_forward(sr_detached, discriminator_);
    Tensor l = adversarial_d_loss(real, fake);
    backward(l);
    return l;
  });
  const double value = loss.item();
  check_finite("d_loss", value);
  d_optimizer_.step(lr_schedule(std::max(epoch_, 0), config_));
  return value;
}

GeneratorStep Trainer::generator_update(const Tensor& sr, const Tensor& hr) {
  g_optimizer_.zero_grad();
  GeneratorLossParts parts;
  parts.adversarial =
      guarded("adversarial", [&] { return adversarial_g_loss(discriminator_forward(sr, discriminator_)); });
  parts.content = guarded("content", [&] {
    return config_.content_loss == ContentLoss::Robust ? robust_loss(ops::sub(sr, hr), robust_) : mse_loss(sr, hr);
  });
  parts.perceptual = guarded("perceptual", [&] { return perceptual_loss(sr, hr, extractor_); });
  parts.tv = guarded("tv", [&] { return tv_loss(sr); });
  const GeneratorLoss loss = total_generator_loss(parts, config_.weights);
  guarded("g_loss", [&] {
    backward(loss.total);
    return 0;
  });
  g_optimizer_.step(lr_schedule(std::max(epoch_, 0), config_));
  // The discriminator only received gradients as a by-product; drop them, and
  // leave G clean so the next D step starts from zero on both sides.
  d_optimizer_.zero_grad();
  g_optimizer_.zero_grad();
  return {loss.total.item(), loss.adversarial, loss.content, loss.perceptual, loss.tv};
}

TrainLogRow Trainer::iterate() {
  const auto start = std::chrono::steady_clock::now();
  const Batch batch = next_batch();
  const Tensor hr = to_tensor(batch.hr);
  const Tensor sr = forward_generator(batch);

  TrainLogRow row;
  row.iteration = iteration_;
  row.epoch = epoch_;
  row.lr = lr_schedule(epoch_, config_);
  row.d_loss = discriminator_update(hr, sr.detach());
  const GeneratorStep g = generator_update(sr, hr);
  row.g_loss = g.total;
  row.adversarial = g.adversarial;
  row.content = g.content;
  row.perceptual = g.perceptual;
  row.tv = g.tv;
  row.alpha = robust_.alpha().item();
  row.c = robust_.c().item();
  for (double v : {row.d_loss, row.g_loss, row.adversarial, row.content, row.perceptual, row.tv, row.alpha, row.c}) {
    check_finite("log row", v);
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  log_.rows.push_back(row);
  ++iteration_;
  return row;
}

std::string Trainer::run_header() const {
  std::string out = "# resolved training config\n";
  out += format_config(config_.to_map());
  out += fmt::format("# corpus images: {}, batches per epoch: {}\n", corpus_.size(), batches_per_epoch());
  out += "# departures from the reference training setup\n";
  for (const auto& line : config_.reference_divergences()) out += "#   " + line + "\n";
  return out;
}

void Trainer::write_checkpoints(const std::filesystem::path& out_dir, const std::string& suffix) const {
  save_checkpoint(make_checkpoint(generator_, config_.seed), out_dir / fmt::format("generator_{}.ckpt", suffix));
  save_checkpoint(make_checkpoint(discriminator_, config_.seed),
                  out_dir / fmt::format("discriminator_{}.ckpt", suffix));
}

void Trainer::run(const std::filesystem::path& out_dir) {
  const bool write = !out_dir.empty();
  if (write) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "run_header.txt", run_header());
  }
  long total = static_cast<long>(config_.epochs) * batches_per_epoch();
  if (config_.max_iterations > 0 && (total == 0 || config_.max_iterations < total)) total = config_.max_iterations;

  auto flush_log = [&] {
    if (!write) return;
    write_text(out_dir / "train_log.csv", log_.to_csv());
    write_text(out_dir / "timing.csv", log_.timing_csv());
  };
  try {
    while (iteration_ < total) {
      iterate();
      const bool epoch_done = batch_in_epoch_ == batches_per_epoch();
      if (write && epoch_done && config_.checkpoint_every > 0 && (epoch_ + 1) % config_.checkpoint_every == 0) {
        write_checkpoints(out_dir, fmt::format("epoch{:04d}", epoch_));
      }
    }
  } catch (...) {
    flush_log();
    throw;
  }
  flush_log();
  if (write) {
    write_checkpoints(out_dir, "final");
    save_checkpoint(make_checkpoint(generator_, config_.seed), out_dir / "generator.ckpt");
  }
}

// ---------------------------------------------------------------------------

Image super_resolve(const GeneratorParams& g, const Image& lr) {
  NoGradGuard no_grad;
  const Tensor out = generator_forward(to_tensor(lr), g);
  return from_tensor(out).front();
}

Image super_resolve_padded(const GeneratorParams& g, const Image& lr) {
  const int m = g.config.pool_rate;
  const int pw = (lr.width() + m - 1) / m * m;
  const int ph = (lr.height() + m - 1) / m * m;
  if (pw == lr.width() && ph == lr.height()) return super_resolve(g, lr);
  Image padded(pw, ph);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      const int sx = reflect_index(x, lr.width());
      const int sy = reflect_index(y, lr.height());
      for (int c = 0; c < Image::kChannels; ++c) padded.at(x, y, c) = lr.at(sx, sy, c);
    }
  }
  const Image out = super_resolve(g, padded);
  const int r = g.config.scale;
  return crop(out, 0, 0, lr.width() * r, lr.height() * r);
}

ImagePair make_eval_pair(const Image& image, int scale, int multiple) {
  if (scale < 1 || multiple < 1 || multiple % scale != 0) {
    throw InvalidArgument(fmt::format("make_eval_pair: multiple {} must be a positive multiple of scale {}", multiple,
                                      scale));
  }
  ImagePair pair;
  pair.hr = modcrop(image, multiple);
  pair.lr = bicubic_resize(pair.hr, pair.hr.width() / scale, pair.hr.height() / scale);
  return pair;
}

QualityScore evaluate_generator(const GeneratorParams& g, std::span<const ImagePair> pairs,
                                const MetricOptions& options) {
  if (pairs.empty()) throw InvalidArgument("evaluate_generator: no pairs");
  QualityScore score;
  for (const ImagePair& pair : pairs) {
    const Image sr = super_resolve(g, pair.lr);
    score.psnr += psnr(sr, pair.hr, options);
    score.ssim += ssim(sr, pair.hr, options);
  }
  score.psnr /= static_cast<double>(pairs.size());
  score.ssim /= static_cast<double>(pairs.size());
  return score;
}

// ---------------------------------------------------------------------------

std::string AblationReport::to_table() const {
  constexpr int kLabelWidth = 22;
  constexpr int kCellWidth = 16;
  std::string out = fmt::format("{:<{}}{:<7}", "Loss", kLabelWidth, "Scale");
  for (const auto& d : datasets) out += fmt::format("{:<{}}", d, kCellWidth);
  out += "\n" + fmt::format("{:<{}}{:<7}", "", kLabelWidth, "");
  for (std::size_t i = 0; i < datasets.size(); ++i) out += fmt::format("{:<{}}", "PSNR/SSIM", kCellWidth);
  out += "\n";
  for (const auto& arm : arms) {
    out += fmt::format("{:<{}}{:<7}", arm.label, kLabelWidth, fmt::format("x{}", scale));
    if (!arm.completed) {
      out += "aborted: " + arm.abort_reason;
    }
    for (const auto& s : arm.scores) {
      out += fmt::format("{:<{}}", fmt::format("{:.2f}/{:.4f}", s.psnr, s.ssim), kCellWidth);
    }
    out += "\n";
  }
  return out;
}

std::string AblationReport::to_csv() const {
  std::string out = "loss,scale,dataset,psnr_db,ssim\n";
  for (const auto& arm : arms) {
    for (std::size_t i = 0; i < arm.scores.size(); ++i) {
      out += fmt::format("{},{},{},{},{}\n", arm.label, scale, datasets.at(i), format_double(arm.scores[i].psnr),
                         format_double(arm.scores[i].ssim));
    }
  }
  return out;
}

AblationReport ablation_run(const TrainConfig& base, const std::vector<Image>& corpus, std::span<const EvalSet> sets,
                            std::vector<ContentLoss> arms) {
  if (arms.empty()) throw InvalidArgument("ablation_run: no arms");
  if (sets.empty()) throw InvalidArgument("ablation_run: no evaluation sets");
  AblationReport report;
  report.scale = base.scale;
  for (const auto& set : sets) report.datasets.push_back(set.name);
  for (ContentLoss loss : arms) {
    TrainConfig config = base;
    config.content_loss = loss;
    Trainer trainer(config, corpus);
    AblationArmResult arm;
    arm.label = content_loss_label(loss);
    arm.loss = loss;
    try {
      trainer.run();
      arm.completed = true;
    } catch (const TrainingAbort& e) {
      arm.abort_reason = e.what();
    }
    if (arm.completed) {
      for (const auto& set : sets) arm.scores.push_back(evaluate_generator(trainer.generator(), set.pairs));
    }
    report.arms.push_back(std::move(arm));
  }
  return report;
}

}  // namespace scsr
