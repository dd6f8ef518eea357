#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "scsr/errors.hpp"
#include "scsr/image.hpp"
#include "scsr/training.hpp"
#include "scsr/verify/suites.hpp"

namespace scsr::cli {

namespace fs = std::filesystem;

namespace {

// Manifest values stay on one line and survive the '#' comment rule.
std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '%': out += "%25"; break;
      case '#': out += "%23"; break;
      case '\n': out += "%0A"; break;
      case '\r': out += "%0D"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      const std::string code = s.substr(i + 1, 2);
      if (code == "25") out += '%';
      else if (code == "23") out += '#';
      else if (code == "0A") out += '\n';
      else if (code == "0D") out += '\r';
      else out += s.substr(i, 3);
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f << text;
  if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

ConfigMap merge(ConfigMap base, const ConfigMap& over) {
  for (const auto& [k, v] : over) base[k] = v;
  return base;
}

std::vector<Image> load_corpus(const fs::path& dir) {
  std::vector<Image> images;
  for (const auto& p : list_corpus(dir)) images.push_back(load_image(p));
  if (images.empty()) throw IoError(fmt::format("no images found in '{}'", dir.string()));
  return images;
}

int parse_border_crop(const std::string& text, int scale) {
  if (text == "scale") {
    if (scale < 1) throw InvalidArgument("--border-crop scale needs --scale");
    return scale;
  }
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size() && v >= 0) return v;
  } catch (const std::exception&) {
  }
  throw InvalidArgument(fmt::format("--border-crop must be a non-negative integer or 'scale', got '{}'", text));
}

// ---------------------------------------------------------------------------
// Options shared between parsing and execution.

struct Common {
  int threads = 1;
};

struct DegradeOptions {
  std::string in, out;
  int scale = 4;
  int crop = 128;
  std::uint64_t seed = 0;
};

struct TrainSource {
  std::string data;
  int synthetic = 0;
  int synthetic_size = 64;
};

struct TrainOptions {
  TrainSource source;
  std::string out;
  std::string preset = "default";
  std::string config_file;
  ConfigMap overrides;
};

struct SrOptions {
  std::string model, in, out;
  bool pad = false;
};

struct EvalOptions {
  std::string sr, hr, out;
  std::string channel = "rgb";
  std::string border_crop = "0";
  int scale = 0;
  std::string method = "model";
};

struct CompareOptions {
  std::vector<std::string> methods{"bicubic"};
  std::vector<std::string> datasets;
  std::string out;
  int scale = 4;
  std::string channel = "rgb";
  std::string border_crop = "0";
};

struct GradcheckOptions {
  std::string module;
  int cases = 10;
  std::string out;
};

struct AblateOptions {
  TrainOptions train;
  std::vector<std::string> eval;
};

struct SynthOptions {
  std::string out;
  int count = 8;
  int size = 64;
  std::uint64_t seed = 0;
};

TrainConfig resolve_train_config(const TrainOptions& o) {
  ConfigMap map = (o.preset == "desk" ? TrainConfig::desk() : TrainConfig{}).to_map();
  if (!o.config_file.empty()) map = merge(map, read_config_file(o.config_file));
  map = merge(map, o.overrides);
  // A bare scale override must carry the generator along.
  if (o.overrides.count("scale")) map["generator.scale"] = o.overrides.at("scale");
  TrainConfig c = TrainConfig::from_map(map);
  c.validate();
  return c;
}

std::vector<Image> training_corpus(const TrainSource& s, std::uint64_t seed, RunManifest& m) {
  if (!s.data.empty()) {
    m.inputs["data"] = s.data;
    return load_corpus(s.data);
  }
  if (s.synthetic < 1) throw InvalidArgument("training needs --data DIR or --synthetic N");
  m.inputs["synthetic.count"] = std::to_string(s.synthetic);
  m.inputs["synthetic.size"] = std::to_string(s.synthetic_size);
  return synthetic_corpus(s.synthetic, seed ^ 0x5EEDC0DEULL, s.synthetic_size);
}

void add_train_flags(CLI::App* sub, TrainOptions& o) {
  sub->add_option("--data", o.source.data, "Directory of training images")->check(CLI::ExistingDirectory);
  sub->add_option("--synthetic", o.source.synthetic, "Train on N procedural images instead of --data")
      ->check(CLI::PositiveNumber);
  sub->add_option("--synthetic-size", o.source.synthetic_size, "Side of the procedural images")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--preset", o.preset, "Starting configuration")->check(CLI::IsMember({"default", "desk"}));
  sub->add_option("--config", o.config_file, "Flat 'key = value' file applied over the preset")
      ->check(CLI::ExistingFile);
  auto over = [sub, &o](const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&o, key](const std::string& v) { o.overrides[key] = v; }, help);
  };
  over("--scale", "scale", "Upscaling factor (2, 4 or 8)");
  over("--epochs", "epochs", "Training epochs");
  over("--max-iterations", "max_iterations", "Iteration cap (0 = none)");
  over("--batch-size", "batch_size", "Images per batch");
  over("--crop", "crop_size", "HR crop side");
  over("--content-loss", "content_loss", "robust or mse");
  over("--seed", "seed", "Seed for every random choice");
  sub->add_option_function<std::vector<std::string>>(
      "--set", [&o](const std::vector<std::string>& kvs) {
        for (const auto& kv : kvs) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
          o.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
      },
      "Extra config overrides key=value");
}

// ---------------------------------------------------------------------------
// Commands

int cmd_degrade(const DegradeOptions& o, RunManifest& m, std::ostream& out, std::ostream& err) {
  m.inputs["in"] = o.in;
  m.seed = o.seed;
  m.config = {{"scale", std::to_string(o.scale)}, {"crop", std::to_string(o.crop)}};
  PairSpec{o.scale, o.crop, 0}.validate();
  const fs::path hr_dir = fs::path(o.out) / "hr";
  const fs::path lr_dir = fs::path(o.out) / "lr";
  fs::create_directories(hr_dir);
  fs::create_directories(lr_dir);
  Rng master(o.seed);
  std::vector<std::string> failures;
  int done = 0;
  const auto files = list_corpus(o.in);
  for (const auto& file : files) {
    // One seed per file whether or not it succeeds, so a bad file does not
    // shift the crops of the others.
    const std::uint64_t seed = master.fork();
    try {
      const Image image = load_image(file);
      if (image.width() < o.crop || image.height() < o.crop) {
        throw InvalidArgument(
            fmt::format("{}x{} is smaller than the {} px crop", image.width(), image.height(), o.crop));
      }
      const ImagePair pair = make_pair(image, PairSpec{o.scale, o.crop, seed});
      const std::string name = file.stem().string() + ".png";
      save_image(pair.hr, hr_dir / name);
      save_image(pair.lr, lr_dir / name);
      ++done;
    } catch (const Error& e) {
      failures.push_back(fmt::format("{}: {}", file.filename().string(), e.what()));
    }
  }
  out << fmt::format("degraded {} of {} images: hr {}x{}, lr {}x{}\n", done, files.size(), o.crop, o.crop,
                     o.crop / o.scale, o.crop / o.scale);
  m.config["images_written"] = std::to_string(done);
  if (files.empty()) {
    err << fmt::format("no images found in '{}'\n", o.in);
    return kDomainFailure;
  }
  if (!failures.empty()) {
    err << fmt::format("{} image(s) failed:\n", failures.size());
    for (const auto& f : failures) err << "  " << f << "\n";
    m.error = fmt::format("{} image(s) failed", failures.size());
    return kDomainFailure;
  }
  return kOk;
}

int cmd_train(const TrainOptions& o, RunManifest& m, std::ostream& out) {
  const TrainConfig config = resolve_train_config(o);
  m.seed = config.seed;
  m.config = config.to_map();
  if (!o.config_file.empty()) m.inputs["config"] = o.config_file;
  std::vector<Image> corpus = training_corpus(o.source, config.seed, m);
  Trainer trainer(config, std::move(corpus));
  out << trainer.run_header();
  write_file(fs::path(o.out) / "config.txt", format_config(config.to_map()));
  trainer.run(o.out);
  const TrainLogRow& last = trainer.log().rows.back();
  out << fmt::format("trained {} iterations ({} epochs): d_loss {:.6f}, g_loss {:.6f}, content {:.6f}\n",
                     trainer.iteration(), trainer.epoch() + 1, last.d_loss, last.g_loss, last.content);
  out << fmt::format("wrote {}\n", (fs::path(o.out) / "generator.ckpt").string());
  return kOk;
}

GeneratorParams load_generator(const fs::path& path) {
  const ModelCheckpoint ck = load_checkpoint(path);
  if (ck.kind != "generator") {
    throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                          fmt::format("'{}' holds a {} checkpoint, not a generator", path.string(), ck.kind));
  }
  return generator_from_checkpoint(ck);
}

int cmd_sr(const SrOptions& o, RunManifest& m, std::ostream& out, std::ostream& err) {
  m.inputs["model"] = o.model;
  m.inputs["in"] = o.in;
  m.config["pad"] = o.pad ? "true" : "false";
  const GeneratorParams g = load_generator(o.model);
  m.config = merge(m.config, g.config.to_map());
  fs::create_directories(o.out);
  std::vector<std::string> failures;
  int done = 0;
  const auto files = list_corpus(o.in);
  for (const auto& file : files) {
    try {
      const Image lr = load_image(file);
      const Image sr = o.pad ? super_resolve_padded(g, lr) : super_resolve(g, lr);
      save_image(sr, fs::path(o.out) / (file.stem().string() + ".png"));
      ++done;
    } catch (const Error& e) {
      failures.push_back(fmt::format("{}: {}", file.filename().string(), e.what()));
    }
  }
  out << fmt::format("super-resolved {} of {} images at x{}\n", done, files.size(), g.config.scale);
  if (files.empty()) {
    err << fmt::format("no images found in '{}'\n", o.in);
    return kDomainFailure;
  }
  if (!failures.empty()) {
    err << fmt::format("{} image(s) failed:\n", failures.size());
    for (const auto& f : failures) err << "  " << f << "\n";
    m.error = fmt::format("{} image(s) failed", failures.size());
    return kDomainFailure;
  }
  return kOk;
}

int cmd_eval(const EvalOptions& o, const Common& common, RunManifest& m, std::ostream& out) {
  m.inputs["sr"] = o.sr;
  m.inputs["hr"] = o.hr;
  MetricOptions options;
  options.channel = parse_channel_mode(o.channel);
  options.border_crop = parse_border_crop(o.border_crop, o.scale);
  m.config = {{"channel", o.channel},
              {"border_crop", std::to_string(options.border_crop)},
              {"scale", std::to_string(o.scale)},
              {"method", o.method}};
  MetricReport report = evaluate_corpus(o.sr, o.hr, options, o.method, o.scale, common.threads);
  write_file(fs::path(o.out) / "metrics.csv", report.to_csv());
  write_file(fs::path(o.out) / "metrics.txt", report.to_text());
  out << report.to_text();
  return kOk;
}

int cmd_compare(const CompareOptions& o, const Common& common, RunManifest& m, std::ostream& out) {
  MetricOptions options;
  options.channel = parse_channel_mode(o.channel);
  options.border_crop = parse_border_crop(o.border_crop, o.scale);
  m.config = {{"channel", o.channel}, {"border_crop", std::to_string(options.border_crop)},
              {"scale", std::to_string(o.scale)}};
  std::vector<CompareMethod> methods;
  for (std::size_t i = 0; i < o.methods.size(); ++i) {
    methods.push_back(parse_method(o.methods[i]));
    m.config[fmt::format("method.{}", i)] = o.methods[i];
    if (methods.back().model && methods.back().model->config.scale != o.scale) {
      throw InvalidArgument(fmt::format("model '{}' is x{}, comparison is x{}", methods.back().label,
                                        methods.back().model->config.scale, o.scale));
    }
  }
  std::string combined;
  for (std::size_t i = 0; i < o.datasets.size(); ++i) {
    m.inputs[fmt::format("dataset.{}", i)] = o.datasets[i];
    const MetricReport report = compare_dataset(o.datasets[i], methods, o.scale, options, common.threads);
    write_file(fs::path(o.out) / (report.dataset + ".csv"), report.to_csv());
    write_file(fs::path(o.out) / (report.dataset + ".txt"), report.to_text());
    combined += report.to_summary_table() + "\n";
  }
  write_file(fs::path(o.out) / "compare.txt", combined);
  out << combined;
  return kOk;
}

int cmd_gradcheck(const GradcheckOptions& o, RunManifest& m, std::ostream& out) {
  m.config = {{"module", o.module}, {"cases", std::to_string(o.cases)}};
  const std::vector<std::string> modules =
      o.module == "all" ? verify::suite_modules() : std::vector<std::string>{o.module};
  bool passed = true;
  std::string text;
  for (const auto& module : modules) {
    const verify::SuiteReport report = verify::run_suite(module, o.cases);
    text += fmt::format("[{}]\n{}", module, report.to_text());
    passed = passed && report.passed();
  }
  text += passed ? "all checks passed\n" : "some checks FAILED\n";
  write_file(fs::path(o.out) / fmt::format("gradcheck_{}.txt", o.module), text);
  out << text;
  if (!passed) m.error = "gradient or oracle check failed";
  return passed ? kOk : kDomainFailure;
}

int cmd_ablate(const AblateOptions& o, RunManifest& m, std::ostream& out) {
  const TrainConfig config = resolve_train_config(o.train);
  m.seed = config.seed;
  m.config = config.to_map();
  const std::vector<Image> corpus = training_corpus(o.train.source, config.seed, m);
  const int multiple = config.scale * config.generator.pool_rate;
  std::vector<EvalSet> sets;
  if (o.eval.empty()) {
    EvalSet set{"synthetic", {}};
    for (const Image& img : synthetic_corpus(5, config.seed ^ 0xE7A1ULL, 64)) {
      set.pairs.push_back(make_eval_pair(img, config.scale, multiple));
    }
    sets.push_back(std::move(set));
  }
  for (std::size_t i = 0; i < o.eval.size(); ++i) {
    m.inputs[fmt::format("eval.{}", i)] = o.eval[i];
    EvalSet set{fs::path(o.eval[i]).filename().string(), {}};
    for (const Image& img : load_corpus(o.eval[i])) set.pairs.push_back(make_eval_pair(img, config.scale, multiple));
    sets.push_back(std::move(set));
  }
  const AblationReport report = ablation_run(config, corpus, sets);
  write_file(fs::path(o.train.out) / "ablation.txt", report.to_table());
  write_file(fs::path(o.train.out) / "ablation.csv", report.to_csv());
  out << report.to_table();
  const bool all_completed =
      std::all_of(report.arms.begin(), report.arms.end(), [](const AblationArmResult& a) { return a.completed; });
  if (!all_completed) m.error = "an ablation arm aborted";
  return all_completed ? kOk : kDomainFailure;
}

int cmd_synth(const SynthOptions& o, RunManifest& m, std::ostream& out) {
  m.seed = o.seed;
  m.config = {{"count", std::to_string(o.count)}, {"size", std::to_string(o.size)}};
  const auto images = synthetic_corpus(o.count, o.seed, o.size);
  for (std::size_t i = 0; i < images.size(); ++i) {
    save_image(images[i], fs::path(o.out) / fmt::format("synth_{:04d}.png", i));
  }
  out << fmt::format("wrote {} synthetic {}x{} images\n", images.size(), o.size, o.size);
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

ConfigMap RunManifest::to_map() const {
  ConfigMap map;
  map["command"] = command;
  map["status"] = status;
  map["exit_code"] = std::to_string(exit_code);
  map["error"] = escape(error);
  map["seed"] = std::to_string(seed);
  map["threads"] = std::to_string(threads);
  map["tool_version"] = tool_version;
  map["wall_ms"] = fmt::format("{:.3f}", wall_ms);
  map["output"] = escape(output);
  for (const auto& [k, v] : config) map["config." + k] = escape(v);
  for (const auto& [k, v] : inputs) map["input." + k] = escape(v);
  for (std::size_t i = 0; i < args.size(); ++i) map[fmt::format("arg.{:03d}", i)] = escape(args[i]);
  return map;
}

RunManifest RunManifest::from_map(const ConfigMap& map) {
  RunManifest m;
  auto get = [&map](const std::string& key) {
    auto it = map.find(key);
    return it == map.end() ? std::string() : unescape(it->second);
  };
  m.command = get("command");
  m.status = get("status");
  m.error = get("error");
  m.output = get("output");
  m.tool_version = get("tool_version");
  if (map.count("exit_code")) m.exit_code = static_cast<int>(config_int(map, "exit_code"));
  if (map.count("seed")) m.seed = std::stoull(map.at("seed"));
  if (map.count("threads")) m.threads = static_cast<int>(config_int(map, "threads"));
  if (map.count("wall_ms")) m.wall_ms = config_double(map, "wall_ms");
  for (const auto& [k, v] : map) {
    if (k.rfind("config.", 0) == 0) m.config[k.substr(7)] = unescape(v);
    if (k.rfind("input.", 0) == 0) m.inputs[k.substr(6)] = unescape(v);
    if (k.rfind("arg.", 0) == 0) m.args.push_back(unescape(v));  // keys sort in argument order
  }
  return m;
}

void RunManifest::save(const fs::path& path) const {
  write_file(path, "# run manifest\n" + format_config(to_map()));
}

RunManifest RunManifest::load(const fs::path& path) { return from_map(read_config_file(path)); }

Image quantize8(const Image& image) {
  Image q = image;
  for (double& v : q.pixels()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return q;
}

CompareMethod parse_method(const std::string& spec) {
  if (spec == "bicubic") return {"bicubic", nullptr};
  if (spec.rfind("model:", 0) == 0) {
    const fs::path path = spec.substr(6);
    return {path.stem().string(), std::make_shared<const GeneratorParams>(load_generator(path))};
  }
  throw InvalidArgument(fmt::format("unknown method '{}' (expected bicubic or model:CKPT)", spec));
}

MetricReport compare_dataset(const fs::path& hr_dir, const std::vector<CompareMethod>& methods, int scale,
                             const MetricOptions& options, int threads) {
  if (methods.empty()) throw InvalidArgument("compare: no methods");
  const auto files = list_corpus(hr_dir);
  if (files.empty()) throw IoError(fmt::format("no images found in '{}'", hr_dir.string()));
  MetricReport report;
  report.dataset = hr_dir.filename().string();
  if (report.dataset.empty()) report.dataset = hr_dir.parent_path().filename().string();
  report.options = options;
  report.rows.resize(files.size() * methods.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        const Image hr = modcrop(load_image(files[i]), scale);
        const Image lr = quantize8(bicubic_resize(hr, hr.width() / scale, hr.height() / scale));
        for (std::size_t k = 0; k < methods.size(); ++k) {
          const Image sr = quantize8(methods[k].model ? super_resolve_padded(*methods[k].model, lr)
                                                      : bicubic_resize(lr, hr.width(), hr.height()));
          report.rows[i * methods.size() + k] = {files[i].stem().string(), methods[k].label, scale,
                                                 psnr(sr, hr, options), ssim(sr, hr, options)};
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(files.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return report;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Super-resolution with self-calibrated convolutions: degrade, train, reconstruct, evaluate", "scsr"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads for per-image stages (1 = bitwise deterministic)")
      ->check(CLI::PositiveNumber);

  DegradeOptions degrade;
  auto* c_degrade = app.add_subcommand("degrade", "Cut seeded HR crops and their bicubic LR versions");
  c_degrade->add_option("--in", degrade.in, "Directory of source images")->required()->check(CLI::ExistingDirectory);
  c_degrade->add_option("--out", degrade.out, "Output directory (gets hr/ and lr/)")->required();
  c_degrade->add_option("--scale", degrade.scale, "Downscaling factor")->check(CLI::IsMember({2, 4, 8}));
  c_degrade->add_option("--crop", degrade.crop, "HR crop side")->check(CLI::PositiveNumber);
  c_degrade->add_option("--seed", degrade.seed, "Seed for crop positions");

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Train generator and discriminator");
  add_train_flags(c_train, train);

  SrOptions sr;
  auto* c_sr = app.add_subcommand("sr", "Super-resolve a directory of images with a generator checkpoint");
  c_sr->add_option("--model", sr.model, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  c_sr->add_option("--in", sr.in, "Directory of LR images")->required()->check(CLI::ExistingDirectory);
  c_sr->add_option("--out", sr.out, "Output directory")->required();
  c_sr->add_flag("--pad", sr.pad, "Reflect-pad inputs whose size is not a multiple of the pool rate");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "PSNR/SSIM of SR images against HR images, paired by name");
  c_eval->add_option("--sr", ev.sr, "Directory of reconstructed images")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--hr", ev.hr, "Directory of reference images")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--out", ev.out, "Report directory")->required();
  c_eval->add_option("--channel", ev.channel, "rgb or luma")->check(CLI::IsMember({"rgb", "luma"}));
  c_eval->add_option("--border-crop", ev.border_crop, "Pixels cropped from each side, or 'scale'");
  c_eval->add_option("--scale", ev.scale, "Scale recorded in the rows")->check(CLI::NonNegativeNumber);
  c_eval->add_option("--method", ev.method, "Method label for the rows");

  CompareOptions cmp;
  auto* c_compare = app.add_subcommand("compare", "Methods x metrics tables over benchmark datasets");
  c_compare->add_option("--methods", cmp.methods, "bicubic and/or model:CKPT")->delimiter(',');
  c_compare->add_option("--datasets", cmp.datasets, "HR image directories")
      ->required()
      ->delimiter(',')
      ->check(CLI::ExistingDirectory);
  c_compare->add_option("--out", cmp.out, "Report directory")->required();
  c_compare->add_option("--scale", cmp.scale, "Upscaling factor")->check(CLI::IsMember({2, 4, 8}));
  c_compare->add_option("--channel", cmp.channel, "rgb or luma")->check(CLI::IsMember({"rgb", "luma"}));
  c_compare->add_option("--border-crop", cmp.border_crop, "Pixels cropped from each side, or 'scale'");

  GradcheckOptions gc;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference and oracle checks");
  c_grad->add_option("--module", gc.module, "tensor, scconv, losses, networks or all")
      ->required()
      ->check(CLI::IsMember({"tensor", "scconv", "losses", "networks", "all"}));
  c_grad->add_option("--cases", gc.cases, "Seeded cases per check")->check(CLI::PositiveNumber);
  c_grad->add_option("--out", gc.out, "Report directory")->required();

  AblateOptions ab;
  auto* c_ablate = app.add_subcommand("ablate", "Robust vs MSE content loss from identical seeds");
  add_train_flags(c_ablate, ab.train);
  c_ablate->add_option("--eval", ab.eval, "HR evaluation directories")->delimiter(',')->check(CLI::ExistingDirectory);

  SynthOptions syn;
  auto* c_synth = app.add_subcommand("synth", "Write a procedural image corpus");
  c_synth->add_option("--out", syn.out, "Output directory")->required();
  c_synth->add_option("--count", syn.count, "Number of images")->check(CLI::PositiveNumber);
  c_synth->add_option("--size", syn.size, "Image side")->check(CLI::Range(16, 4096));
  c_synth->add_option("--seed", syn.seed, "Seed");

  std::string replay_path;
  auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  c_replay->add_option("manifest", replay_path, "manifest.txt of an earlier run")->required()->check(CLI::ExistingFile);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (c_train->parsed() && train.source.data.empty() && train.source.synthetic == 0) {
      throw CLI::RequiredError("train needs --data DIR or --synthetic N");
    }
    if (c_ablate->parsed() && ab.train.source.data.empty() && ab.train.source.synthetic == 0) {
      throw CLI::RequiredError("ablate needs --data DIR or --synthetic N");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  if (c_replay->parsed()) {
    RunManifest recorded;
    try {
      recorded = RunManifest::load(replay_path);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return kDomainFailure;
    }
    if (recorded.args.empty() || recorded.args.front() == "replay") {
      err << "error: manifest records no replayable command\n";
      return kDomainFailure;
    }
    return run(recorded.args, out, err);
  }

  CLI::App* selected = app.get_subcommands().front();
  RunManifest manifest;
  manifest.command = selected->get_name();
  manifest.args = args;
  manifest.threads = common.threads;
  std::map<std::string, std::string> outputs{{"degrade", degrade.out}, {"train", train.out}, {"sr", sr.out},
                                             {"eval", ev.out},         {"compare", cmp.out}, {"gradcheck", gc.out},
                                             {"ablate", ab.train.out}, {"synth", syn.out}};
  manifest.output = outputs.at(manifest.command);

  const auto start = std::chrono::steady_clock::now();
  int code = kOk;
  try {
    fs::create_directories(manifest.output);
    if (selected == c_degrade) code = cmd_degrade(degrade, manifest, out, err);
    else if (selected == c_train) code = cmd_train(train, manifest, out);
    else if (selected == c_sr) code = cmd_sr(sr, manifest, out, err);
    else if (selected == c_eval) code = cmd_eval(ev, common, manifest, out);
    else if (selected == c_compare) code = cmd_compare(cmp, common, manifest, out);
    else if (selected == c_grad) code = cmd_gradcheck(gc, manifest, out);
    else if (selected == c_ablate) code = cmd_ablate(ab, manifest, out);
    else if (selected == c_synth) code = cmd_synth(syn, manifest, out);
  } catch (const TrainingAbort& e) {
    err << fmt::format("training aborted ({}): {}\n", e.term(), e.what());
    manifest.error = fmt::format("training aborted ({}): {}", e.term(), e.what());
    code = kDomainFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    manifest.error = e.what();
    code = kDomainFailure;
  }
  manifest.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  manifest.exit_code = code;
  manifest.status = code == kOk ? "ok" : "failed";
  try {
    fs::create_directories(manifest.output);
    manifest.save(fs::path(manifest.output) / "manifest.txt");
  } catch (const std::exception& e) {
    err << "error: could not write manifest: " << e.what() << "\n";
    if (code == kOk) code = kDomainFailure;
  }
  return code;
}

}  // namespace scsr::cli
