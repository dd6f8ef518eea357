#include "scsr/networks.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "scsr/errors.hpp"
#include "scsr/ops.hpp"

namespace scsr {

namespace {

template <typename Params>
std::size_t count_values(const Params& p) {
  std::size_t n = 0;
  for (const Parameter* param : p.parameters()) n += param->value().size();
  return n;
}

template <typename Params>
Params deep_copy(const Params& src) {
  Params copy = src;
  auto from = src.parameters();
  auto to = copy.parameters();
  for (std::size_t i = 0; i < from.size(); ++i) *to[i] = from[i]->clone();
  return copy;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("config key '{}': '{}' is not a comma separated integer list", key, text));
    }
  }
  return out;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (scale != 2 && scale != 4 && scale != 8) throw InvalidArgument(fmt::format("generator scale must be 2, 4 or 8, got {}", scale));
  if (n_sc_blocks < 1) throw InvalidArgument("generator needs at least one self-calibrated block");
  if (base_channels < 2 || base_channels % 2 != 0) {
    throw InvalidArgument(fmt::format("base_channels must be even and >= 2, got {}", base_channels));
  }
  if (pool_rate < 2) throw InvalidArgument(fmt::format("pool_rate must be >= 2, got {}", pool_rate));
  if (head_kernel < 1 || head_kernel % 2 == 0 || tail_kernel < 1 || tail_kernel % 2 == 0) {
    throw InvalidArgument("head/tail kernels must be odd");
  }
}

int GeneratorConfig::reconstruction_stages() const { return std::countr_zero(static_cast<unsigned>(scale)); }

ConfigMap GeneratorConfig::to_map() const {
  return {{"scale", std::to_string(scale)},
          {"n_sc_blocks", std::to_string(n_sc_blocks)},
          {"base_channels", std::to_string(base_channels)},
          {"pool_rate", std::to_string(pool_rate)},
          {"head_kernel", std::to_string(head_kernel)},
          {"tail_kernel", std::to_string(tail_kernel)}};
}

GeneratorConfig GeneratorConfig::from_map(const ConfigMap& map) {
  GeneratorConfig c;
  c.scale = static_cast<int>(config_int(map, "scale"));
  c.n_sc_blocks = static_cast<int>(config_int(map, "n_sc_blocks"));
  c.base_channels = static_cast<int>(config_int(map, "base_channels"));
  c.pool_rate = static_cast<int>(config_int(map, "pool_rate"));
  c.head_kernel = static_cast<int>(config_int(map, "head_kernel"));
  c.tail_kernel = static_cast<int>(config_int(map, "tail_kernel"));
  c.validate();
  return c;
}

void DiscriminatorConfig::validate() const {
  if (channels.empty()) throw InvalidArgument("discriminator needs at least one strided layer");
  for (int c : channels) {
    if (c < 1) throw InvalidArgument("discriminator channel counts must be positive");
  }
  if (kernel < 1 || kernel % 2 == 0) throw InvalidArgument(fmt::format("discriminator kernel must be odd, got {}", kernel));
  if (padding < 0 || padding > kernel / 2) {
    throw InvalidArgument(fmt::format("discriminator padding must be in [0, {}], got {}", kernel / 2, padding));
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw InvalidArgument("leaky slope must be in [0, 1)");
}

int DiscriminatorConfig::min_input_size() const {
  int size = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) size = std::max(1, (size - 1) * 2 + kernel - 2 * padding);
  return size;
}

ConfigMap DiscriminatorConfig::to_map() const {
  std::string list;
  for (std::size_t i = 0; i < channels.size(); ++i) list += (i ? "," : "") + std::to_string(channels[i]);
  return {{"channels", list},
          {"kernel", std::to_string(kernel)},
          {"padding", std::to_string(padding)},
          {"leaky_slope", format_double(leaky_slope)}};
}

DiscriminatorConfig DiscriminatorConfig::from_map(const ConfigMap& map) {
  DiscriminatorConfig c;
  auto it = map.find("channels");
  if (it == map.end()) throw ConfigError("missing config key 'channels'");
  c.channels = parse_int_list(it->second, "channels");
  c.kernel = static_cast<int>(config_int(map, "kernel"));
  c.padding = static_cast<int>(config_int(map, "padding"));
  c.leaky_slope = config_double(map, "leaky_slope");
  c.validate();
  return c;
}

std::vector<Parameter*> GeneratorParams::parameters() {
  std::vector<Parameter*> out{&head.weight, &head.bias};
  for (auto& block : blocks) {
    auto p = block.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  for (auto& stage : reconstruction) {
    out.push_back(&stage.upsample.weight);
    out.push_back(&stage.upsample.bias);
    out.push_back(&stage.act);
  }
  out.push_back(&tail.weight);
  out.push_back(&tail.bias);
  return out;
}

std::vector<const Parameter*> GeneratorParams::parameters() const {
  auto mutable_list = const_cast<GeneratorParams*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

std::size_t GeneratorParams::parameter_count() const { return count_values(*this); }
GeneratorParams GeneratorParams::clone() const { return deep_copy(*this); }

std::vector<Parameter*> DiscriminatorParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& conv : features) {
    out.push_back(&conv.weight);
    out.push_back(&conv.bias);
  }
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

std::vector<const Parameter*> DiscriminatorParams::parameters() const {
  auto mutable_list = const_cast<DiscriminatorParams*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

std::size_t DiscriminatorParams::parameter_count() const { return count_values(*this); }
DiscriminatorParams DiscriminatorParams::clone() const { return deep_copy(*this); }

GeneratorParams init_generator(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const int c = config.base_channels;
  GeneratorParams g;
  g.config = config;
  g.head = make_conv2d("head", 3, c, config.head_kernel, 1, config.head_kernel / 2, rng);
  for (int i = 0; i < config.n_sc_blocks; ++i) {
    g.blocks.push_back(make_sc_block(fmt::format("block{}", i), c, config.pool_rate, rng));
  }
  for (int i = 0; i < config.reconstruction_stages(); ++i) {
    g.reconstruction.push_back({make_conv_transpose2d(fmt::format("up{}", i), c, c, 4, 2, 1, rng),
                                make_prelu_slope(fmt::format("up{}.act", i))});
  }
  g.tail = make_conv2d("tail", c, 3, config.tail_kernel, 1, config.tail_kernel / 2, rng);
  return g;
}

DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  DiscriminatorParams d;
  d.config = config;
  int in = 3;
  for (std::size_t i = 0; i < config.channels.size(); ++i) {
    d.features.push_back(
        make_conv2d(fmt::format("conv{}", i), in, config.channels[i], config.kernel, 2, config.padding, rng));
    in = config.channels[i];
  }
  d.head = make_conv2d("head", in, 1, 1, 1, 0, rng);
  return d;
}

Tensor generator_forward(const Tensor& lr, const GeneratorParams& g) {
  const Shape s = lr.shape();
  if (s.c != 3) throw DimensionError(fmt::format("generator expects 3 input channels, got {}", s.str()));
  if (s.h % g.config.pool_rate != 0 || s.w % g.config.pool_rate != 0) {
    throw DimensionError(fmt::format("generator input {}x{} must be divisible by {}", s.h, s.w, g.config.pool_rate));
  }
  const Tensor features = g.head(lr);
  Tensor x = features;
  for (const auto& block : g.blocks) x = sc_block_forward(x, block);
  x = ops::add(features, x);
  for (const auto& stage : g.reconstruction) x = ops::prelu(stage.upsample(x), stage.act.value());
  return ops::sigmoid(g.tail(x));
}

Tensor discriminator_forward(const Tensor& image, const DiscriminatorParams& d) {
  const Shape s = image.shape();
  if (s.c != 3) throw DimensionError(fmt::format("discriminator expects 3 input channels, got {}", s.str()));
  const int min_size = d.config.min_input_size();
  if (s.h < min_size || s.w < min_size) {
    throw DimensionError(fmt::format("discriminator input {}x{} below minimum size {}", s.h, s.w, min_size));
  }
  Tensor x = image;
  for (const auto& conv : d.features) x = ops::leaky_relu(conv(x), d.config.leaky_slope);
  return ops::sigmoid(ops::spatial_mean(d.head(x)));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'S', 'C', 'S', 'R'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    if (s.size() > 0xffff) throw InvalidArgument("checkpoint string too long");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, std::string source) : data_(data), size_(size), source_(std::move(source)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::size_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw CheckpointError(CheckpointError::Kind::Corrupt, fmt::format("corrupt checkpoint '{}': truncated", source_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string source_;
};

template <typename Params>
ModelCheckpoint checkpoint_of(const Params& p, const std::string& kind, std::uint64_t rng_state) {
  ModelCheckpoint ckpt;
  ckpt.kind = kind;
  ckpt.config = p.config.to_map();
  ckpt.rng_state = rng_state;
  for (const Parameter* param : p.parameters()) {
    ckpt.params.push_back({param->name(), param->shape(), param->value().to_vector()});
  }
  return ckpt;
}

template <typename Params>
void restore_values(Params& p, const ModelCheckpoint& ckpt) {
  auto targets = p.parameters();
  std::set<std::string> expected;
  for (const Parameter* t : targets) expected.insert(t->name());
  std::set<std::string> stored;
  for (const auto& t : ckpt.params) stored.insert(t.name);
  if (expected != stored || ckpt.params.size() != targets.size()) {
    std::string missing;
    for (const auto& name : expected) {
      if (!stored.count(name)) missing += " " + name;
    }
    std::string extra;
    for (const auto& name : stored) {
      if (!expected.count(name)) extra += " " + name;
    }
    throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                          fmt::format("checkpoint parameter names do not match config (missing:{}; unexpected:{})",
                                      missing.empty() ? " none" : missing, extra.empty() ? " none" : extra));
  }
  for (Parameter* target : targets) {
    const auto it = std::find_if(ckpt.params.begin(), ckpt.params.end(),
                                 [&](const NamedTensor& t) { return t.name == target->name(); });
    if (!(it->shape == target->shape())) {
      throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                            fmt::format("checkpoint parameter '{}' has shape {}, expected {}", it->name,
                                        it->shape.str(), target->shape().str()));
    }
    auto dst = target->mutable_data();
    std::copy(it->values.begin(), it->values.end(), dst.begin());
  }
}

void require_kind(const ModelCheckpoint& ckpt, const std::string& kind) {
  if (ckpt.kind != kind) {
    throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                          fmt::format("checkpoint holds a {}, expected a {}", ckpt.kind, kind));
  }
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u8(ModelCheckpoint::kVersion);
  w.str(ckpt.kind);
  w.u32(static_cast<std::uint32_t>(ckpt.config.size()));
  for (const auto& [key, value] : ckpt.config) {
    w.str(key);
    w.str(value);
  }
  w.u64(ckpt.rng_state);
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& t : ckpt.params) {
    if (t.values.size() != t.shape.size()) throw DimensionError(fmt::format("checkpoint tensor '{}' size mismatch", t.name));
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.n));
    w.u32(static_cast<std::uint32_t>(t.shape.c));
    w.u32(static_cast<std::uint32_t>(t.shape.h));
    w.u32(static_cast<std::uint32_t>(t.shape.w));
    for (double v : t.values) w.f64(v);
  }
  auto& bytes = w.bytes();
  const std::uint64_t checksum = fnv1a(bytes.data(), bytes.size());
  w.u64(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write checkpoint '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing checkpoint '{}'", path.string()));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open checkpoint '{}'", path.string()));
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string source = path.string();
  using Kind = CheckpointError::Kind;

  if (bytes.size() < 5 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw CheckpointError(Kind::Corrupt, fmt::format("corrupt checkpoint '{}': bad magic header", source));
  }
  if (bytes[4] != ModelCheckpoint::kVersion) {
    throw CheckpointError(Kind::VersionMismatch, fmt::format("checkpoint '{}' has format version {}, expected {}", source,
                                                             bytes[4], ModelCheckpoint::kVersion));
  }
  if (bytes.size() < 13) throw CheckpointError(Kind::Corrupt, fmt::format("corrupt checkpoint '{}': truncated", source));
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes.data() + body, 8, source);
  if (tail.u64() != fnv1a(bytes.data(), body)) {
    throw CheckpointError(Kind::Corrupt, fmt::format("corrupt checkpoint '{}': checksum mismatch (truncated or modified)", source));
  }

  Reader r(bytes.data() + 5, body - 5, source);
  ModelCheckpoint ckpt;
  ckpt.kind = r.str();
  const std::uint32_t n_config = r.u32();
  for (std::uint32_t i = 0; i < n_config; ++i) {
    std::string key = r.str();
    ckpt.config[key] = r.str();
  }
  ckpt.rng_state = r.u64();
  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    NamedTensor t;
    t.name = r.str();
    t.shape.n = static_cast<int>(r.u32());
    t.shape.c = static_cast<int>(r.u32());
    t.shape.h = static_cast<int>(r.u32());
    t.shape.w = static_cast<int>(r.u32());
    if (t.shape.size() > r.remaining() / 8) {
      throw CheckpointError(Kind::Corrupt, fmt::format("corrupt checkpoint '{}': tensor '{}' exceeds file", source, t.name));
    }
    t.values.resize(t.shape.size());
    for (double& v : t.values) v = r.f64();
    ckpt.params.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw CheckpointError(Kind::Corrupt, fmt::format("corrupt checkpoint '{}': trailing bytes", source));
  return ckpt;
}

ModelCheckpoint make_checkpoint(const GeneratorParams& g, std::uint64_t rng_state) {
  return checkpoint_of(g, "generator", rng_state);
}

ModelCheckpoint make_checkpoint(const DiscriminatorParams& d, std::uint64_t rng_state) {
  return checkpoint_of(d, "discriminator", rng_state);
}

GeneratorParams generator_from_checkpoint(const ModelCheckpoint& ckpt) {
  require_kind(ckpt, "generator");
  GeneratorConfig config;
  try {
    config = GeneratorConfig::from_map(ckpt.config);
  } catch (const Error& e) {
    throw CheckpointError(CheckpointError::Kind::Corrupt, fmt::format("checkpoint config is invalid: {}", e.what()));
  }
  GeneratorParams g = init_generator(config, 0);
  restore_values(g, ckpt);
  return g;
}

GeneratorParams generator_from_checkpoint(const ModelCheckpoint& ckpt, const GeneratorConfig& expected) {
  require_kind(ckpt, "generator");
  if (ckpt.config != expected.to_map()) {
    throw CheckpointError(CheckpointError::Kind::ConfigMismatch,
                          fmt::format("checkpoint config mismatch:\n  stored:   {}\n  expected: {}",
                                      format_config(ckpt.config), format_config(expected.to_map())));
  }
  return generator_from_checkpoint(ckpt);
}

DiscriminatorParams discriminator_from_checkpoint(const ModelCheckpoint& ckpt) {
  require_kind(ckpt, "discriminator");
  DiscriminatorConfig config;
  try {
    config = DiscriminatorConfig::from_map(ckpt.config);
  } catch (const Error& e) {
    throw CheckpointError(CheckpointError::Kind::Corrupt, fmt::format("checkpoint config is invalid: {}", e.what()));
  }
  DiscriminatorParams d = init_discriminator(config, 0);
  restore_values(d, ckpt);
  return d;
}

}  // namespace scsr
