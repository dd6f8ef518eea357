#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scsr/config.hpp"
#include "scsr/layers.hpp"
#include "scsr/scconv.hpp"
#include "scsr/tensor.hpp"

namespace scsr {

struct GeneratorConfig {
  int scale = 4;          // 2, 4 or 8
  int n_sc_blocks = 4;
  int base_channels = 64;  // even
  int pool_rate = 4;
  int head_kernel = 3;
  int tail_kernel = 3;

  void validate() const;
  /// Number of stride-2 transposed-convolution stages, log2(scale).
  int reconstruction_stages() const;
  ConfigMap to_map() const;
  static GeneratorConfig from_map(const ConfigMap& map);
  bool operator==(const GeneratorConfig&) const = default;
};

struct DiscriminatorConfig {
  std::vector<int> channels = {64, 128, 256, 512};  // one stride-2 5x5 layer each
  int kernel = 5;
  int padding = 0;  // per strided layer; 0 keeps every output off the zero border
  double leaky_slope = 0.2;

  void validate() const;
  /// Strided layers plus the 1x1 head.
  int n_layers() const { return static_cast<int>(channels.size()) + 1; }
  /// Smallest input side that leaves at least one output sample.
  int min_input_size() const;
  ConfigMap to_map() const;
  static DiscriminatorConfig from_map(const ConfigMap& map);
  bool operator==(const DiscriminatorConfig&) const = default;
};

struct ReconstructionStage {
  ConvTranspose2d upsample;  // k = 4, stride 2, pad 1
  Parameter act;
};

struct GeneratorParams {
  GeneratorConfig config;
  Conv2d head;
  std::vector<SCBlockParams> blocks;
  std::vector<ReconstructionStage> reconstruction;
  Conv2d tail;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  GeneratorParams clone() const;
};

struct DiscriminatorParams {
  DiscriminatorConfig config;
  std::vector<Conv2d> features;
  Conv2d head;  // 1x1 to a single score channel

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  DiscriminatorParams clone() const;
};

GeneratorParams init_generator(const GeneratorConfig& config, std::uint64_t seed);
DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

/// [N, 3, H, W] -> [N, 3, rH, rW] in [0, 1]. H and W must be divisible by the pool rate.
Tensor generator_forward(const Tensor& lr, const GeneratorParams& g);

/// [N, 3, h, w] -> [N, 1, 1, 1] realness probability in (0, 1).
Tensor discriminator_forward(const Tensor& image, const DiscriminatorParams& d);

/// One named tensor of a checkpoint.
struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Versioned binary container for one network.
///
/// Layout (little endian): "SCSR", u8 version, kind string, config entries,
/// u64 rng state, parameter records (name, four u32 extents, f64 values) and
/// a trailing u64 FNV-1a checksum over everything before it. Strings are
/// u16-length prefixed; counts are u32.
struct ModelCheckpoint {
  static constexpr std::uint8_t kVersion = 1;

  std::string kind;  // "generator" or "discriminator"
  ConfigMap config;
  std::uint64_t rng_state = 0;
  std::vector<NamedTensor> params;
};

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

ModelCheckpoint make_checkpoint(const GeneratorParams& g, std::uint64_t rng_state = 0);
ModelCheckpoint make_checkpoint(const DiscriminatorParams& d, std::uint64_t rng_state = 0);

/// Rebuilds a network from its checkpoint; the stored name set must match
/// the config-derived one exactly.
GeneratorParams generator_from_checkpoint(const ModelCheckpoint& checkpoint);
DiscriminatorParams discriminator_from_checkpoint(const ModelCheckpoint& checkpoint);

/// As above, but first requires the stored config to equal `expected`.
GeneratorParams generator_from_checkpoint(const ModelCheckpoint& checkpoint, const GeneratorConfig& expected);

}  // namespace scsr
