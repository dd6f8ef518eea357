#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "scsr/config.hpp"
#include "scsr/metrics.hpp"
#include "scsr/networks.hpp"

namespace scsr::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kDomainFailure = 1, kUsage = 2 };

/// Runs one command line (args exclude the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Record of one invocation, written as manifest.txt into the output
/// directory on success and on failure.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  ConfigMap config;  // resolved settings
  ConfigMap inputs;  // named input paths
  std::string output;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string tool_version = kToolVersion;
  double wall_ms = 0.0;
  std::string status;  // ok or failed
  int exit_code = 0;
  std::string error;

  ConfigMap to_map() const;
  static RunManifest from_map(const ConfigMap& map);
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

/// One row source of a comparison table: bicubic upscaling or a generator.
struct CompareMethod {
  std::string label;
  std::shared_ptr<const GeneratorParams> model;  // null for bicubic
};

/// "bicubic" or "model:PATH" (label = checkpoint stem).
CompareMethod parse_method(const std::string& spec);

/// Every image of `hr_dir` is cropped to a multiple of `scale`, bicubically
/// downscaled and 8-bit quantized, then reconstructed by each method; rows
/// hold PSNR/SSIM against the cropped original.
MetricReport compare_dataset(const std::filesystem::path& hr_dir, const std::vector<CompareMethod>& methods, int scale,
                             const MetricOptions& options, int threads = 1);

/// Rounds every sample to the nearest of 256 levels, as an 8-bit file would.
Image quantize8(const Image& image);

}  // namespace scsr::cli
