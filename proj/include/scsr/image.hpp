#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scsr/tensor.hpp"

namespace scsr {

/// Three-channel image with interleaved RGB values in [0, 1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  double& at(int x, int y, int c) { return pixels_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return pixels_[index(x, y, c)]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  /// Bits per channel of the file this image was decoded from.
  int source_depth() const { return source_depth_; }
  void set_source_depth(int bits) { source_depth_ = bits; }

  void clamp();

  bool operator==(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && pixels_ == other.pixels_;
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  int source_depth_ = 8;
  std::vector<double> pixels_;
};

/// Reads PNG (8/16-bit, gray or color, alpha dropped), binary PPM (P6) or PGM (P5).
/// Gray inputs are replicated into three channels.
Image load_image(const std::filesystem::path& path);

/// Writes 8-bit RGB PNG or P6 PPM depending on the extension.
void save_image(const Image& image, const std::filesystem::path& path);

bool is_supported_image(const std::filesystem::path& path);

/// Catmull-Rom cubic (a = -0.5).
double cubic_kernel(double t);

/// Half-sample symmetric boundary: -1 -> 0, n -> n - 1.
int reflect_index(int i, int n);

struct ResampleTap {
  int index;
  double weight;
};

/// Per-output-sample taps along one axis. Downscaling widens the kernel by the
/// scale factor; the weights of each output are normalized to sum to one.
std::vector<std::vector<ResampleTap>> resample_taps(int in_size, int out_size);

/// Separable bicubic resize; result clamped to [0, 1].
Image bicubic_resize(const Image& image, int out_width, int out_height);

Image crop(const Image& image, int x0, int y0, int width, int height);

/// Crops both dimensions down to a multiple of `multiple` (top-left anchored).
Image modcrop(const Image& image, int multiple);

/// Square crop at a seeded uniformly random position.
Image random_crop(const Image& image, int size, std::uint64_t seed);

struct PairSpec {
  int scale = 4;
  int crop_size = 128;
  std::uint64_t seed = 0;

  /// scale in {1, 2, 4, 8} (1 is test-only) and crop_size divisible by scale.
  void validate() const;
};

struct ImagePair {
  Image lr;
  Image hr;
};

ImagePair make_pair(const Image& image, const PairSpec& spec);

/// Packs equally sized images into an [N, 3, H, W] tensor.
Tensor to_tensor(std::span<const Image> images);
Tensor to_tensor(const Image& image);

/// Unpacks an [N, 3, H, W] tensor, clamping to [0, 1].
std::vector<Image> from_tensor(const Tensor& tensor);

/// Procedural test image: smooth gradient, Gaussian blobs, a checkerboard
/// patch and a sinusoid, deterministic in the seed.
Image synthetic_image(std::uint64_t seed, int size = 256);
std::vector<Image> synthetic_corpus(int count, std::uint64_t seed, int size = 256);

/// Image files of a corpus directory: the paths listed in `corpus.txt` when
/// present (one relative path per line), otherwise every supported file, sorted.
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir);
void write_corpus_manifest(const std::filesystem::path& dir, std::span<const std::string> relative_paths);

}  // namespace scsr
