#include "scsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <fmt/format.h>
#include <png.h>

#include "scsr/errors.hpp"
#include "scsr/rng.hpp"

namespace scsr {

namespace fs = std::filesystem;

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw DimensionError(fmt::format("image dimensions {}x{} must be positive", width, height));
  pixels_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

void Image::clamp() {
  for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

Image image_from_bytes(const std::uint8_t* bytes, int width, int height, int channels, int depth) {
  Image image(width, height);
  const double max_value = (1 << depth) - 1;
  const int bytes_per_sample = depth > 8 ? 2 : 1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) {
        const int src_c = channels == 1 ? 0 : c;
        const std::size_t offset =
            ((static_cast<std::size_t>(y) * width + x) * channels + src_c) * bytes_per_sample;
        unsigned sample = bytes[offset];
        if (bytes_per_sample == 2) sample = (sample << 8) | bytes[offset + 1];
        image.at(x, y, c) = sample / max_value;
      }
    }
  }
  image.set_source_depth(depth);
  return image;
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

Image load_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError(fmt::format("cannot read PNG '{}': {}", path.string(), png.message));
  }
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    throw IoError(fmt::format("PNG '{}' has zero dimension", path.string()));
  }
  const bool sixteen = (png.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  // Decode at 8 bits; 16-bit sources record their depth but are rounded.
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw IoError(fmt::format("corrupt or truncated PNG '{}': {}", path.string(), msg));
  }
  Image image = image_from_bytes(buffer.data(), static_cast<int>(png.width), static_cast<int>(png.height), 3, 8);
  image.set_source_depth(sixteen ? 16 : 8);
  return image;
}

void save_png(const Image& image, const fs::path& path) {
  std::vector<std::uint8_t> buffer(image.pixels().size());
  std::transform(image.pixels().begin(), image.pixels().end(), buffer.begin(), quantize);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError(fmt::format("cannot write PNG '{}': {}", path.string(), png.message));
  }
}

// Reads one whitespace/comment separated ASCII integer of a netpbm header.
int read_pnm_int(std::istream& in, const fs::path& path) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF || !std::isdigit(ch)) throw IoError(fmt::format("malformed PNM header in '{}'", path.string()));
  long value = 0;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > 1 << 20) throw IoError(fmt::format("PNM header value too large in '{}'", path.string()));
    ch = in.get();
  }
  return static_cast<int>(value);
}

Image load_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  char magic[2] = {};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '6' && magic[1] != '5')) {
    throw IoError(fmt::format("'{}' is not a binary PPM/PGM file", path.string()));
  }
  const int channels = magic[1] == '6' ? 3 : 1;
  const int width = read_pnm_int(in, path);
  const int height = read_pnm_int(in, path);
  const int max_value = read_pnm_int(in, path);
  if (width == 0 || height == 0) throw IoError(fmt::format("'{}' has zero dimension", path.string()));
  if (max_value != 255 && max_value != 65535) {
    throw IoError(fmt::format("'{}': unsupported max value {}", path.string(), max_value));
  }
  const int depth = max_value == 255 ? 8 : 16;
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(width) * height * channels * (depth / 8));
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (in.gcount() != static_cast<std::streamsize>(buffer.size())) {
    throw IoError(fmt::format("truncated image data in '{}'", path.string()));
  }
  return image_from_bytes(buffer.data(), width, height, channels, depth);
}

void save_ppm(const Image& image, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<std::uint8_t> buffer(image.pixels().size());
  std::transform(image.pixels().begin(), image.pixels().end(), buffer.begin(), quantize);
  out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace

bool is_supported_image(const fs::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

Image load_image(const fs::path& path) {
  if (!fs::exists(path)) throw IoError(fmt::format("image '{}' does not exist", path.string()));
  const std::string ext = lower_extension(path);
  if (ext == ".png") return load_png(path);
  if (ext == ".ppm" || ext == ".pgm") return load_pnm(path);
  throw IoError(fmt::format("unsupported image format '{}'", path.string()));
}

void save_image(const Image& image, const fs::path& path) {
  if (image.empty()) throw DimensionError("cannot save an empty image");
  const std::string ext = lower_extension(path);
  if (ext == ".png") return save_png(image, path);
  if (ext == ".ppm") return save_ppm(image, path);
  throw IoError(fmt::format("unsupported output format '{}'", path.string()));
}

double cubic_kernel(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

int reflect_index(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<std::vector<ResampleTap>> resample_taps(int in_size, int out_size) {
  if (in_size < 1 || out_size < 1) throw DimensionError(fmt::format("resample {} -> {}: sizes must be positive", in_size, out_size));
  const double scale = static_cast<double>(out_size) / in_size;
  const double kernel_scale = std::min(1.0, scale);
  const double support = 2.0 / kernel_scale;
  std::vector<std::vector<ResampleTap>> taps(out_size);
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) / scale - 0.5;
    const int first = static_cast<int>(std::ceil(center - support));
    const int last = static_cast<int>(std::floor(center + support));
    double total = 0.0;
    auto& row = taps[o];
    for (int j = first; j <= last; ++j) {
      const double w = cubic_kernel((j - center) * kernel_scale);
      if (w == 0.0) continue;
      row.push_back({reflect_index(j, in_size), w});
      total += w;
    }
    for (auto& tap : row) tap.weight /= total;
  }
  return taps;
}

Image bicubic_resize(const Image& image, int out_width, int out_height) {
  if (image.empty()) throw DimensionError("bicubic_resize: empty image");
  if (out_width < 1 || out_height < 1) {
    throw DimensionError(fmt::format("bicubic_resize: output dims {}x{} must be positive", out_width, out_height));
  }
  const auto col_taps = resample_taps(image.width(), out_width);
  const auto row_taps = resample_taps(image.height(), out_height);
  constexpr int C = Image::kChannels;

  // Horizontal pass into an unclamped intermediate of size out_width x height.
  std::vector<double> mid(static_cast<std::size_t>(out_width) * image.height() * C, 0.0);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < out_width; ++x) {
      double* dst = &mid[(static_cast<std::size_t>(y) * out_width + x) * C];
      for (const auto& tap : col_taps[x]) {
        for (int c = 0; c < C; ++c) dst[c] += tap.weight * image.at(tap.index, y, c);
      }
    }
  }
  Image out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (const auto& tap : row_taps[y]) acc += tap.weight * mid[(static_cast<std::size_t>(tap.index) * out_width + x) * C + c];
        out.at(x, y, c) = acc;
      }
    }
  }
  out.clamp();
  out.set_source_depth(image.source_depth());
  return out;
}

Image crop(const Image& image, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width < 1 || height < 1 || x0 + width > image.width() || y0 + height > image.height()) {
    throw DimensionError(fmt::format("crop ({}, {}, {}x{}) outside {}x{} image", x0, y0, width, height, image.width(),
                                     image.height()));
  }
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = image.at(x0 + x, y0 + y, c);
    }
  }
  out.set_source_depth(image.source_depth());
  return out;
}

Image modcrop(const Image& image, int multiple) {
  if (multiple < 1) throw InvalidArgument("modcrop: multiple must be positive");
  const int w = image.width() - image.width() % multiple;
  const int h = image.height() - image.height() % multiple;
  if (w < 1 || h < 1) {
    throw DimensionError(fmt::format("modcrop: {}x{} image smaller than multiple {}", image.width(), image.height(), multiple));
  }
  return crop(image, 0, 0, w, h);
}

Image random_crop(const Image& image, int size, std::uint64_t seed) {
  if (size < 1) throw InvalidArgument("random_crop: size must be positive");
  if (image.width() < size || image.height() < size) {
    throw DimensionError(
        fmt::format("image {}x{} is smaller than crop size {}", image.width(), image.height(), size));
  }
  Rng rng(seed);
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.width() - size + 1)));
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.height() - size + 1)));
  return crop(image, x0, y0, size, size);
}

void PairSpec::validate() const {
  if (scale != 1 && scale != 2 && scale != 4 && scale != 8) {
    throw InvalidArgument(fmt::format("scale must be one of 2, 4, 8 (got {})", scale));
  }
  if (crop_size < 1 || crop_size % scale != 0) {
    throw InvalidArgument(fmt::format("crop size {} must be a positive multiple of scale {}", crop_size, scale));
  }
}

ImagePair make_pair(const Image& image, const PairSpec& spec) {
  spec.validate();
  ImagePair pair;
  pair.hr = random_crop(image, spec.crop_size, spec.seed);
  const int lr_size = spec.crop_size / spec.scale;
  pair.lr = bicubic_resize(pair.hr, lr_size, lr_size);
  return pair;
}

Tensor to_tensor(std::span<const Image> images) {
  if (images.empty()) throw DimensionError("to_tensor: empty batch");
  const int w = images[0].width();
  const int h = images[0].height();
  for (const Image& img : images) {
    if (img.width() != w || img.height() != h) {
      throw DimensionError(fmt::format("to_tensor: ragged batch ({}x{} vs {}x{})", img.width(), img.height(), w, h));
    }
  }
  const Shape shape{static_cast<int>(images.size()), Image::kChannels, h, w};
  std::vector<double> data(shape.size());
  std::size_t i = 0;
  for (const Image& img : images) {
    for (int c = 0; c < Image::kChannels; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) data[i++] = img.at(x, y, c);
      }
    }
  }
  return Tensor::from_data(shape, std::move(data));
}

Tensor to_tensor(const Image& image) { return to_tensor(std::span<const Image>(&image, 1)); }

std::vector<Image> from_tensor(const Tensor& tensor) {
  const Shape s = tensor.shape();
  if (s.c != Image::kChannels) throw DimensionError(fmt::format("from_tensor: expected 3 channels, got {}", s.str()));
  std::vector<Image> images;
  images.reserve(s.n);
  auto data = tensor.data();
  std::size_t i = 0;
  for (int n = 0; n < s.n; ++n) {
    Image img(s.w, s.h);
    for (int c = 0; c < Image::kChannels; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) img.at(x, y, c) = std::clamp(data[i++], 0.0, 1.0);
      }
    }
    images.push_back(std::move(img));
  }
  return images;
}

Image synthetic_image(std::uint64_t seed, int size) {
  Rng rng(seed);
  Image img(size, size);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.1, 0.9);
    c1[c] = rng.uniform(0.1, 0.9);
  }
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);

  struct Blob {
    double cx, cy, sigma, amp[3];
  };
  std::vector<Blob> blobs(3 + rng.below(5));
  for (auto& b : blobs) {
    b.cx = rng.uniform(0.0, size);
    b.cy = rng.uniform(0.0, size);
    b.sigma = rng.uniform(0.03, 0.2) * size;
    for (double& a : b.amp) a = rng.uniform(-0.45, 0.45);
  }

  const int patch = static_cast<int>(size * rng.uniform(0.2, 0.5));
  const int px = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - patch + 1)));
  const int py = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - patch + 1)));
  const int period = 4 + static_cast<int>(rng.below(21));
  const double contrast = rng.uniform(0.1, 0.35);

  const double wave_freq = rng.uniform(2.0, 12.0) * 2.0 * std::numbers::pi / size;
  const double wave_angle = rng.uniform(0.0, std::numbers::pi);
  const double wave_amp = rng.uniform(0.0, 0.08);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = 0.5 + ((x - size / 2.0) * dx + (y - size / 2.0) * dy) / (1.5 * size);
      const double wave =
          wave_amp * std::sin(wave_freq * (x * std::cos(wave_angle) + y * std::sin(wave_angle)));
      const bool in_patch = x >= px && x < px + patch && y >= py && y < py + patch;
      const double checker = in_patch ? ((((x - px) / period + (y - py) / period) % 2) ? contrast : -contrast) : 0.0;
      for (int c = 0; c < 3; ++c) {
        double v = c0[c] + (c1[c] - c0[c]) * t + wave + checker;
        for (const auto& b : blobs) {
          const double r2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
          v += b.amp[c] * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
        }
        img.at(x, y, c) = v;
      }
    }
  }
  img.clamp();
  return img;
}

std::vector<Image> synthetic_corpus(int count, std::uint64_t seed, int size) {
  Rng rng(seed);
  std::vector<Image> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(synthetic_image(rng.fork(), size));
  return out;
}

std::vector<fs::path> list_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> files;
  const fs::path manifest = dir / "corpus.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      files.push_back(dir / line);
    }
    return files;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_supported_image(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void write_corpus_manifest(const fs::path& dir, std::span<const std::string> relative_paths) {
  std::ofstream out(dir / "corpus.txt");
  if (!out) throw IoError(fmt::format("cannot write corpus manifest in '{}'", dir.string()));
  for (const auto& p : relative_paths) out << p << '\n';
}

}  // namespace scsr
