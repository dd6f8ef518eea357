#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "scsr/image.hpp"

namespace scsr {

enum class ChannelMode { Rgb, Luma };
enum class SsimWindow { Gaussian, Global };

std::string to_string(ChannelMode mode);
ChannelMode parse_channel_mode(const std::string& text);

struct MetricOptions {
  ChannelMode channel = ChannelMode::Rgb;
  int border_crop = 0;  // pixels removed from every side before measuring
  SsimWindow window = SsimWindow::Gaussian;
};

/// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double mse(const Image& a, const Image& b);

/// 10 log10(1 / mse) over the selected channels; kInfinitePsnr when mse == 0.
double psnr(const Image& a, const Image& b, const MetricOptions& options = {});

/// Mean SSIM over 11x11 Gaussian (sigma 1.5) windows and channels with
/// C1 = 0.01^2 and C2 = 0.03^2 (unit dynamic range). Only windows fully
/// inside the image are used.
double ssim(const Image& a, const Image& b, const MetricOptions& options = {});

double psnr_from_mse(double mse_value);

/// BT.601 luma scaled to [0, 1] (16..235 studio range), one plane.
std::vector<double> luma_plane(const Image& image);

std::string format_psnr(double db);

struct MetricRow {
  std::string image;
  std::string method;
  int scale = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// Per-image rows plus corpus aggregates for one dataset.
struct MetricReport {
  std::string dataset;
  MetricOptions options;
  std::vector<MetricRow> rows;

  /// Arithmetic means of the rows (optionally restricted to one method).
  /// Infinite PSNR rows make the mean infinite.
  double mean_psnr(const std::string& method = {}) const;
  double mean_ssim(const std::string& method = {}) const;
  std::vector<std::string> methods() const;

  /// Header: image,method,scale,psnr_db,ssim
  std::string to_csv() const;
  /// Per-image aligned text plus aggregate lines.
  std::string to_text() const;
  /// Methods as columns, PSNR and SSIM as rows, the layout of the benchmark tables.
  std::string to_summary_table() const;
};

/// Pairs files of `sr_dir` and `hr_dir` by file stem. Throws IoError listing
/// every unmatched name. Rows are sorted by image id.
MetricReport evaluate_corpus(const std::filesystem::path& sr_dir, const std::filesystem::path& hr_dir,
                             const MetricOptions& options, const std::string& method = "model", int scale = 0,
                             int threads = 1);

}  // namespace scsr
