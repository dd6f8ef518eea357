#include "scsr/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "scsr/errors.hpp"

namespace scsr {

namespace fs = std::filesystem;

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

void require_same_dims(const Image& a, const Image& b, const char* what) {
  if (a.empty() || b.empty()) throw DimensionError(fmt::format("{}: empty image", what));
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(
        fmt::format("{}: dimension mismatch {}x{} vs {}x{}", what, a.width(), a.height(), b.width(), b.height()));
  }
}

std::vector<Plane> planes(const Image& image, const MetricOptions& options) {
  const int border = options.border_crop;
  if (border < 0) throw InvalidArgument("border crop must be non-negative");
  const int w = image.width() - 2 * border;
  const int h = image.height() - 2 * border;
  if (w < 1 || h < 1) {
    throw DimensionError(fmt::format("border crop {} leaves nothing of a {}x{} image", border, image.width(), image.height()));
  }
  std::vector<Plane> out;
  if (options.channel == ChannelMode::Luma) {
    Plane p{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    const auto full = luma_plane(image);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        p.values[static_cast<std::size_t>(y) * w + x] = full[static_cast<std::size_t>(y + border) * image.width() + x + border];
      }
    }
    out.push_back(std::move(p));
    return out;
  }
  for (int c = 0; c < Image::kChannels; ++c) {
    Plane p{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) p.values[static_cast<std::size_t>(y) * w + x] = image.at(x + border, y + border, c);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> gaussian_taps() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable "valid" filtering with the normalized Gaussian window.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& g) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> horizontal(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * src[static_cast<std::size_t>(y) * w + x + k];
      horizontal[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * horizontal[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

double ssim_index(double mu_a, double mu_b, double ea2, double eb2, double eab) {
  const double var_a = ea2 - mu_a * mu_a;
  const double var_b = eb2 - mu_b * mu_b;
  const double cov = eab - mu_a * mu_b;
  const double num = (2.0 * (mu_a * mu_b) + kC1) * (2.0 * cov + kC2);
  const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
  return num / den;
}

double ssim_plane_global(const Plane& a, const Plane& b) {
  const double n = static_cast<double>(a.values.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double x = a.values[i];
    const double y = b.values[i];
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  return ssim_index(sa / n, sb / n, saa / n, sbb / n, sab / n);
}

double ssim_plane_gaussian(const Plane& a, const Plane& b, const std::vector<double>& g) {
  if (a.width < kWindow || a.height < kWindow) {
    throw DimensionError(fmt::format("ssim: image {}x{} smaller than the {}x{} window", a.width, a.height, kWindow, kWindow));
  }
  const std::size_t n = a.values.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.values[i] * a.values[i];
    bb[i] = b.values[i] * b.values[i];
    ab[i] = a.values[i] * b.values[i];
  }
  const auto mu_a = filter_valid(a.values, a.width, a.height, g);
  const auto mu_b = filter_valid(b.values, b.width, b.height, g);
  const auto e_aa = filter_valid(aa, a.width, a.height, g);
  const auto e_bb = filter_valid(bb, a.width, a.height, g);
  const auto e_ab = filter_valid(ab, a.width, a.height, g);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) total += ssim_index(mu_a[i], mu_b[i], e_aa[i], e_bb[i], e_ab[i]);
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

std::string to_string(ChannelMode mode) { return mode == ChannelMode::Rgb ? "rgb" : "luma"; }

ChannelMode parse_channel_mode(const std::string& text) {
  if (text == "rgb") return ChannelMode::Rgb;
  if (text == "luma") return ChannelMode::Luma;
  throw InvalidArgument(fmt::format("unknown channel convention '{}' (expected rgb or luma)", text));
}

std::vector<double> luma_plane(const Image& image) {
  std::vector<double> y(static_cast<std::size_t>(image.width()) * image.height());
  for (int row = 0; row < image.height(); ++row) {
    for (int x = 0; x < image.width(); ++x) {
      y[static_cast<std::size_t>(row) * image.width() + x] =
          (16.0 + 65.481 * image.at(x, row, 0) + 128.553 * image.at(x, row, 1) + 24.966 * image.at(x, row, 2)) / 255.0;
    }
  }
  return y;
}

double mse(const Image& a, const Image& b) {
  require_same_dims(a, b, "mse");
  double acc = 0.0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return acc / static_cast<double>(pa.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value < 0.0 || !std::isfinite(mse_value)) throw InvalidArgument("psnr: MSE must be finite and non-negative");
  if (mse_value == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse_value);
}

double psnr(const Image& a, const Image& b, const MetricOptions& options) {
  require_same_dims(a, b, "psnr");
  const auto pa = planes(a, options);
  const auto pb = planes(b, options);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < pa.size(); ++p) {
    for (std::size_t i = 0; i < pa[p].values.size(); ++i) {
      const double d = pa[p].values[i] - pb[p].values[i];
      acc += d * d;
    }
    count += pa[p].values.size();
  }
  return psnr_from_mse(acc / static_cast<double>(count));
}

double ssim(const Image& a, const Image& b, const MetricOptions& options) {
  require_same_dims(a, b, "ssim");
  const auto pa = planes(a, options);
  const auto pb = planes(b, options);
  const auto g = gaussian_taps();
  double total = 0.0;
  for (std::size_t p = 0; p < pa.size(); ++p) {
    total += options.window == SsimWindow::Global ? ssim_plane_global(pa[p], pb[p]) : ssim_plane_gaussian(pa[p], pb[p], g);
  }
  return total / static_cast<double>(pa.size());
}

std::string format_psnr(double db) { return std::isinf(db) ? std::string("inf") : fmt::format("{:.4f}", db); }

double MetricReport::mean_psnr(const std::string& method) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (!method.empty() && r.method != method) continue;
    acc += r.psnr_db;
    ++n;
  }
  if (n == 0) throw InvalidArgument("mean_psnr: no rows");
  return acc / static_cast<double>(n);
}

double MetricReport::mean_ssim(const std::string& method) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (!method.empty() && r.method != method) continue;
    acc += r.ssim;
    ++n;
  }
  if (n == 0) throw InvalidArgument("mean_ssim: no rows");
  return acc / static_cast<double>(n);
}

std::vector<std::string> MetricReport::methods() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.method) == out.end()) out.push_back(r.method);
  }
  return out;
}

std::string MetricReport::to_csv() const {
  std::string out = "image,method,scale,psnr_db,ssim\n";
  for (const auto& r : rows) out += fmt::format("{},{},{},{},{:.6f}\n", r.image, r.method, r.scale, format_psnr(r.psnr_db), r.ssim);
  return out;
}

std::string MetricReport::to_text() const {
  std::size_t name_width = 5;
  std::size_t method_width = 6;
  for (const auto& r : rows) {
    name_width = std::max(name_width, r.image.size());
    method_width = std::max(method_width, r.method.size());
  }
  std::string out = fmt::format("# dataset: {}  channel: {}  border crop: {}  ssim window: {}\n", dataset.empty() ? "-" : dataset,
                                to_string(options.channel), options.border_crop,
                                options.window == SsimWindow::Gaussian ? "gaussian11" : "global");
  out += fmt::format("{:<{}}  {:<{}}  {:>5}  {:>9}  {:>7}\n", "image", name_width, "method", method_width, "scale", "psnr_db", "ssim");
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}  {:<{}}  {:>5}  {:>9}  {:>7.4f}\n", r.image, name_width, r.method, method_width,
                       fmt::format("x{}", r.scale), format_psnr(r.psnr_db), r.ssim);
  }
  for (const auto& m : methods()) {
    out += fmt::format("mean {:<{}}  psnr_db {}  ssim {:.4f}\n", m, method_width, format_psnr(mean_psnr(m)), mean_ssim(m));
  }
  return out;
}

std::string MetricReport::to_summary_table() const {
  const auto ms = methods();
  const int scale = rows.empty() ? 0 : rows.front().scale;
  std::string out = fmt::format("Quantitative evaluation results in {}\n", dataset.empty() ? "-" : dataset);
  std::string header = fmt::format("{:<8}{:<7}", "Method", "Scale");
  std::string psnr_row = fmt::format("{:<8}{:<7}", "PSNR", fmt::format("x{}", scale));
  std::string ssim_row = fmt::format("{:<8}{:<7}", "SSIM", fmt::format("x{}", scale));
  for (const auto& m : ms) {
    const std::size_t width = std::max<std::size_t>(m.size(), 8) + 2;
    header += fmt::format("{:>{}}", m, width);
    const double p = mean_psnr(m);
    psnr_row += fmt::format("{:>{}}", std::isinf(p) ? std::string("inf") : fmt::format("{:.2f}", p), width);
    ssim_row += fmt::format("{:>{}}", fmt::format("{:.4f}", mean_ssim(m)), width);
  }
  out += header + "\n" + psnr_row + "\n" + ssim_row + "\n";
  out += fmt::format("(channel: {}, border crop: {})\n", to_string(options.channel), options.border_crop);
  return out;
}

MetricReport evaluate_corpus(const fs::path& sr_dir, const fs::path& hr_dir, const MetricOptions& options,
                             const std::string& method, int scale, int threads) {
  std::map<std::string, fs::path> sr_files;
  std::map<std::string, fs::path> hr_files;
  for (const auto& p : list_corpus(sr_dir)) sr_files[p.stem().string()] = p;
  for (const auto& p : list_corpus(hr_dir)) hr_files[p.stem().string()] = p;

  std::vector<std::string> unmatched;
  for (const auto& [id, path] : sr_files) {
    if (!hr_files.count(id)) unmatched.push_back(path.filename().string() + " (no HR counterpart)");
  }
  for (const auto& [id, path] : hr_files) {
    if (!sr_files.count(id)) unmatched.push_back(path.filename().string() + " (no SR counterpart)");
  }
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& u : unmatched) list += "\n  " + u;
    throw IoError(fmt::format("unmatched files between '{}' and '{}':{}", sr_dir.string(), hr_dir.string(), list));
  }
  if (sr_files.empty()) throw IoError(fmt::format("no images found in '{}'", sr_dir.string()));

  std::vector<std::string> ids;
  for (const auto& [id, path] : sr_files) ids.push_back(id);
  MetricReport report;
  report.dataset = hr_dir.filename().string();
  report.options = options;
  report.rows.resize(ids.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        const Image sr = load_image(sr_files.at(ids[i]));
        const Image hr = load_image(hr_files.at(ids[i]));
        report.rows[i] = {ids[i], method, scale, psnr(sr, hr, options), ssim(sr, hr, options)};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(ids.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return report;
}

}  // namespace scsr
