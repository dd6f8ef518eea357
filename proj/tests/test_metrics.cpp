#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "scsr/errors.hpp"
#include "scsr/metrics.hpp"
#include "scsr/rng.hpp"
#include "test_support.hpp"

using namespace scsr;

namespace {

Image noise_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Image img(w, h);
  for (double& v : img.pixels()) v = rng.uniform(lo, hi);
  return img;
}

Image binary_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = rng.uniform() < 0.5 ? 0.0 : 1.0;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
    }
  }
  return img;
}

Image map_image(const Image& src, const std::function<double(double)>& f) {
  Image out = src;
  for (double& v : out.pixels()) v = f(v);
  return out;
}

// Direct SSIM: for every window position the 121 Gaussian weights are
// evaluated in 2-D and the moments summed in place.
double ssim_direct(const Image& a, const Image& b) {
  double weights[11][11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      weights[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      total += weights[i][j];
    }
  }
  const double c1 = 1e-4, c2 = 9e-4;
  double acc = 0.0;
  long count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y0 = 0; y0 + 11 <= a.height(); ++y0) {
      for (int x0 = 0; x0 + 11 <= a.width(); ++x0) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const double w = weights[i][j] / total;
            const double u = a.at(x0 + j, y0 + i, c);
            const double v = b.at(x0 + j, y0 + i, c);
            ma += w * u;
            mb += w * v;
            aa += w * u * u;
            bb += w * v * v;
            ab += w * u * v;
          }
        }
        const double va = aa - ma * ma, vb = bb - mb * mb, cov = ab - ma * mb;
        acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace

TEST(Mse, Examples) {
  const Image a = noise_image(8, 6, 1);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(Image(5, 4, 0.0), Image(5, 4, 1.0)), 1.0);
  Image half(4, 4, 0.25);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) half.at(x, y, c) = 0.75;
    }
  }
  EXPECT_EQ(mse(half, Image(4, 4, 0.25)), 0.125);
  Image quarter(4, 4, 0.25);
  for (int x = 0; x < 4; ++x) {
    for (int c = 0; c < 3; ++c) quarter.at(x, 0, c) = 0.75;
  }
  EXPECT_EQ(mse(quarter, Image(4, 4, 0.25)), 0.0625);
  EXPECT_THROW(mse(Image(4, 4), Image(4, 5)), DimensionError);
}

TEST(Psnr, Examples) {
  EXPECT_EQ(psnr_from_mse(0.01), 20.0);
  EXPECT_EQ(psnr_from_mse(1.0), 0.0);
  EXPECT_EQ(psnr(Image(6, 6, 0.0), Image(6, 6, 1.0)), 0.0);
  EXPECT_NEAR(psnr(Image(6, 6, 0.3), Image(6, 6, 0.4)), 20.0, 1e-12);
  const Image a = noise_image(9, 7, 2);
  EXPECT_EQ(psnr(a, a), kInfinitePsnr);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_EQ(format_psnr(kInfinitePsnr), "inf");
  EXPECT_THROW(psnr_from_mse(-1.0), InvalidArgument);
  EXPECT_THROW(psnr(a, Image(9, 8)), DimensionError);
}

TEST(Psnr, PositiveForDistinctInRangeImages) {
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_GT(psnr(noise_image(8, 8, s), noise_image(8, 8, s + 100)), 0.0);
}

TEST(Psnr, StrictlyDecreasingOnPerturbationLadder) {
  const Image base = noise_image(24, 24, 3, 0.3, 0.7);
  Rng rng(4);
  std::vector<double> direction(base.pixels().size());
  for (double& d : direction) d = rng.uniform(-1.0, 1.0);
  double prev_mse = -1.0, prev_psnr = kInfinitePsnr;
  for (int step = 1; step <= 30; ++step) {
    Image p = base;
    for (std::size_t i = 0; i < direction.size(); ++i) p.pixels()[i] += 0.01 * step * direction[i];
    const double m = mse(base, p);
    const double db = psnr(base, p);
    EXPECT_GT(m, prev_mse);
    EXPECT_LT(db, prev_psnr);
    prev_mse = m;
    prev_psnr = db;
  }
}

TEST(Psnr, BorderCropAndLuma) {
  Image a(10, 10, 0.5);
  Image b = a;
  for (int c = 0; c < 3; ++c) b.at(0, 0, c) = 0.0;  // error only in the border
  EXPECT_TRUE(std::isfinite(psnr(a, b)));
  MetricOptions crop;
  crop.border_crop = 1;
  EXPECT_EQ(psnr(a, b, crop), kInfinitePsnr);
  crop.border_crop = 5;
  EXPECT_THROW(psnr(a, b, crop), DimensionError);

  MetricOptions luma;
  luma.channel = ChannelMode::Luma;
  // Uniform gray step of 0.1 -> luma step of 0.1 * 219 / 255.
  const double step = 0.1 * 219.0 / 255.0;
  EXPECT_NEAR(psnr(Image(4, 4, 0.3), Image(4, 4, 0.4), luma), 10.0 * std::log10(1.0 / (step * step)), 1e-9);
  EXPECT_NEAR(luma_plane(Image(1, 1, 0.0))[0], 16.0 / 255.0, 1e-15);
  EXPECT_NEAR(luma_plane(Image(1, 1, 1.0))[0], 235.0 / 255.0, 1e-12);
  EXPECT_EQ(parse_channel_mode("luma"), ChannelMode::Luma);
  EXPECT_THROW(parse_channel_mode("ycbcr"), InvalidArgument);
}

TEST(Ssim, IdenticalIsExactlyOne) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image a = noise_image(16 + static_cast<int>(s), 20, s);
    EXPECT_EQ(ssim(a, a), 1.0);
    MetricOptions global;
    global.window = SsimWindow::Global;
    EXPECT_EQ(ssim(a, a, global), 1.0);
  }
  EXPECT_EQ(ssim(Image(12, 12, 0.0), Image(12, 12, 0.0)), 1.0);
}

TEST(Ssim, MatchesDirectWindowEvaluation) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Image a = noise_image(19, 14, s);
    const Image b = noise_image(19, 14, s + 10);
    EXPECT_NEAR(ssim(a, b), ssim_direct(a, b), 1e-12);
  }
}

TEST(Ssim, SymmetricBitwise) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Image a = noise_image(16, 16, s);
    const Image b = noise_image(16, 16, s + 50);
    EXPECT_EQ(ssim(a, b), ssim(b, a));
    MetricOptions global;
    global.window = SsimWindow::Global;
    EXPECT_EQ(ssim(a, b, global), ssim(b, a, global));
  }
}

TEST(Ssim, InvertedBinaryPatternScoresLow) {
  const Image x = binary_image(32, 32, 7);
  const Image inv = map_image(x, [](double v) { return 1.0 - v; });
  const double s = ssim(x, inv);
  EXPECT_LT(s, 0.1);
  EXPECT_GE(s, -1.0);
}

TEST(Ssim, InRange) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const double v = ssim(noise_image(14, 14, s), noise_image(14, 14, s + 7));
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Ssim, ConstantOffsetWithMatchedMeans) {
  // b differs from a by a fine checkerboard, whose Gaussian-window mean is
  // negligible, so the local means match and only the offset-free contrast
  // and structure terms remain.
  const Image a = noise_image(32, 32, 9, 0.3, 0.6);
  Image b = a;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) b.at(x, y, c) += (x + y) % 2 ? 0.02 : -0.02;
    }
  }
  const double base = ssim(a, b);
  EXPECT_LT(base, 0.999);
  for (double offset : {-0.25, -0.1, 0.05, 0.3}) {
    const auto shift = [offset](double v) { return v + offset; };
    EXPECT_NEAR(ssim(map_image(a, shift), map_image(b, shift)), base, 1e-6) << offset;
  }
}

TEST(Ssim, DecreasesWithNoise) {
  const Image a = noise_image(24, 24, 11, 0.2, 0.8);
  Rng rng(12);
  std::vector<double> direction(a.pixels().size());
  for (double& d : direction) d = rng.uniform(-1.0, 1.0);
  double prev = 1.0;
  for (int step = 1; step <= 10; ++step) {
    Image b = a;
    for (std::size_t i = 0; i < direction.size(); ++i) b.pixels()[i] += 0.02 * step * direction[i];
    const double s = ssim(a, b);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(Ssim, TooSmallForWindow) {
  EXPECT_THROW(ssim(Image(10, 20), Image(10, 20)), DimensionError);
  MetricOptions global;
  global.window = SsimWindow::Global;
  EXPECT_NO_THROW(ssim(Image(4, 4, 0.2), Image(4, 4, 0.3), global));
}

TEST(Report, AggregatesAreRowMeans) {
  MetricReport r;
  Rng rng(13);
  for (int i = 0; i < 17; ++i) {
    r.rows.push_back({fmt::format("img{:02d}", i), i % 2 ? "a" : "b", 4, rng.uniform(20.0, 35.0), rng.uniform(0.5, 1.0)});
  }
  for (const std::string m : {"", "a", "b"}) {
    long double p = 0, s = 0;
    int n = 0;
    for (const auto& row : r.rows) {
      if (!m.empty() && row.method != m) continue;
      p += row.psnr_db;
      s += row.ssim;
      ++n;
    }
    EXPECT_NEAR(r.mean_psnr(m), static_cast<double>(p / n), 1e-12);
    EXPECT_NEAR(r.mean_ssim(m), static_cast<double>(s / n), 1e-12);
  }
  EXPECT_EQ(r.methods(), (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(r.to_csv().substr(0, 31), "image,method,scale,psnr_db,ssim");
  EXPECT_NE(r.to_summary_table().find("PSNR"), std::string::npos);
  EXPECT_THROW(MetricReport{}.mean_psnr(), InvalidArgument);
}

TEST(Report, SingleRowAggregateEqualsRow) {
  MetricReport r;
  r.rows.push_back({"baby", "bicubic", 4, 31.25, 0.9});
  EXPECT_EQ(r.mean_psnr(), 31.25);
  EXPECT_EQ(r.mean_ssim(), 0.9);
}

TEST(EvaluateCorpus, IdenticalPairs) {
  TempDir sr, hr;
  for (int i = 0; i < 3; ++i) {
    const Image img = noise_image(16, 16, static_cast<std::uint64_t>(i));
    save_image(img, sr / fmt::format("im{}.png", 2 - i));
    save_image(img, hr / fmt::format("im{}.png", 2 - i));
  }
  const MetricReport r = evaluate_corpus(sr.path(), hr.path(), MetricOptions{}, "identity", 4, 2);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].image, "im0");
  EXPECT_EQ(r.rows[2].image, "im2");
  for (const auto& row : r.rows) EXPECT_EQ(row.psnr_db, kInfinitePsnr);
  EXPECT_EQ(r.mean_ssim(), 1.0);
  EXPECT_NE(r.to_csv().find("im1,identity,4,inf,1.000000"), std::string::npos);
}

TEST(EvaluateCorpus, DeterministicAcrossThreadCounts) {
  TempDir sr, hr;
  for (int i = 0; i < 6; ++i) {
    save_image(noise_image(16, 16, static_cast<std::uint64_t>(i)), sr / fmt::format("p{}.png", i));
    save_image(noise_image(16, 16, static_cast<std::uint64_t>(i + 40)), hr / fmt::format("p{}.png", i));
  }
  const auto one = evaluate_corpus(sr.path(), hr.path(), MetricOptions{}, "m", 2, 1);
  const auto four = evaluate_corpus(sr.path(), hr.path(), MetricOptions{}, "m", 2, 4);
  EXPECT_EQ(one.to_csv(), four.to_csv());
}

TEST(EvaluateCorpus, UnmatchedFilesListed) {
  TempDir sr, hr;
  save_image(noise_image(12, 12, 1), sr / "shared.png");
  save_image(noise_image(12, 12, 1), hr / "shared.png");
  save_image(noise_image(12, 12, 2), sr / "only_sr.png");
  save_image(noise_image(12, 12, 3), hr / "only_hr.png");
  try {
    evaluate_corpus(sr.path(), hr.path(), MetricOptions{});
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("only_sr.png"), std::string::npos);
    EXPECT_NE(msg.find("only_hr.png"), std::string::npos);
  }
}
