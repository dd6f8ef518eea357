#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "scsr/errors.hpp"
#include "scsr/image.hpp"
#include "scsr/metrics.hpp"
#include "scsr/rng.hpp"
#include "scsr/verify/reference.hpp"
#include "test_support.hpp"

using namespace scsr;

namespace {

Image quantized_random(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (double& v : img.pixels()) v = static_cast<double>(rng.below(256)) / 255.0;
  return img;
}

double image_mean(const Image& img) {
  double acc = 0.0;
  for (double v : img.pixels()) acc += v;
  return acc / static_cast<double>(img.pixels().size());
}

bool in_unit_range(const Image& img) {
  for (double v : img.pixels()) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return true;
}

}  // namespace

TEST(ImageIo, PngRoundTripIsExactAtEightBits) {
  TempDir dir;
  const Image img = quantized_random(17, 9, 3);
  save_image(img, dir / "a.png");
  const Image back = load_image(dir / "a.png");
  EXPECT_EQ(back, img);
  EXPECT_EQ(back.source_depth(), 8);
}

TEST(ImageIo, PpmRoundTripIsExactAtEightBits) {
  TempDir dir;
  const Image img = quantized_random(5, 12, 4);
  save_image(img, dir / "a.ppm");
  EXPECT_EQ(load_image(dir / "a.ppm"), img);
}

TEST(ImageIo, EndpointsNormalize) {
  TempDir dir;
  write_bytes(dir / "e.ppm", std::string("P6\n2 1\n255\n") + std::string("\xff\xff\xff\x00\x00\x00", 6));
  const Image img = load_image(dir / "e.ppm");
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(img.at(0, 0, c), 1.0);
    EXPECT_EQ(img.at(1, 0, c), 0.0);
  }
}

TEST(ImageIo, GrayIsReplicated) {
  TempDir dir;
  write_bytes(dir / "g.pgm", std::string("P5\n3 1\n255\n") + std::string("\x10\x80\xf0", 3));
  const Image img = load_image(dir / "g.pgm");
  ASSERT_EQ(img.width(), 3);
  for (int x = 0; x < 3; ++x) {
    EXPECT_EQ(img.at(x, 0, 0), img.at(x, 0, 1));
    EXPECT_EQ(img.at(x, 0, 0), img.at(x, 0, 2));
  }
  EXPECT_EQ(img.at(1, 0, 0), 128.0 / 255.0);

  // Gray survives a PNG round trip as three equal channels too.
  save_image(img, dir / "g.png");
  EXPECT_EQ(load_image(dir / "g.png"), img);
}

TEST(ImageIo, RejectsBadFiles) {
  TempDir dir;
  write_bytes(dir / "t.ppm", std::string("P6\n4 4\n255\n") + std::string(10, '\x01'));
  EXPECT_THROW(load_image(dir / "t.ppm"), IoError);
  write_bytes(dir / "z.ppm", "P6\n0 4\n255\n");
  EXPECT_THROW(load_image(dir / "z.ppm"), IoError);
  write_bytes(dir / "x.bmp", "BM");
  EXPECT_THROW(load_image(dir / "x.bmp"), IoError);
  EXPECT_THROW(load_image(dir / "missing.png"), IoError);

  save_image(quantized_random(8, 8, 1), dir / "ok.png");
  const std::string bytes = read_bytes(dir / "ok.png");
  write_bytes(dir / "cut.png", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_image(dir / "cut.png"), IoError);
  EXPECT_THROW(save_image(quantized_random(2, 2, 1), dir / "out.bmp"), IoError);
}

TEST(Bicubic, ConstantStaysConstant) {
  const Image img(13, 7, 0.42);
  for (auto [w, h] : {std::pair{13, 7}, {26, 14}, {5, 3}, {40, 2}}) {
    const Image out = bicubic_resize(img, w, h);
    for (double v : out.pixels()) EXPECT_NEAR(v, 0.42, 1e-12);
  }
}

TEST(Bicubic, SameSizeIsIdentity) {
  const Image img = quantized_random(11, 6, 9);
  EXPECT_EQ(bicubic_resize(img, 11, 6), img);
}

TEST(Bicubic, RampStaysLinearUnderUpscale) {
  const int w = 16;
  Image img(w, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.1 + 0.05 * x;
    }
  }
  const Image out = bicubic_resize(img, 2 * w, 8);
  // Interior samples (away from the reflected border) follow the ramp exactly.
  for (int x = 4; x < 2 * w - 4; ++x) {
    const double source = (x + 0.5) / 2.0 - 0.5;
    EXPECT_NEAR(out.at(x, 3, 0), 0.1 + 0.05 * source, 1e-12) << x;
  }
}

TEST(Bicubic, TapsArePartitionOfUnity) {
  for (auto [in, out] : {std::pair{10, 40}, {40, 10}, {128, 32}, {33, 17}, {7, 7}, {5, 64}}) {
    for (const auto& row : resample_taps(in, out)) {
      double total = 0.0;
      for (const auto& tap : row) {
        total += tap.weight;
        EXPECT_GE(tap.index, 0);
        EXPECT_LT(tap.index, in);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Bicubic, KernelShape) {
  EXPECT_EQ(cubic_kernel(0.0), 1.0);
  EXPECT_EQ(cubic_kernel(1.0), 0.0);
  EXPECT_EQ(cubic_kernel(2.0), 0.0);
  EXPECT_EQ(cubic_kernel(0.5), cubic_kernel(-0.5));
  EXPECT_DOUBLE_EQ(cubic_kernel(0.5), 0.5625);
  EXPECT_DOUBLE_EQ(cubic_kernel(1.5), -0.0625);
}

TEST(Bicubic, ReflectIndex) {
  EXPECT_EQ(reflect_index(-1, 5), 0);
  EXPECT_EQ(reflect_index(-2, 5), 1);
  EXPECT_EQ(reflect_index(5, 5), 4);
  EXPECT_EQ(reflect_index(6, 5), 3);
  EXPECT_EQ(reflect_index(3, 5), 3);
}

TEST(Bicubic, MatchesDirectTwoDimensionalResampler) {
  const Image img = synthetic_image(21, 96);
  for (auto [w, h] : {std::pair{24, 24}, {48, 32}, {192, 150}, {96, 96}}) {
    EXPECT_LE(verify::max_abs_diff(bicubic_resize(img, w, h), verify::bicubic_resize_direct(img, w, h)), 1e-12);
  }
}

TEST(Bicubic, DownUpPsnrAgreesWithDirectResampler) {
  // Down-then-up x4 through both resamplers; the fast path must land within
  // 0.5 dB of the direct one. Uses the benchmark "baby" image when available.
  Image img = synthetic_image(5, 256);
  if (const char* root = std::getenv("SCSR_BENCHMARK_ROOT")) {
    const auto baby = std::filesystem::path(root) / "Set5" / "baby.png";
    if (std::filesystem::exists(baby)) img = modcrop(load_image(baby), 4);
  }
  const int w = img.width(), h = img.height();
  const Image fast = bicubic_resize(bicubic_resize(img, w / 4, h / 4), w, h);
  const Image slow = verify::bicubic_resize_direct(verify::bicubic_resize_direct(img, w / 4, h / 4), w, h);
  EXPECT_NEAR(psnr(fast, img), psnr(slow, img), 0.5);
}

TEST(Bicubic, OutputClamped) {
  Image img(8, 8, 0.0);
  for (int y = 0; y < 8; ++y) {
    for (int c = 0; c < 3; ++c) img.at(4, y, c) = 1.0;  // sharp line overshoots
  }
  EXPECT_TRUE(in_unit_range(bicubic_resize(img, 29, 29)));
}

TEST(Crop, Deterministic) {
  const Image img = synthetic_image(1, 64);
  EXPECT_EQ(random_crop(img, 20, 77), random_crop(img, 20, 77));
  EXPECT_EQ(random_crop(img, 64, 5), img);
  EXPECT_THROW(random_crop(img, 65, 1), DimensionError);
}

TEST(Crop, AlwaysInsideBounds) {
  Image img(40, 23);
  for (int y = 0; y < 23; ++y) {
    for (int x = 0; x < 40; ++x) img.at(x, y, 0) = (y * 40 + x) / 1000.0;
  }
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Image c = random_crop(img, 16, seed);
    ASSERT_EQ(c.width(), 16);
    ASSERT_EQ(c.height(), 16);
    const int origin = static_cast<int>(std::lround(c.at(0, 0, 0) * 1000.0));
    const int x0 = origin % 40;
    const int y0 = origin / 40;
    ASSERT_LE(x0 + 16, 40);
    ASSERT_LE(y0 + 16, 23);
  }
}

TEST(Crop, Modcrop) {
  const Image img = synthetic_image(2, 50);
  const Image m = modcrop(crop(img, 0, 0, 50, 47), 4);
  EXPECT_EQ(m.width(), 48);
  EXPECT_EQ(m.height(), 44);
}

TEST(Pairs, ShapesFollowScale) {
  const Image img = synthetic_image(3, 256);
  for (int r : {2, 4, 8}) {
    const ImagePair p = make_pair(img, PairSpec{r, 128, 9});
    EXPECT_EQ(p.hr.width(), 128);
    EXPECT_EQ(p.hr.height(), 128);
    EXPECT_EQ(p.lr.width(), 128 / r);
    EXPECT_EQ(p.lr.height(), 128 / r);
    EXPECT_TRUE(in_unit_range(p.lr));
  }
}

TEST(Pairs, ScaleOneIsIdentity) {
  const ImagePair p = make_pair(synthetic_image(4, 64), PairSpec{1, 32, 2});
  EXPECT_EQ(p.lr, p.hr);
}

TEST(Pairs, Deterministic) {
  const Image img = synthetic_image(6, 200);
  const ImagePair a = make_pair(img, PairSpec{4, 128, 31});
  const ImagePair b = make_pair(img, PairSpec{4, 128, 31});
  EXPECT_EQ(a.lr, b.lr);
  EXPECT_EQ(a.hr, b.hr);
}

TEST(Pairs, InvalidSpecs) {
  EXPECT_THROW((PairSpec{3, 128, 0}.validate()), InvalidArgument);
  EXPECT_THROW((PairSpec{4, 126, 0}.validate()), InvalidArgument);
  EXPECT_THROW(make_pair(synthetic_image(1, 64), PairSpec{4, 128, 0}), DimensionError);
}

TEST(Pairs, MeanPreservedOnCorpus) {
  for (const Image& img : synthetic_corpus(8, 77)) {
    const ImagePair p = make_pair(img, PairSpec{4, 128, 5});
    EXPECT_NEAR(image_mean(p.lr), image_mean(p.hr), 1e-2);
  }
}

TEST(TensorConversion, RoundTripAndLayout) {
  std::vector<Image> batch{quantized_random(6, 4, 1), quantized_random(6, 4, 2)};
  const Tensor t = to_tensor(batch);
  EXPECT_EQ(t.shape(), (Shape{2, 3, 4, 6}));
  EXPECT_EQ(t.at(1, 2, 3, 5), batch[1].at(5, 3, 2));
  const auto back = from_tensor(t);
  EXPECT_EQ(back[0], batch[0]);
  EXPECT_EQ(back[1], batch[1]);
}

TEST(TensorConversion, ClampsAndKeepsChannelOrder) {
  std::vector<double> v(12, 0.0);
  v[0] = 1.7;
  v[1] = -0.2;
  const auto img = from_tensor(Tensor::from_data({1, 3, 2, 2}, v)).front();
  EXPECT_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_EQ(img.at(1, 0, 0), 0.0);

  Image red(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) red.at(x, y, 0) = 0.9;
  }
  const Tensor rt = to_tensor(red);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) EXPECT_EQ(rt.at(0, c, y, x) != 0.0, c == 0);
    }
  }
}

TEST(TensorConversion, RaggedBatchRejected) {
  std::vector<Image> batch{Image(4, 4), Image(4, 5)};
  EXPECT_THROW(to_tensor(batch), DimensionError);
}

TEST(Synthetic, DeterministicAndInRange) {
  const Image a = synthetic_image(12);
  EXPECT_EQ(a, synthetic_image(12));
  EXPECT_FALSE(a == synthetic_image(13));
  EXPECT_EQ(a.width(), 256);
  EXPECT_TRUE(in_unit_range(a));
}

TEST(Corpus, ManifestOrSortedListing) {
  TempDir dir;
  save_image(Image(4, 4, 0.5), dir / "b.png");
  save_image(Image(4, 4, 0.5), dir / "a.ppm");
  write_bytes(dir / "notes.txt", "x");
  auto files = list_corpus(dir.path());
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files[0].filename(), "a.ppm");
  EXPECT_EQ(files[1].filename(), "b.png");

  const std::vector<std::string> order{"b.png"};
  write_corpus_manifest(dir.path(), order);
  files = list_corpus(dir.path());
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].filename(), "b.png");
}
