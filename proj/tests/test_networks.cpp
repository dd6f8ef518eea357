#include <gtest/gtest.h>

#include <cmath>

#include "scsr/errors.hpp"
#include "scsr/networks.hpp"
#include "scsr/ops.hpp"
#include "scsr/verify/gradcheck.hpp"
#include "test_support.hpp"

using namespace scsr;
using verify::random_tensor;

namespace {

GeneratorConfig tiny_generator(int scale = 2) {
  GeneratorConfig c;
  c.scale = scale;
  c.n_sc_blocks = 1;
  c.base_channels = 8;
  c.pool_rate = 4;
  return c;
}

DiscriminatorConfig tiny_discriminator() {
  DiscriminatorConfig c;
  c.channels = {4, 8};
  return c;
}

Tensor uniform_image(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(s.size());
  for (double& x : v) x = rng.uniform();
  return Tensor::from_data(s, std::move(v));
}

void expect_same_params(const std::vector<const Parameter*>& a, const std::vector<const Parameter*>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name(), b[i]->name());
    EXPECT_EQ(a[i]->shape(), b[i]->shape());
    EXPECT_EQ(a[i]->value().to_vector(), b[i]->value().to_vector()) << a[i]->name();
  }
}

}  // namespace

TEST(Generator, ScaleContract) {
  for (int r : {2, 4, 8}) {
    GeneratorConfig c = tiny_generator(r);
    const GeneratorParams g = init_generator(c, 1);
    for (auto [h, w] : {std::pair{8, 8}, {4, 12}}) {
      const Tensor y = generator_forward(uniform_image({2, 3, h, w}, 2), g);
      EXPECT_EQ(y.shape(), (Shape{2, 3, r * h, r * w}));
    }
  }
}

TEST(Generator, DefaultConfigShapeAndRange) {
  GeneratorConfig c;
  c.scale = 4;
  const GeneratorParams g = init_generator(c, 3);
  const Tensor y = generator_forward(uniform_image({1, 3, 32, 32}, 4), g);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 128, 128}));
  for (double v : y.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Generator, ParameterCountDifferenceIsOneStage) {
  GeneratorConfig c2 = tiny_generator(2);
  GeneratorConfig c4 = tiny_generator(4);
  c2.base_channels = c4.base_channels = 16;
  const std::size_t n2 = init_generator(c2, 1).parameter_count();
  const std::size_t n4 = init_generator(c4, 1).parameter_count();
  const std::size_t ch = 16;
  // One stage: C x C x 4 x 4 transposed kernel, C biases, one PReLU slope.
  EXPECT_EQ(n4 - n2, ch * ch * 16 + ch + 1);
}

TEST(Generator, RejectsNonDivisibleInput) {
  const GeneratorParams g = init_generator(tiny_generator(), 1);
  try {
    generator_forward(uniform_image({1, 3, 10, 8}, 1), g);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("divisible by 4"), std::string::npos) << e.what();
  }
}

TEST(Generator, ConfigValidation) {
  GeneratorConfig c = tiny_generator();
  c.scale = 3;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = tiny_generator();
  c.base_channels = 7;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Init, Deterministic) {
  const GeneratorParams a = init_generator(tiny_generator(), 9);
  const GeneratorParams b = init_generator(tiny_generator(), 9);
  expect_same_params(a.parameters(), b.parameters());
  const GeneratorParams c = init_generator(tiny_generator(), 10);
  EXPECT_NE(a.head.weight.value().to_vector(), c.head.weight.value().to_vector());
}

TEST(Init, KaimingVarianceBiasAndSlope) {
  GeneratorConfig c;
  c.scale = 2;
  const GeneratorParams g = init_generator(c, 5);
  auto variance = [](const Parameter& p) {
    double acc = 0.0;
    for (double v : p.value().data()) acc += v * v;
    return acc / static_cast<double>(p.value().size());
  };
  // 64 x 64 x 3 x 3 block convs: fan_in = 32 * 9 for the half-width portions.
  const double block_var = variance(g.blocks[0].f2.weight);
  EXPECT_NEAR(block_var, 2.0 / (32.0 * 9.0), 0.1 * 2.0 / (32.0 * 9.0));
  const double up_var = variance(g.reconstruction[0].upsample.weight);
  EXPECT_NEAR(up_var, 2.0 / (64.0 * 16.0 / 4.0), 0.1 * 2.0 / (64.0 * 16.0 / 4.0));
  for (double v : g.blocks[0].f2.bias.value().data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.blocks[0].act.value().item(), 0.25);
  EXPECT_EQ(g.reconstruction[0].act.value().item(), 0.25);
}

TEST(Init, ZeroInputGivesFiniteOutput) {
  const Tensor y = generator_forward(Tensor::zeros({1, 3, 8, 8}), init_generator(tiny_generator(4), 2));
  for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Generator, CloneIsDeep) {
  GeneratorParams g = init_generator(tiny_generator(), 1);
  GeneratorParams copy = g.clone();
  copy.head.weight.mutable_data()[0] += 1.0;
  EXPECT_NE(copy.head.weight.value().data()[0], g.head.weight.value().data()[0]);
}

TEST(Discriminator, AcceptsVariableSizes) {
  const DiscriminatorParams d = init_discriminator(DiscriminatorConfig{}, 1);
  for (int s : {96, 128}) {
    const Tensor y = discriminator_forward(uniform_image({2, 3, s, s}, 3), d);
    EXPECT_EQ(y.shape(), (Shape{2, 1, 1, 1}));
    for (double v : y.data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  EXPECT_EQ(discriminator_forward(uniform_image({1, 3, 64, 80}, 3), d).shape(), (Shape{1, 1, 1, 1}));
}

TEST(Discriminator, StructureFollowsConfig) {
  const DiscriminatorConfig config;
  const DiscriminatorParams d = init_discriminator(config, 1);
  ASSERT_EQ(d.features.size(), 4u);
  for (const Conv2d& conv : d.features) {
    EXPECT_EQ(conv.weight.shape().h, 5);
    EXPECT_EQ(conv.stride, 2);
  }
  EXPECT_EQ(d.head.weight.shape(), (Shape{1, 512, 1, 1}));
  EXPECT_EQ(config.n_layers(), 5);
  // Valid 5x5 stride-2 layers: 1 <- 5 <- 13 <- 29 <- 61.
  EXPECT_EQ(config.min_input_size(), 61);
  EXPECT_EQ(tiny_discriminator().min_input_size(), 13);
}

TEST(Discriminator, RejectsTooSmallInput) {
  const DiscriminatorParams d = init_discriminator(DiscriminatorConfig{}, 1);
  EXPECT_THROW(discriminator_forward(uniform_image({1, 3, 60, 96}, 1), d), DimensionError);
  EXPECT_NO_THROW(discriminator_forward(uniform_image({1, 3, 61, 61}, 1), d));
}

TEST(Discriminator, BatchPermutationPermutesScores) {
  const DiscriminatorParams d = init_discriminator(tiny_discriminator(), 2);
  const Tensor a = uniform_image({1, 3, 16, 16}, 1);
  const Tensor b = uniform_image({1, 3, 16, 16}, 2);
  auto stack = [](const Tensor& first, const Tensor& second) {
    std::vector<double> v = first.to_vector();
    const std::vector<double> w = second.to_vector();
    v.insert(v.end(), w.begin(), w.end());
    return Tensor::from_data({2, 3, 16, 16}, std::move(v));
  };
  const Tensor ab = discriminator_forward(stack(a, b), d);
  const Tensor ba = discriminator_forward(stack(b, a), d);
  EXPECT_EQ(ab.data()[0], ba.data()[1]);
  EXPECT_EQ(ab.data()[1], ba.data()[0]);
}

TEST(Discriminator, TilingInvariance) {
  // A periodic pattern scores the same when padded with more of its own tiling.
  const DiscriminatorParams d = init_discriminator(DiscriminatorConfig{}, 4);
  const int period = 16;
  const Tensor tile = uniform_image({1, 3, period, period}, 8);
  auto tiled = [&](int size) {
    std::vector<double> v(static_cast<std::size_t>(3 * size * size));
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          v[(static_cast<std::size_t>(c) * size + y) * size + x] = tile.at(0, c, y % period, x % period);
        }
      }
    }
    return Tensor::from_data({1, 3, size, size}, std::move(v));
  };
  const double small = discriminator_forward(tiled(128), d).item();
  const double large = discriminator_forward(tiled(384), d).item();
  EXPECT_NEAR(small, large, 1e-3);
}

TEST(NetworkGradient, TinyGeneratorEndToEnd) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorParams g = init_generator(tiny_generator(), seed);
    Rng rng(seed + 100);
    for (Parameter* p : g.parameters()) {
      for (double& v : p->mutable_data()) v += rng.normal(0.0, 0.05);
    }
    const Tensor x = uniform_image({1, 3, 8, 8}, seed);
    const Tensor probe = random_tensor({1, 3, 16, 16}, seed + 1);
    auto loss = [&](const Tensor& in) { return ops::sum(ops::mul(generator_forward(in, g), probe)); };
    const auto params = verify::check_parameter_gradients("generator params", [&] { return loss(x); },
                                                          g.parameters(), {.max_coords = 60, .seed = seed});
    EXPECT_TRUE(params.passed) << verify::format_result(params);
    const auto input = verify::check_gradients(
        "generator input", [&](const std::vector<Tensor>& in) { return loss(in[0]); }, {x});
    EXPECT_TRUE(input.passed) << verify::format_result(input);
  }
}

TEST(NetworkGradient, TinyGeneratorEveryParameter) {
  GeneratorParams g = init_generator(tiny_generator(), 77);
  const Tensor x = uniform_image({1, 3, 8, 8}, 78);
  const Tensor probe = random_tensor({1, 3, 16, 16}, 79);
  const auto r = verify::check_parameter_gradients(
      "generator all params", [&] { return ops::sum(ops::mul(generator_forward(x, g), probe)); }, g.parameters());
  EXPECT_TRUE(r.passed) << verify::format_result(r);
  EXPECT_EQ(r.checked, g.parameter_count());
}

TEST(NetworkGradient, TinyDiscriminatorEndToEnd) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DiscriminatorParams d = init_discriminator(tiny_discriminator(), seed);
    Rng rng(seed + 100);
    for (Parameter* p : d.parameters()) {
      for (double& v : p->mutable_data()) v += rng.normal(0.0, 0.05);
    }
    const Tensor x = uniform_image({2, 3, 16, 16}, seed);
    auto loss = [&](const Tensor& in) { return ops::sum(discriminator_forward(in, d)); };
    const auto params = verify::check_parameter_gradients("discriminator params", [&] { return loss(x); },
                                                          d.parameters());
    EXPECT_TRUE(params.passed) << verify::format_result(params);
    const auto input = verify::check_gradients(
        "discriminator input", [&](const std::vector<Tensor>& in) { return loss(in[0]); }, {x});
    EXPECT_TRUE(input.passed) << verify::format_result(input);
  }
}

TEST(Checkpoint, RoundTripIsBitwise) {
  TempDir dir;
  GeneratorParams g = init_generator(tiny_generator(4), 3);
  Rng rng(1);
  for (Parameter* p : g.parameters()) {
    for (double& v : p->mutable_data()) v += rng.normal(0.0, 1e-3);
  }
  save_checkpoint(make_checkpoint(g, 1234), dir / "g.ckpt");
  const ModelCheckpoint loaded = load_checkpoint(dir / "g.ckpt");
  EXPECT_EQ(loaded.kind, "generator");
  EXPECT_EQ(loaded.rng_state, 1234u);
  const GeneratorParams back = generator_from_checkpoint(loaded);
  EXPECT_EQ(back.config, g.config);
  expect_same_params(std::as_const(back).parameters(), std::as_const(g).parameters());

  const DiscriminatorParams d = init_discriminator(tiny_discriminator(), 5);
  save_checkpoint(make_checkpoint(d), dir / "d.ckpt");
  const DiscriminatorParams d_back = discriminator_from_checkpoint(load_checkpoint(dir / "d.ckpt"));
  expect_same_params(d_back.parameters(), d.parameters());
  // Saving the reloaded model again reproduces the file byte for byte.
  save_checkpoint(make_checkpoint(back, 1234), dir / "g2.ckpt");
  EXPECT_EQ(read_bytes(dir / "g.ckpt"), read_bytes(dir / "g2.ckpt"));
}

namespace {

CheckpointError::Kind load_error(const std::filesystem::path& path) {
  try {
    (void)generator_from_checkpoint(load_checkpoint(path));
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no CheckpointError for " << path;
  return CheckpointError::Kind::Corrupt;
}

}  // namespace

TEST(Checkpoint, CorruptFilesRejected) {
  TempDir dir;
  save_checkpoint(make_checkpoint(init_generator(tiny_generator(), 1)), dir / "ok.ckpt");
  const std::string bytes = read_bytes(dir / "ok.ckpt");

  write_bytes(dir / "short.ckpt", bytes.substr(0, bytes.size() - 100));
  EXPECT_EQ(load_error(dir / "short.ckpt"), CheckpointError::Kind::Corrupt);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  write_bytes(dir / "flip.ckpt", flipped);
  EXPECT_EQ(load_error(dir / "flip.ckpt"), CheckpointError::Kind::Corrupt);

  std::string magic = bytes;
  magic[0] = 'X';
  write_bytes(dir / "magic.ckpt", magic);
  EXPECT_EQ(load_error(dir / "magic.ckpt"), CheckpointError::Kind::Corrupt);

  std::string version = bytes;
  version[4] = 9;
  write_bytes(dir / "version.ckpt", version);
  EXPECT_EQ(load_error(dir / "version.ckpt"), CheckpointError::Kind::VersionMismatch);

  write_bytes(dir / "empty.ckpt", "");
  EXPECT_EQ(load_error(dir / "empty.ckpt"), CheckpointError::Kind::Corrupt);
}

TEST(Checkpoint, ConfigAndShapeMismatchRejected) {
  const ModelCheckpoint r2 = make_checkpoint(init_generator(tiny_generator(2), 1));
  try {
    generator_from_checkpoint(r2, tiny_generator(4));
    FAIL() << "expected config mismatch";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::ConfigMismatch);
  }

  ModelCheckpoint bad_shape = r2;
  bad_shape.params[0].shape.n += 1;
  bad_shape.params[0].values.resize(bad_shape.params[0].shape.size());
  try {
    generator_from_checkpoint(bad_shape);
    FAIL() << "expected shape mismatch";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::ShapeMismatch);
  }

  ModelCheckpoint missing = r2;
  missing.params.pop_back();
  EXPECT_THROW(generator_from_checkpoint(missing), CheckpointError);

  const ModelCheckpoint d = make_checkpoint(init_discriminator(tiny_discriminator(), 1));
  EXPECT_THROW(generator_from_checkpoint(d), CheckpointError);
}
