#include "scsr/scconv.hpp"

#include <fmt/format.h>

#include "scsr/errors.hpp"
#include "scsr/ops.hpp"

namespace scsr {

std::vector<Parameter*> SCBlockParams::parameters() {
  return {&f1.weight, &f1.bias, &f2.weight, &f2.bias, &f3.weight, &f3.bias, &f4.weight, &f4.bias, &act};
}

std::vector<const Parameter*> SCBlockParams::parameters() const {
  return {&f1.weight, &f1.bias, &f2.weight, &f2.bias, &f3.weight, &f3.bias, &f4.weight, &f4.bias, &act};
}

SCBlockParams make_sc_block(const std::string& prefix, int channels, int pool_rate, Rng& rng) {
  if (channels < 2 || channels % 2 != 0) {
    throw InvalidArgument(fmt::format("self-calibrated block needs an even channel count, got {}", channels));
  }
  if (pool_rate < 2) throw InvalidArgument(fmt::format("pool rate must be >= 2, got {}", pool_rate));
  const int half = channels / 2;
  SCBlockParams p{make_conv2d(prefix + ".f1", half, half, 3, 1, 1, rng),
                  make_conv2d(prefix + ".f2", half, half, 3, 1, 1, rng),
                  make_conv2d(prefix + ".f3", half, half, 3, 1, 1, rng),
                  make_conv2d(prefix + ".f4", half, half, 3, 1, 1, rng),
                  make_prelu_slope(prefix + ".act"),
                  pool_rate};
  return p;
}

Tensor sc_gate(const Tensor& x_a, const Conv2d& f1, int pool_rate) {
  const Shape s = x_a.shape();
  if (s.h % pool_rate != 0 || s.w % pool_rate != 0) {
    throw DimensionError(
        fmt::format("self-calibrated block: spatial dims {}x{} must be divisible by pool rate {}", s.h, s.w, pool_rate));
  }
  const Tensor pooled = ops::avg_pool2d(x_a, pool_rate);
  const Tensor up = ops::upsample_bilinear(f1(pooled), pool_rate);
  return ops::sigmoid(ops::add(x_a, up));
}

SCBranches sc_block_branches(const Tensor& x, const SCBlockParams& p) {
  const Shape s = x.shape();
  if (s.c % 2 != 0) throw DimensionError(fmt::format("self-calibrated block: odd channel count {}", s.c));
  if (s.c != p.channels()) {
    throw DimensionError(fmt::format("self-calibrated block: input has {} channels, block expects {}", s.c, p.channels()));
  }
  auto [x_a, x_b] = ops::split_channels(x, s.c / 2);
  const Tensor gate = sc_gate(x_a, p.f1, p.pool_rate);
  Tensor calibrated = p.f3(ops::mul(p.f2(x_a), gate));
  Tensor context = p.f4(x_b);
  return {std::move(calibrated), std::move(context)};
}

Tensor sc_block_forward(const Tensor& x, const SCBlockParams& p) {
  const SCBranches b = sc_block_branches(x, p);
  return ops::prelu(ops::concat_channels(b.calibrated, b.context), p.act.value());
}

}  // namespace scsr
