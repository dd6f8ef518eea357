#pragma once

#include <string>
#include <vector>

#include "scsr/layers.hpp"
#include "scsr/tensor.hpp"

namespace scsr {

/// One self-calibrated convolution block.
///
/// The input's channels are split in two equal halves. The first half runs the
/// calibration path: a gate computed from a pooled-then-upsampled view of the
/// input (portion f1) modulates a plain 3x3 response (f2), followed by another
/// 3x3 convolution (f3). The second half runs a single 3x3 convolution (f4)
/// that keeps the original spatial context. Both halves are concatenated and
/// passed through one PReLU.
struct SCBlockParams {
  Conv2d f1;
  Conv2d f2;
  Conv2d f3;
  Conv2d f4;
  Parameter act;
  int pool_rate = 4;

  /// Full block channel count C (each portion works on C / 2).
  int channels() const { return 2 * f2.in_channels(); }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

/// Kaiming-initialized block named "<prefix>.f1.weight" ... "<prefix>.act".
SCBlockParams make_sc_block(const std::string& prefix, int channels, int pool_rate, Rng& rng);

/// sigmoid(x_a + up(f1(avg_pool(x_a)))); same shape as x_a, values in (0, 1).
Tensor sc_gate(const Tensor& x_a, const Conv2d& f1, int pool_rate);

struct SCBranches {
  Tensor calibrated;  // f3(f2(x_a) * gate)
  Tensor context;     // f4(x_b)
};

SCBranches sc_block_branches(const Tensor& x, const SCBlockParams& p);

/// prelu(concat(calibrated, context)); output shape equals input shape.
Tensor sc_block_forward(const Tensor& x, const SCBlockParams& p);

}  // namespace scsr
