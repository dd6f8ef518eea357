#pragma once

#include <string>
#include <vector>

#include "scsr/rng.hpp"
#include "scsr/tensor.hpp"

namespace scsr {

/// Convolution weights plus geometry. Weight layout [Cout, Cin, k, k].
struct Conv2d {
  Parameter weight;
  Parameter bias;
  int stride = 1;
  int pad = 0;

  Tensor operator()(const Tensor& x) const;
  int in_channels() const { return weight.shape().c; }
  int out_channels() const { return weight.shape().n; }
};

/// Transposed convolution. Weight layout [Cin, Cout, k, k].
struct ConvTranspose2d {
  Parameter weight;
  Parameter bias;
  int stride = 1;
  int pad = 0;

  Tensor operator()(const Tensor& x) const;
};

/// Kaiming fan-in normal weights (std = sqrt(2 / fan_in)) and zero bias.
/// Parameters are named "<name>.weight" and "<name>.bias".
Conv2d make_conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int pad,
                   Rng& rng, bool learnable = true);

/// fan_in counts the inputs that reach one output: Cin * k * k / stride^2.
ConvTranspose2d make_conv_transpose2d(const std::string& name, int in_channels, int out_channels, int kernel,
                                      int stride, int pad, Rng& rng);

Parameter make_prelu_slope(const std::string& name, double init = 0.25);

}  // namespace scsr
