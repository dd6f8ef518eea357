#include "scsr/layers.hpp"

#include <cmath>

#include "scsr/ops.hpp"

namespace scsr {

namespace {

Tensor kaiming_normal(Shape shape, double fan_in, Rng& rng) {
  const double std_dev = std::sqrt(2.0 / fan_in);
  std::vector<double> values(shape.size());
  for (double& v : values) v = rng.normal(0.0, std_dev);
  return Tensor::from_data(shape, std::move(values));
}

}  // namespace

Tensor Conv2d::operator()(const Tensor& x) const { return ops::conv2d(x, weight.value(), bias.value(), stride, pad); }

Tensor ConvTranspose2d::operator()(const Tensor& x) const {
  return ops::conv2d_transposed(x, weight.value(), bias.value(), stride, pad);
}

Conv2d make_conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int pad,
                   Rng& rng, bool learnable) {
  const Shape ws{out_channels, in_channels, kernel, kernel};
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  return Conv2d{Parameter(name + ".weight", kaiming_normal(ws, fan_in, rng), learnable),
                Parameter(name + ".bias", Tensor::zeros({1, out_channels, 1, 1}), learnable), stride, pad};
}

ConvTranspose2d make_conv_transpose2d(const std::string& name, int in_channels, int out_channels, int kernel,
                                      int stride, int pad, Rng& rng) {
  const Shape ws{in_channels, out_channels, kernel, kernel};
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel / (static_cast<double>(stride) * stride);
  return ConvTranspose2d{Parameter(name + ".weight", kaiming_normal(ws, fan_in, rng)),
                         Parameter(name + ".bias", Tensor::zeros({1, out_channels, 1, 1})), stride, pad};
}

Parameter make_prelu_slope(const std::string& name, double init) { return Parameter(name, Tensor::scalar(init)); }

}  // namespace scsr
