#pragma once

#include <utility>

#include "scsr/tensor.hpp"

// Differentiable primitives. Every op validates shapes (DimensionError) and
// rejects non-finite inputs or outputs (NumericError).
namespace scsr::ops {

/// Cross-correlation with zero padding. w is [Cout, Cin, kH, kW], b holds Cout values.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

/// Adjoint of conv2d for the same weight layout: w is [Cin, Cout, kH, kW] where
/// Cin is the channel count of x. Output extent is (H-1)*stride - 2*pad + kH.
Tensor conv2d_transposed(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

/// Mean over non-overlapping rate x rate windows.
Tensor avg_pool2d(const Tensor& x, int rate);

/// Bilinear upsampling with half-pixel centers (align_corners = false) and
/// edge clamping.
Tensor upsample_bilinear(const Tensor& x, int rate);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
/// slope is a single-element tensor shared over all channels.
Tensor prelu(const Tensor& x, const Tensor& slope);
Tensor softplus(const Tensor& x);

Tensor add(const Tensor& x, const Tensor& y);
Tensor sub(const Tensor& x, const Tensor& y);
Tensor mul(const Tensor& x, const Tensor& y);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor square(const Tensor& x);

Tensor concat_channels(const Tensor& x, const Tensor& y);
/// First k channels and the remaining C - k channels.
std::pair<Tensor, Tensor> split_channels(const Tensor& x, int k);

/// Scalar (1x1x1x1) reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean over H and W: [N,C,H,W] -> [N,C,1,1].
Tensor spatial_mean(const Tensor& x);

}  // namespace scsr::ops
