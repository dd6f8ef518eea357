#pragma once

#include "scsr/image.hpp"
#include "scsr/scconv.hpp"
#include "scsr/tensor.hpp"

// Slow, direct implementations used only to check the fast paths. They take
// and return plain values (no graph is recorded) and share no code with the
// library kernels.
namespace scsr::verify {

/// Seven-loop cross-correlation with explicit zero padding.
Tensor conv2d_loops(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

/// Transposed convolution computed a second way: zero-stuff the input by the
/// stride, pad by k - 1, correlate with the flipped and channel-swapped kernel,
/// then crop `pad` from every side.
Tensor conv2d_transposed_stuffed(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

Tensor avg_pool_loops(const Tensor& x, int rate);

/// Half-pixel bilinear upsampling evaluated one output sample at a time.
Tensor upsample_bilinear_loops(const Tensor& x, int rate);

/// The self-calibrated block written out with the functions above and scalar
/// sigmoid/PReLU.
Tensor sc_block_loops(const Tensor& x, const SCBlockParams& p);

/// Non-separable bicubic resize: every output sample sums the 2-D product
/// kernel over its full support, normalized by the 2-D weight total.
Image bicubic_resize_direct(const Image& image, int out_width, int out_height);

/// <a, b> over all elements.
double inner_product(const Tensor& a, const Tensor& b);

/// Largest absolute elementwise difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs_diff(const Image& a, const Image& b);

}  // namespace scsr::verify
