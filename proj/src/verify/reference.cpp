#include "scsr/verify/reference.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "scsr/errors.hpp"

namespace scsr::verify {

namespace {

struct Grid {
  Shape shape;
  std::vector<double> v;

  explicit Grid(Shape s) : shape(s), v(s.size(), 0.0) {}
  explicit Grid(const Tensor& t) : shape(t.shape()), v(t.to_vector()) {}

  double& operator()(int n, int c, int h, int w) {
    return v[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + h) * shape.w + w];
  }
  double operator()(int n, int c, int h, int w) const {
    return v[((static_cast<std::size_t>(n) * shape.c + c) * shape.h + h) * shape.w + w];
  }
  Tensor tensor() const { return Tensor::from_data(shape, v); }
};

double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Tensor conv2d_loops(const Tensor& x_t, const Tensor& w_t, const Tensor& b_t, int stride, int pad) {
  const Grid x(x_t);
  const Grid w(w_t);
  const std::vector<double> b = b_t.to_vector();
  const Shape xs = x.shape;
  const Shape ws = w.shape;
  if (ws.c != xs.c) throw DimensionError("conv2d_loops: channel mismatch");
  const int oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  const int ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  Grid y(Shape{xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n) {
    for (int co = 0; co < ws.n; ++co) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          double acc = b[co];
          for (int ci = 0; ci < xs.c; ++ci) {
            for (int u = 0; u < ws.h; ++u) {
              for (int v = 0; v < ws.w; ++v) {
                const int r = i * stride + u - pad;
                const int s = j * stride + v - pad;
                if (r < 0 || r >= xs.h || s < 0 || s >= xs.w) continue;
                acc += x(n, ci, r, s) * w(co, ci, u, v);
              }
            }
          }
          y(n, co, i, j) = acc;
        }
      }
    }
  }
  return y.tensor();
}

Tensor conv2d_transposed_stuffed(const Tensor& x_t, const Tensor& w_t, const Tensor& b_t, int stride, int pad) {
  const Grid x(x_t);
  const Grid w(w_t);
  const std::vector<double> b = b_t.to_vector();
  const Shape xs = x.shape;
  const Shape ws = w.shape;  // [Cin, Cout, k, k]
  if (ws.n != xs.c) throw DimensionError("conv2d_transposed_stuffed: channel mismatch");
  const int kh = ws.h;
  const int kw = ws.w;

  // Zero-stuffed input with k - 1 zeros of padding on each side.
  const int sh = (xs.h - 1) * stride + 1 + 2 * (kh - 1);
  const int sw = (xs.w - 1) * stride + 1 + 2 * (kw - 1);
  Grid stuffed(Shape{xs.n, xs.c, sh, sw});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      for (int i = 0; i < xs.h; ++i) {
        for (int j = 0; j < xs.w; ++j) stuffed(n, c, kh - 1 + i * stride, kw - 1 + j * stride) = x(n, c, i, j);
      }
    }
  }
  // Flipped kernel with in/out channels swapped: [Cout, Cin, k, k].
  Grid flipped(Shape{ws.c, ws.n, kh, kw});
  for (int ci = 0; ci < ws.n; ++ci) {
    for (int co = 0; co < ws.c; ++co) {
      for (int u = 0; u < kh; ++u) {
        for (int v = 0; v < kw; ++v) flipped(co, ci, u, v) = w(ci, co, kh - 1 - u, kw - 1 - v);
      }
    }
  }
  const Grid full(conv2d_loops(stuffed.tensor(), flipped.tensor(), Tensor::zeros(Shape{1, ws.c, 1, 1}), 1, 0));
  const int oh = full.shape.h - 2 * pad;
  const int ow = full.shape.w - 2 * pad;
  if (oh < 1 || ow < 1) throw DimensionError("conv2d_transposed_stuffed: padding exceeds output");
  Grid y(Shape{xs.n, ws.c, oh, ow});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < ws.c; ++c) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) y(n, c, i, j) = full(n, c, i + pad, j + pad) + b[c];
      }
    }
  }
  return y.tensor();
}

Tensor avg_pool_loops(const Tensor& x_t, int rate) {
  const Grid x(x_t);
  const Shape s = x.shape;
  Grid y(Shape{s.n, s.c, s.h / rate, s.w / rate});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int i = 0; i < s.h / rate; ++i) {
        for (int j = 0; j < s.w / rate; ++j) {
          double acc = 0.0;
          for (int u = 0; u < rate; ++u) {
            for (int v = 0; v < rate; ++v) acc += x(n, c, i * rate + u, j * rate + v);
          }
          y(n, c, i, j) = acc / (rate * rate);
        }
      }
    }
  }
  return y.tensor();
}

Tensor upsample_bilinear_loops(const Tensor& x_t, int rate) {
  const Grid x(x_t);
  const Shape s = x.shape;
  // Source coordinate of an output sample, clamped into [0, n - 1].
  auto source = [rate](int o, int n) {
    const double p = (o + 0.5) / rate - 0.5;
    return std::clamp(p, 0.0, static_cast<double>(n - 1));
  };
  Grid y(Shape{s.n, s.c, s.h * rate, s.w * rate});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int i = 0; i < s.h * rate; ++i) {
        const double py = source(i, s.h);
        const int y0 = static_cast<int>(std::floor(py));
        const int y1 = std::min(y0 + 1, s.h - 1);
        const double fy = py - y0;
        for (int j = 0; j < s.w * rate; ++j) {
          const double px = source(j, s.w);
          const int x0 = static_cast<int>(std::floor(px));
          const int x1 = std::min(x0 + 1, s.w - 1);
          const double fx = px - x0;
          y(n, c, i, j) = (1 - fy) * ((1 - fx) * x(n, c, y0, x0) + fx * x(n, c, y0, x1)) +
                          fy * ((1 - fx) * x(n, c, y1, x0) + fx * x(n, c, y1, x1));
        }
      }
    }
  }
  return y.tensor();
}

Tensor sc_block_loops(const Tensor& x_t, const SCBlockParams& p) {
  const Grid x(x_t);
  const Shape s = x.shape;
  const int half = s.c / 2;
  Grid xa(Shape{s.n, half, s.h, s.w});
  Grid xb(Shape{s.n, half, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < half; ++c) {
      for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
          xa(n, c, i, j) = x(n, c, i, j);
          xb(n, c, i, j) = x(n, c + half, i, j);
        }
      }
    }
  }
  auto conv = [](const Grid& in, const Conv2d& f) {
    return Grid(conv2d_loops(in.tensor(), f.weight.value(), f.bias.value(), f.stride, f.pad));
  };
  const Grid pooled(avg_pool_loops(xa.tensor(), p.pool_rate));
  const Grid up(upsample_bilinear_loops(conv(pooled, p.f1).tensor(), p.pool_rate));
  const Grid k2 = conv(xa, p.f2);
  Grid modulated(xa.shape);
  for (std::size_t i = 0; i < modulated.v.size(); ++i) {
    modulated.v[i] = k2.v[i] * sigmoid_scalar(xa.v[i] + up.v[i]);
  }
  const Grid calibrated = conv(modulated, p.f3);
  const Grid context = conv(xb, p.f4);
  const double slope = p.act.value().item();
  Grid y(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
          const double v = c < half ? calibrated(n, c, i, j) : context(n, c - half, i, j);
          y(n, c, i, j) = v >= 0.0 ? v : slope * v;
        }
      }
    }
  }
  return y.tensor();
}

Image bicubic_resize_direct(const Image& image, int out_width, int out_height) {
  // Keys cubic, a = -0.5, in its textbook piecewise form.
  auto keys = [](double t) {
    const double a = -0.5;
    const double u = std::abs(t);
    if (u <= 1.0) return (a + 2.0) * u * u * u - (a + 3.0) * u * u + 1.0;
    if (u < 2.0) return a * u * u * u - 5.0 * a * u * u + 8.0 * a * u - 4.0 * a;
    return 0.0;
  };
  // Mirror an index into [0, n) by repeated reflection about the edges
  // (the edge sample is repeated: -1 -> 0, n -> n - 1).
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -1 - i : 2 * n - 1 - i;
    return i;
  };
  const double sx = static_cast<double>(out_width) / image.width();
  const double sy = static_cast<double>(out_height) / image.height();
  const double kx = std::min(1.0, sx);
  const double ky = std::min(1.0, sy);
  Image out(out_width, out_height);
  for (int oy = 0; oy < out_height; ++oy) {
    const double cy = (oy + 0.5) / sy - 0.5;
    const int y_lo = static_cast<int>(std::floor(cy - 2.0 / ky)) - 1;
    const int y_hi = static_cast<int>(std::ceil(cy + 2.0 / ky)) + 1;
    for (int ox = 0; ox < out_width; ++ox) {
      const double cx = (ox + 0.5) / sx - 0.5;
      const int x_lo = static_cast<int>(std::floor(cx - 2.0 / kx)) - 1;
      const int x_hi = static_cast<int>(std::ceil(cx + 2.0 / kx)) + 1;
      double acc[Image::kChannels] = {};
      double total = 0.0;
      for (int y = y_lo; y <= y_hi; ++y) {
        const double wy = keys((y - cy) * ky);
        if (wy == 0.0) continue;
        for (int x = x_lo; x <= x_hi; ++x) {
          const double wgt = wy * keys((x - cx) * kx);
          if (wgt == 0.0) continue;
          total += wgt;
          const int ix = mirror(x, image.width());
          const int iy = mirror(y, image.height());
          for (int c = 0; c < Image::kChannels; ++c) acc[c] += wgt * image.at(ix, iy, c);
        }
      }
      for (int c = 0; c < Image::kChannels; ++c) out.at(ox, oy, c) = std::clamp(acc[c] / total, 0.0, 1.0);
    }
  }
  return out;
}

double inner_product(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("inner_product: shape mismatch");
  const auto x = a.data();
  const auto y = b.data();
  long double acc = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<long double>(x[i]) * y[i];
  return static_cast<double>(acc);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(fmt::format("max_abs_diff: {} vs {}", a.shape().str(), b.shape().str()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

double max_abs_diff(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw DimensionError("max_abs_diff: image size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) worst = std::max(worst, std::abs(a.pixels()[i] - b.pixels()[i]));
  return worst;
}

}  // namespace scsr::verify
