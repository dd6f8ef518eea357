#include "scsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "kernels.hpp"
#include "scsr/errors.hpp"

namespace scsr::ops {

namespace {

using detail::Node;
using BackwardFn = std::function<void(Node&)>;

Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                   BackwardFn backward_fn) {
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericError(fmt::format("{}: non-finite output", op));
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op, const char* what) {
  if (!t.defined()) throw InvalidArgument(fmt::format("{}: {} is undefined", op, what));
}

void require_same_shape(const Tensor& x, const Tensor& y, const char* op) {
  require_defined(x, op, "lhs");
  require_defined(y, op, "rhs");
  if (!(x.shape() == y.shape())) {
    throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", op, x.shape().str(), y.shape().str()));
  }
}

// Applies an elementwise map whose derivative is expressed through input and output values.
template <typename Forward, typename Derivative>
Tensor unary(const char* op, const Tensor& x, Forward f, Derivative df) {
  require_defined(x, op, "input");
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [df](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

double stable_sigmoid(double v) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  double s;
  if (v >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-v));
  } else {
    const double e = std::exp(v);
    s = e / (1.0 + e);
  }
  return std::clamp(s, lo, hi);
}

void check_conv_args(const char* op, const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  require_defined(x, op, "input");
  require_defined(w, op, "weight");
  require_defined(b, op, "bias");
  if (stride < 1) throw InvalidArgument(fmt::format("{}: stride must be >= 1, got {}", op, stride));
  if (pad < 0) throw InvalidArgument(fmt::format("{}: pad must be >= 0, got {}", op, pad));
  if (w.shape().h < 1 || w.shape().w < 1) throw DimensionError(fmt::format("{}: empty kernel {}", op, w.shape().str()));
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  check_conv_args("conv2d", x, w, b, stride, pad);
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (xs.c != ws.c) {
    throw DimensionError(
        fmt::format("conv2d: input has {} channels but weight {} expects {}", xs.c, ws.str(), ws.c));
  }
  if (b.size() != static_cast<std::size_t>(ws.n)) {
    throw DimensionError(fmt::format("conv2d: bias has {} values, expected {}", b.size(), ws.n));
  }
  const int out_h = (xs.h + 2 * pad - ws.h) / stride + 1;
  const int out_w = (xs.w + 2 * pad - ws.w) / stride + 1;
  if (xs.h + 2 * pad < ws.h || xs.w + 2 * pad < ws.w || out_h < 1 || out_w < 1) {
    throw DimensionError(fmt::format("conv2d: input {} too small for kernel {} with pad {}", xs.str(), ws.str(), pad));
  }
  const kernels::ConvGeometry g{xs.c, xs.h, xs.w, ws.h, ws.w, stride, pad, out_h, out_w};
  const Shape os{xs.n, ws.n, out_h, out_w};
  const std::size_t in_plane = static_cast<std::size_t>(xs.c) * xs.plane();
  const std::size_t out_plane = static_cast<std::size_t>(ws.n) * os.plane();

  std::vector<double> out(os.size());
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  auto xd = x.data();
  auto wd = w.data();
  auto bd = b.data();
  for (int n = 0; n < xs.n; ++n) {
    kernels::im2col(xd.data() + n * in_plane, g, cols.data());
    double* o = out.data() + n * out_plane;
    for (int co = 0; co < ws.n; ++co) std::fill_n(o + co * os.plane(), os.plane(), bd[co]);
    kernels::gemm_nn(ws.n, g.cols(), g.rows(), wd.data(), cols.data(), o);
  }

  return make_result("conv2d", os, std::move(out), {x, w, b}, [g, xs, ws, os, in_plane, out_plane](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
    for (int n = 0; n < xs.n; ++n) {
      const double* dout = self.grad.data() + n * out_plane;
      if (pb.requires_grad) {
        for (int co = 0; co < ws.n; ++co) {
          double acc = 0.0;
          for (std::size_t i = 0; i < os.plane(); ++i) acc += dout[co * os.plane() + i];
          pb.grad[co] += acc;
        }
      }
      if (pw.requires_grad) {
        kernels::im2col(px.value.data() + n * in_plane, g, cols.data());
        kernels::gemm_nt(ws.n, g.rows(), g.cols(), dout, cols.data(), pw.grad.data());
      }
      if (px.requires_grad) {
        std::fill(cols.begin(), cols.end(), 0.0);
        kernels::gemm_tn(g.rows(), g.cols(), ws.n, pw.value.data(), dout, cols.data());
        kernels::col2im(cols.data(), g, px.grad.data() + n * in_plane);
      }
    }
  });
}

Tensor conv2d_transposed(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  check_conv_args("conv2d_transposed", x, w, b, stride, pad);
  const Shape xs = x.shape();
  const Shape ws = w.shape();  // [Cin, Cout, kH, kW]
  if (xs.c != ws.n) {
    throw DimensionError(
        fmt::format("conv2d_transposed: input has {} channels but weight {} expects {}", xs.c, ws.str(), ws.n));
  }
  if (b.size() != static_cast<std::size_t>(ws.c)) {
    throw DimensionError(fmt::format("conv2d_transposed: bias has {} values, expected {}", b.size(), ws.c));
  }
  const int out_h = (xs.h - 1) * stride - 2 * pad + ws.h;
  const int out_w = (xs.w - 1) * stride - 2 * pad + ws.w;
  if (xs.h < 1 || xs.w < 1 || out_h < 1 || out_w < 1) {
    throw DimensionError(
        fmt::format("conv2d_transposed: input {} with kernel {} and pad {} gives empty output", xs.str(), ws.str(), pad));
  }
  // Geometry of the forward convolution this op is the adjoint of.
  const kernels::ConvGeometry g{ws.c, out_h, out_w, ws.h, ws.w, stride, pad, xs.h, xs.w};
  const Shape os{xs.n, ws.c, out_h, out_w};
  const std::size_t in_plane = static_cast<std::size_t>(xs.c) * xs.plane();
  const std::size_t out_plane = static_cast<std::size_t>(ws.c) * os.plane();

  std::vector<double> out(os.size());
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  auto xd = x.data();
  auto wd = w.data();
  auto bd = b.data();
  for (int n = 0; n < xs.n; ++n) {
    std::fill(cols.begin(), cols.end(), 0.0);
    kernels::gemm_tn(g.rows(), g.cols(), xs.c, wd.data(), xd.data() + n * in_plane, cols.data());
    double* o = out.data() + n * out_plane;
    for (int co = 0; co < ws.c; ++co) std::fill_n(o + co * os.plane(), os.plane(), bd[co]);
    kernels::col2im(cols.data(), g, o);
  }

  return make_result(
      "conv2d_transposed", os, std::move(out), {x, w, b}, [g, xs, ws, os, in_plane, out_plane](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
        for (int n = 0; n < xs.n; ++n) {
          const double* dout = self.grad.data() + n * out_plane;
          if (pb.requires_grad) {
            for (int co = 0; co < ws.c; ++co) {
              double acc = 0.0;
              for (std::size_t i = 0; i < os.plane(); ++i) acc += dout[co * os.plane() + i];
              pb.grad[co] += acc;
            }
          }
          if (!pw.requires_grad && !px.requires_grad) continue;
          kernels::im2col(dout, g, cols.data());
          if (px.requires_grad) {
            kernels::gemm_nn(xs.c, g.cols(), g.rows(), pw.value.data(), cols.data(), px.grad.data() + n * in_plane);
          }
          if (pw.requires_grad) {
            kernels::gemm_nt(xs.c, g.rows(), g.cols(), px.value.data() + n * in_plane, cols.data(), pw.grad.data());
          }
        }
      });
}

Tensor avg_pool2d(const Tensor& x, int rate) {
  require_defined(x, "avg_pool2d", "input");
  const Shape xs = x.shape();
  if (rate < 1) throw InvalidArgument(fmt::format("avg_pool2d: rate must be >= 1, got {}", rate));
  if (xs.h % rate != 0 || xs.w % rate != 0) {
    throw DimensionError(fmt::format("avg_pool2d: spatial dims {}x{} not divisible by {}", xs.h, xs.w, rate));
  }
  const Shape os{xs.n, xs.c, xs.h / rate, xs.w / rate};
  const double inv = 1.0 / (static_cast<double>(rate) * rate);
  auto in = x.data();
  std::vector<double> out(os.size(), 0.0);
  const std::size_t planes = static_cast<std::size_t>(xs.n) * xs.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * xs.plane();
    double* dst = out.data() + p * os.plane();
    for (int i = 0; i < os.h; ++i) {
      for (int j = 0; j < os.w; ++j) {
        double acc = 0.0;
        for (int di = 0; di < rate; ++di) {
          const double* row = src + static_cast<std::size_t>(i * rate + di) * xs.w + j * rate;
          for (int dj = 0; dj < rate; ++dj) acc += row[dj];
        }
        dst[i * os.w + j] = acc * inv;
      }
    }
  }
  return make_result("avg_pool2d", os, std::move(out), {x}, [xs, os, rate, inv, planes](Node& self) {
    Node& px = *self.parents[0];
    for (std::size_t p = 0; p < planes; ++p) {
      const double* g = self.grad.data() + p * os.plane();
      double* dst = px.grad.data() + p * xs.plane();
      for (int i = 0; i < xs.h; ++i) {
        for (int j = 0; j < xs.w; ++j) dst[i * xs.w + j] += g[(i / rate) * os.w + j / rate] * inv;
      }
    }
  });
}

namespace {

struct LinearTap {
  int lo;
  int hi;
  double frac;  // weight of hi
};

std::vector<LinearTap> bilinear_taps(int in, int rate) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(in) * rate);
  for (int o = 0; o < in * rate; ++o) {
    double src = (o + 0.5) / rate - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, int rate) {
  require_defined(x, "upsample_bilinear", "input");
  if (rate < 1) throw InvalidArgument(fmt::format("upsample_bilinear: rate must be >= 1, got {}", rate));
  const Shape xs = x.shape();
  if (xs.h < 1 || xs.w < 1) throw DimensionError("upsample_bilinear: empty spatial extent");
  const Shape os{xs.n, xs.c, xs.h * rate, xs.w * rate};
  auto rows = bilinear_taps(xs.h, rate);
  auto cols = bilinear_taps(xs.w, rate);
  auto in = x.data();
  std::vector<double> out(os.size());
  const std::size_t planes = static_cast<std::size_t>(xs.n) * xs.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * xs.plane();
    double* dst = out.data() + p * os.plane();
    for (int i = 0; i < os.h; ++i) {
      const LinearTap& r = rows[i];
      const double* top = src + static_cast<std::size_t>(r.lo) * xs.w;
      const double* bottom = src + static_cast<std::size_t>(r.hi) * xs.w;
      for (int j = 0; j < os.w; ++j) {
        const LinearTap& c = cols[j];
        const double t = top[c.lo] + c.frac * (top[c.hi] - top[c.lo]);
        const double b = bottom[c.lo] + c.frac * (bottom[c.hi] - bottom[c.lo]);
        dst[static_cast<std::size_t>(i) * os.w + j] = t + r.frac * (b - t);
      }
    }
  }
  return make_result("upsample_bilinear", os, std::move(out), {x},
                     [xs, os, rows = std::move(rows), cols = std::move(cols), planes](Node& self) {
                       Node& px = *self.parents[0];
                       for (std::size_t p = 0; p < planes; ++p) {
                         const double* g = self.grad.data() + p * os.plane();
                         double* dst = px.grad.data() + p * xs.plane();
                         for (int i = 0; i < os.h; ++i) {
                           const LinearTap& r = rows[i];
                           for (int j = 0; j < os.w; ++j) {
                             const LinearTap& c = cols[j];
                             const double v = g[static_cast<std::size_t>(i) * os.w + j];
                             dst[r.lo * xs.w + c.lo] += v * (1.0 - r.frac) * (1.0 - c.frac);
                             dst[r.lo * xs.w + c.hi] += v * (1.0 - r.frac) * c.frac;
                             dst[r.hi * xs.w + c.lo] += v * r.frac * (1.0 - c.frac);
                             dst[r.hi * xs.w + c.hi] += v * r.frac * c.frac;
                           }
                         }
                       }
                     });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double s) { return s * (1.0 - s); });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x, [](double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); },
      [](double v, double) { return stable_sigmoid(v); });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  require_defined(x, "prelu", "input");
  require_defined(slope, "prelu", "slope");
  if (slope.size() != 1) throw DimensionError(fmt::format("prelu: slope must be a single value, got {}", slope.shape().str()));
  const double a = slope.item();
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= 0.0 ? in[i] : a * in[i];
  return make_result("prelu", x.shape(), std::move(out), {x, slope}, [a](Node& self) {
    Node& px = *self.parents[0];
    Node& pa = *self.parents[1];
    double da = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = px.value[i];
      if (v >= 0.0) {
        if (px.requires_grad) px.grad[i] += self.grad[i];
      } else {
        if (px.requires_grad) px.grad[i] += a * self.grad[i];
        da += v * self.grad[i];
      }
    }
    if (pa.requires_grad) pa.grad[0] += da;
  });
}

Tensor add(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "add");
  auto a = x.data();
  auto b = y.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return make_result("add", x.shape(), std::move(out), {x, y}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "sub");
  auto a = x.data();
  auto b = y.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return make_result("sub", x.shape(), std::move(out), {x, y}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& py = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (px.requires_grad) px.grad[i] += self.grad[i];
      if (py.requires_grad) py.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "mul");
  auto a = x.data();
  auto b = y.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return make_result("mul", x.shape(), std::move(out), {x, y}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& py = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (px.requires_grad) px.grad[i] += self.grad[i] * py.value[i];
      if (py.requires_grad) py.grad[i] += self.grad[i] * px.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary("scale", x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary("add_scalar", x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor concat_channels(const Tensor& x, const Tensor& y) {
  require_defined(x, "concat_channels", "lhs");
  require_defined(y, "concat_channels", "rhs");
  const Shape a = x.shape();
  const Shape b = y.shape();
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw DimensionError(fmt::format("concat_channels: incompatible shapes {} and {}", a.str(), b.str()));
  }
  const Shape os{a.n, a.c + b.c, a.h, a.w};
  const std::size_t a_block = static_cast<std::size_t>(a.c) * a.plane();
  const std::size_t b_block = static_cast<std::size_t>(b.c) * b.plane();
  std::vector<double> out;
  out.reserve(os.size());
  auto xd = x.data();
  auto yd = y.data();
  for (int n = 0; n < a.n; ++n) {
    out.insert(out.end(), xd.begin() + n * a_block, xd.begin() + (n + 1) * a_block);
    out.insert(out.end(), yd.begin() + n * b_block, yd.begin() + (n + 1) * b_block);
  }
  return make_result("concat_channels", os, std::move(out), {x, y}, [a_block, b_block, n_batch = a.n](Node& self) {
    Node& px = *self.parents[0];
    Node& py = *self.parents[1];
    for (int n = 0; n < n_batch; ++n) {
      const double* g = self.grad.data() + n * (a_block + b_block);
      if (px.requires_grad) {
        for (std::size_t i = 0; i < a_block; ++i) px.grad[n * a_block + i] += g[i];
      }
      if (py.requires_grad) {
        for (std::size_t i = 0; i < b_block; ++i) py.grad[n * b_block + i] += g[a_block + i];
      }
    }
  });
}

namespace {

Tensor channel_slice(const Tensor& x, int first, int count) {
  const Shape xs = x.shape();
  const Shape os{xs.n, count, xs.h, xs.w};
  const std::size_t block = static_cast<std::size_t>(count) * xs.plane();
  const std::size_t stride = static_cast<std::size_t>(xs.c) * xs.plane();
  const std::size_t offset = static_cast<std::size_t>(first) * xs.plane();
  auto xd = x.data();
  std::vector<double> out;
  out.reserve(os.size());
  for (int n = 0; n < xs.n; ++n) {
    auto begin = xd.begin() + n * stride + offset;
    out.insert(out.end(), begin, begin + block);
  }
  return make_result("split_channels", os, std::move(out), {x}, [block, stride, offset, n_batch = xs.n](Node& self) {
    Node& px = *self.parents[0];
    for (int n = 0; n < n_batch; ++n) {
      for (std::size_t i = 0; i < block; ++i) px.grad[n * stride + offset + i] += self.grad[n * block + i];
    }
  });
}

}  // namespace

std::pair<Tensor, Tensor> split_channels(const Tensor& x, int k) {
  require_defined(x, "split_channels", "input");
  const int c = x.shape().c;
  if (k < 0 || k > c) throw DimensionError(fmt::format("split_channels: cannot split {} channels at {}", c, k));
  return {channel_slice(x, 0, k), channel_slice(x, k, c - k)};
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum", "input");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result("sum", {1, 1, 1, 1}, {acc}, {x}, [](Node& self) {
    Node& px = *self.parents[0];
    const double g = self.grad[0];
    for (double& v : px.grad) v += g;
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean", "input");
  if (x.size() == 0) throw DimensionError("mean: empty tensor");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  return make_result("mean", {1, 1, 1, 1}, {acc * inv}, {x}, [inv](Node& self) {
    Node& px = *self.parents[0];
    const double g = self.grad[0] * inv;
    for (double& v : px.grad) v += g;
  });
}

Tensor spatial_mean(const Tensor& x) {
  require_defined(x, "spatial_mean", "input");
  const Shape xs = x.shape();
  if (xs.plane() == 0) throw DimensionError("spatial_mean: empty spatial extent");
  const Shape os{xs.n, xs.c, 1, 1};
  const std::size_t plane = xs.plane();
  const double inv = 1.0 / static_cast<double>(plane);
  auto in = x.data();
  std::vector<double> out(os.size());
  for (std::size_t p = 0; p < os.size(); ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += in[p * plane + i];
    out[p] = acc * inv;
  }
  return make_result("spatial_mean", os, std::move(out), {x}, [plane, inv](Node& self) {
    Node& px = *self.parents[0];
    for (std::size_t p = 0; p < self.grad.size(); ++p) {
      const double g = self.grad[p] * inv;
      for (std::size_t i = 0; i < plane; ++i) px.grad[p * plane + i] += g;
    }
  });
}

}  // namespace scsr::ops
