#include "kernels.hpp"

namespace scsr::kernels {

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    double* c_row = c + static_cast<std::size_t>(i) * n;
    const double* a_row = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double a_ip = a_row[p];
      if (a_ip == 0.0) continue;
      const double* b_row = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) c_row[j] += a_ip * b_row[j];
    }
  }
}

void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int p = 0; p < k; ++p) {
    const double* a_row = a + static_cast<std::size_t>(p) * m;
    const double* b_row = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double a_pi = a_row[i];
      if (a_pi == 0.0) continue;
      double* c_row = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) c_row[j] += a_pi * b_row[j];
    }
  }
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* a_row = a + static_cast<std::size_t>(i) * k;
    double* c_row = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* b_row = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      c_row[j] += acc;
    }
  }
}

void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const int plane = g.height * g.width;
  double* out = cols;
  for (int c = 0; c < g.channels; ++c) {
    const double* src = image + static_cast<std::size_t>(c) * plane;
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.height) {
            for (int ow = 0; ow < g.out_w; ++ow) *out++ = 0.0;
            continue;
          }
          const double* row = src + static_cast<std::size_t>(ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            *out++ = (iw >= 0 && iw < g.width) ? row[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeometry& g, double* image) {
  const int plane = g.height * g.width;
  const double* in = cols;
  for (int c = 0; c < g.channels; ++c) {
    double* dst = image + static_cast<std::size_t>(c) * plane;
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.height) {
            in += g.out_w;
            continue;
          }
          double* row = dst + static_cast<std::size_t>(ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow, ++in) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.width) row[iw] += *in;
          }
        }
      }
    }
  }
}

}  // namespace scsr::kernels
