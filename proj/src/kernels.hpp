#pragma once

#include <cstddef>

// Row-major dense kernels shared by the convolution ops.
namespace scsr::kernels {

/// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c);
/// C[m x n] += A^T * B with A stored [k x m], B [k x n]
void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c);
/// C[m x n] += A * B^T with A stored [m x k], B [n x k]
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c);

struct ConvGeometry {
  int channels;
  int height;
  int width;
  int kernel_h;
  int kernel_w;
  int stride;
  int pad;
  int out_h;
  int out_w;

  int rows() const { return channels * kernel_h * kernel_w; }
  int cols() const { return out_h * out_w; }
};

/// Gathers the receptive fields of one image into cols[rows x cols].
void im2col(const double* image, const ConvGeometry& g, double* cols);
/// Scatter-adds cols back into image (the adjoint of im2col).
void col2im(const double* cols, const ConvGeometry& g, double* image);

}  // namespace scsr::kernels
