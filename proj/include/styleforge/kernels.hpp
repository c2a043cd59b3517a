#pragma once

#include "styleforge/real.hpp"

// Inner loops of the network layers. Each kernel has an OpenMP-parallel
// version (used by the layers) and a plain serial version kept in
// kernels::serial as the reference the tests compare against.
//
// Parallel kernels partition work so that every output element is written
// by exactly one thread; results do not depend on the thread count.

namespace styleforge::kernels {

struct ConvGeometry {
  int channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  int patch_size() const { return channels * kernel * kernel; }
};

/// Unfolds one C×H×W image into a (C·k·k)×(Ho·Wo) patch matrix. Zero padding.
void im2col(const real* image, const ConvGeometry& g, real* cols);
/// Adjoint of im2col; accumulates into image.
void col2im(const real* cols, const ConvGeometry& g, real* image);

/// Row-major C = alpha·op(A)·op(B) + beta·C with op(A) m×k and op(B) k×n.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha, const real* a, const real* b, real beta,
          real* c);

/// Normalizes each contiguous plane to zero mean and unit variance.
/// Writes normalized values to out and 1/sqrt(var + eps) per plane.
void normalize_planes(const real* x, int planes, int plane_size, real eps, real* out, real* inv_std);
/// Input gradient of normalize_planes; accumulates into dx.
void normalize_planes_backward(const real* dy, const real* normalized, const real* inv_std, int planes,
                               int plane_size, real* dx);

/// Sets the OpenMP worker count (≤0 leaves the runtime default) and returns it.
int set_threads(int threads);
int thread_count();

namespace serial {

void im2col(const real* image, const ConvGeometry& g, real* cols);
void col2im(const real* cols, const ConvGeometry& g, real* image);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha, const real* a, const real* b, real beta,
          real* c);
void normalize_planes(const real* x, int planes, int plane_size, real eps, real* out, real* inv_std);
void normalize_planes_backward(const real* dy, const real* normalized, const real* inv_std, int planes,
                               int plane_size, real* dx);

}  // namespace serial

}  // namespace styleforge::kernels
