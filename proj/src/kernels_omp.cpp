#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "styleforge/kernels.hpp"

namespace styleforge::kernels {

namespace {

using RowMatrix = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

}  // namespace

void im2col(const real* image, const ConvGeometry& g, real* cols) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int rows = g.patch_size();
  const int kk = g.kernel * g.kernel;
#pragma omp parallel for schedule(static) if (rows * oh * ow > 32768)
  for (int row = 0; row < rows; ++row) {
    const int c = row / kk;
    const int ky = (row % kk) / g.kernel;
    const int kx = row % g.kernel;
    const real* plane = image + static_cast<long>(c) * g.height * g.width;
    real* dst = cols + static_cast<long>(row) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const int iy = y * g.stride - g.pad + ky;
      real* line = dst + static_cast<long>(y) * ow;
      if (iy < 0 || iy >= g.height) {
        std::fill(line, line + ow, real(0));
        continue;
      }
      const real* src = plane + static_cast<long>(iy) * g.width;
      if (g.stride == 1) {
        // Valid x range where ix = x - pad + kx lies inside the row.
        const int x_lo = std::clamp(g.pad - kx, 0, ow);
        const int x_hi = std::clamp(g.width + g.pad - kx, x_lo, ow);
        std::fill(line, line + x_lo, real(0));
        std::copy(src + (x_lo - g.pad + kx), src + (x_hi - g.pad + kx), line + x_lo);
        std::fill(line + x_hi, line + ow, real(0));
      } else {
        for (int x = 0; x < ow; ++x) {
          const int ix = x * g.stride - g.pad + kx;
          line[x] = (ix >= 0 && ix < g.width) ? src[ix] : real(0);
        }
      }
    }
  }
}

void col2im(const real* cols, const ConvGeometry& g, real* image) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int kk = g.kernel * g.kernel;
  // Parallel over channels: rows of one channel only touch that channel's plane.
#pragma omp parallel for schedule(static) if (g.channels * kk * oh * ow > 32768)
  for (int c = 0; c < g.channels; ++c) {
    real* plane = image + static_cast<long>(c) * g.height * g.width;
    for (int r = 0; r < kk; ++r) {
      const int ky = r / g.kernel;
      const int kx = r % g.kernel;
      const real* src = cols + static_cast<long>(c * kk + r) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        const int iy = y * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.height) continue;
        real* line = plane + static_cast<long>(iy) * g.width;
        const real* s = src + static_cast<long>(y) * ow;
        if (g.stride == 1) {
          const int x_lo = std::clamp(g.pad - kx, 0, ow);
          const int x_hi = std::clamp(g.width + g.pad - kx, x_lo, ow);
          real* d = line - g.pad + kx;
          for (int x = x_lo; x < x_hi; ++x) d[x] += s[x];
        } else {
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) line[ix] += s[x];
          }
        }
      }
    }
  }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha, const real* a, const real* b, real beta,
          real* c) {
  MutMap out(c, m, n);
  if (beta == real(0)) {
    out.setZero();
  } else if (beta != real(1)) {
    out *= beta;
  }
  // Eigen splits the product over OpenMP threads along output blocks only.
  if (!trans_a && !trans_b) {
    out.noalias() += alpha * ConstMap(a, m, k) * ConstMap(b, k, n);
  } else if (trans_a && !trans_b) {
    out.noalias() += alpha * ConstMap(a, k, m).transpose() * ConstMap(b, k, n);
  } else if (!trans_a && trans_b) {
    out.noalias() += alpha * ConstMap(a, m, k) * ConstMap(b, n, k).transpose();
  } else {
    out.noalias() += alpha * ConstMap(a, k, m).transpose() * ConstMap(b, n, k).transpose();
  }
}

void normalize_planes(const real* x, int planes, int plane_size, real eps, real* out, real* inv_std) {
#pragma omp parallel for schedule(static) if (static_cast<long>(planes) * plane_size > 16384)
  for (int p = 0; p < planes; ++p) {
    const real* src = x + static_cast<long>(p) * plane_size;
    double mean = 0;
    for (int i = 0; i < plane_size; ++i) mean += src[i];
    mean /= plane_size;
    double var = 0;
    for (int i = 0; i < plane_size; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= plane_size;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[p] = static_cast<real>(inv);
    real* dst = out + static_cast<long>(p) * plane_size;
    for (int i = 0; i < plane_size; ++i) dst[i] = static_cast<real>((src[i] - mean) * inv);
  }
}

void normalize_planes_backward(const real* dy, const real* normalized, const real* inv_std, int planes,
                               int plane_size, real* dx) {
#pragma omp parallel for schedule(static) if (static_cast<long>(planes) * plane_size > 16384)
  for (int p = 0; p < planes; ++p) {
    const long off = static_cast<long>(p) * plane_size;
    double mean_dy = 0;
    double mean_dy_xhat = 0;
    for (int i = 0; i < plane_size; ++i) {
      mean_dy += dy[off + i];
      mean_dy_xhat += static_cast<double>(dy[off + i]) * normalized[off + i];
    }
    mean_dy /= plane_size;
    mean_dy_xhat /= plane_size;
    for (int i = 0; i < plane_size; ++i) {
      dx[off + i] += static_cast<real>(inv_std[p] * (dy[off + i] - mean_dy - normalized[off + i] * mean_dy_xhat));
    }
  }
}

int set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
  return omp_get_max_threads();
#else
  (void)threads;
  return 1;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace styleforge::kernels
