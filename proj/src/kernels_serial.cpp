#include <cmath>

#include "styleforge/kernels.hpp"

namespace styleforge::kernels::serial {

void im2col(const real* image, const ConvGeometry& g, real* cols) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const int row = (c * g.kernel + ky) * g.kernel + kx;
        for (int y = 0; y < oh; ++y) {
          for (int x = 0; x < ow; ++x) {
            const int iy = y * g.stride - g.pad + ky;
            const int ix = x * g.stride - g.pad + kx;
            const bool inside = iy >= 0 && iy < g.height && ix >= 0 && ix < g.width;
            cols[(static_cast<long>(row) * oh + y) * ow + x] =
                inside ? image[(static_cast<long>(c) * g.height + iy) * g.width + ix] : real(0);
          }
        }
      }
    }
  }
}

void col2im(const real* cols, const ConvGeometry& g, real* image) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const int row = (c * g.kernel + ky) * g.kernel + kx;
        for (int y = 0; y < oh; ++y) {
          for (int x = 0; x < ow; ++x) {
            const int iy = y * g.stride - g.pad + ky;
            const int ix = x * g.stride - g.pad + kx;
            if (iy >= 0 && iy < g.height && ix >= 0 && ix < g.width) {
              image[(static_cast<long>(c) * g.height + iy) * g.width + ix] +=
                  cols[(static_cast<long>(row) * oh + y) * ow + x];
            }
          }
        }
      }
    }
  }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha, const real* a, const real* b, real beta,
          real* c) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0;
      for (int p = 0; p < k; ++p) {
        const real av = trans_a ? a[static_cast<long>(p) * m + i] : a[static_cast<long>(i) * k + p];
        const real bv = trans_b ? b[static_cast<long>(j) * k + p] : b[static_cast<long>(p) * n + j];
        acc += static_cast<double>(av) * bv;
      }
      real& out = c[static_cast<long>(i) * n + j];
      out = static_cast<real>(alpha * acc + (beta == real(0) ? real(0) : beta * out));
    }
  }
}

void normalize_planes(const real* x, int planes, int plane_size, real eps, real* out, real* inv_std) {
  for (int p = 0; p < planes; ++p) {
    const real* src = x + static_cast<long>(p) * plane_size;
    double mean = 0;
    for (int i = 0; i < plane_size; ++i) mean += src[i];
    mean /= plane_size;
    double var = 0;
    for (int i = 0; i < plane_size; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= plane_size;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[p] = static_cast<real>(inv);
    real* dst = out + static_cast<long>(p) * plane_size;
    for (int i = 0; i < plane_size; ++i) dst[i] = static_cast<real>((src[i] - mean) * inv);
  }
}

void normalize_planes_backward(const real* dy, const real* normalized, const real* inv_std, int planes,
                               int plane_size, real* dx) {
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

}  // namespace styleforge::kernels::serial
