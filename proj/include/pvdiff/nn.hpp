#pragma once

// Building blocks of the denoiser with explicit forward/backward passes.
// Backward functions accumulate into a gradient ParamSet and return the
// gradient with respect to the layer input.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pvdiff/tensor.hpp"

namespace pvdiff::nn {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const RowMat<S>>;

template <typename S>
inline S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <typename S>
Tensor<S> silu(const Tensor<S>& x) {
  Tensor<S> y = x;
  for (auto& e : y.v) e = e * sigmoid(e);
  return y;
}

/// dL/dx for y = x * sigmoid(x), given the pre-activation x.
template <typename S>
Tensor<S> silu_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i) {
    const S s = sigmoid(x.v[i]);
    dx.v[i] = dy.v[i] * (s + x.v[i] * s * (S(1) - s));
  }
  return dx;
}

/// acc[r] += sum of row r, in a fixed order. Eigen's vectorized reductions
/// peel elements according to the runtime address, which makes the rounding
/// depend on where the buffer was allocated.
template <typename S>
void add_row_sums(const S* m, Eigen::Index rows, Eigen::Index cols, S* acc) {
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S* row = m + r * cols;
    S total{0};
    for (Eigen::Index c = 0; c < cols; ++c) total += row[c];
    acc[r] += total;
  }
}

/// Same-padded square convolution, stride 1, kernel 1 or 3.
struct Conv2d {
  std::size_t weight = 0;  // [cout, cin, k, k]
  std::size_t bias = 0;    // [cout]
  int cin = 0;
  int cout = 0;
  int k = 3;

  template <typename S>
  static RowMat<S> im2col(const Tensor<S>& x, int k) {
    const int pad = k / 2;
    RowMat<S> cols(static_cast<Eigen::Index>(x.c) * k * k, static_cast<Eigen::Index>(x.columns()));
    for (int ci = 0; ci < x.c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          S* row = cols.row((ci * k + ky) * k + kx).data();
          for (int ni = 0; ni < x.n; ++ni) {
            const S* src = x.ptr(ci, ni);
            S* dst = row + static_cast<std::size_t>(ni) * x.plane();
            for (int yy = 0; yy < x.h; ++yy) {
              const int sy = yy + ky - pad;
              S* drow = dst + static_cast<std::size_t>(yy) * x.w;
              if (sy < 0 || sy >= x.h) {
                std::fill(drow, drow + x.w, S{0});
                continue;
              }
              const S* srow = src + static_cast<std::size_t>(sy) * x.w;
              const int dx0 = std::max(0, pad - kx);
              const int dx1 = std::min(x.w, x.w + pad - kx);
              std::fill(drow, drow + dx0, S{0});
              std::copy(srow + dx0 + kx - pad, srow + dx1 + kx - pad, drow + dx0);
              std::fill(drow + dx1, drow + x.w, S{0});
            }
          }
        }
      }
    }
    return cols;
  }

  template <typename S>
  static void col2im(const RowMat<S>& cols, Tensor<S>& dx, int k) {
    const int pad = k / 2;
    for (int ci = 0; ci < dx.c; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const S* row = cols.row((ci * k + ky) * k + kx).data();
          for (int ni = 0; ni < dx.n; ++ni) {
            S* dst = dx.ptr(ci, ni);
            const S* src = row + static_cast<std::size_t>(ni) * dx.plane();
            for (int yy = 0; yy < dx.h; ++yy) {
              const int sy = yy + ky - pad;
              if (sy < 0 || sy >= dx.h) continue;
              const S* srow = src + static_cast<std::size_t>(yy) * dx.w;
              S* drow = dst + static_cast<std::size_t>(sy) * dx.w;
              const int x0 = std::max(0, pad - kx);
              const int x1 = std::min(dx.w, dx.w + pad - kx);
              for (int xx = x0; xx < x1; ++xx) drow[xx + kx - pad] += srow[xx];
            }
          }
        }
      }
    }
  }

  template <typename S>
  Tensor<S> forward(const ParamSet<S>& p, const Tensor<S>& x) const {
    if (x.c != cin) throw std::logic_error("conv: input channels mismatch");
    Tensor<S> y(cout, x.n, x.h, x.w);
    const auto cols = static_cast<Eigen::Index>(x.columns());
    ConstMatMap<S> w(p.data(weight), cout, static_cast<Eigen::Index>(cin) * k * k);
    MatMap<S> out(y.v.data(), cout, cols);
    if (k == 1) {
      out.noalias() = w * ConstMatMap<S>(x.v.data(), cin, cols);
    } else {
      out.noalias() = w * im2col(x, k);
    }
    const S* b = p.data(bias);
    for (int co = 0; co < cout; ++co) out.row(co).array() += b[co];
    return y;
  }

  template <typename S>
  Tensor<S> backward(const ParamSet<S>& p, const Tensor<S>& x, const Tensor<S>& dy, ParamSet<S>& g) const {
    const auto cols = static_cast<Eigen::Index>(x.columns());
    const Eigen::Index kk = static_cast<Eigen::Index>(cin) * k * k;
    ConstMatMap<S> w(p.data(weight), cout, kk);
    ConstMatMap<S> dout(dy.v.data(), cout, cols);
    MatMap<S> dw(g.data(weight), cout, kk);
    add_row_sums(dy.v.data(), cout, cols, g.data(bias));
    Tensor<S> dx(cin, x.n, x.h, x.w);
    if (k == 1) {
      ConstMatMap<S> xin(x.v.data(), cin, cols);
      dw.noalias() += dout * xin.transpose();
      MatMap<S>(dx.v.data(), cin, cols).noalias() = w.transpose() * dout;
    } else {
      const RowMat<S> xcols = im2col(x, k);
      dw.noalias() += dout * xcols.transpose();
      const RowMat<S> dcols = w.transpose() * dout;
      col2im(dcols, dx, k);
    }
    return dx;
  }
};

/// Group normalization with per-channel affine scale and offset.
struct GroupNorm {
  std::size_t gamma = 0;
  std::size_t beta = 0;
  int channels = 0;
  int groups = 1;
  static constexpr double eps = 1e-5;

  template <typename S>
  struct Cache {
    Tensor<S> xhat;
    std::vector<double> inv_std;  // [batch * groups]
  };

  template <typename S>
  Tensor<S> forward(const ParamSet<S>& p, const Tensor<S>& x, Cache<S>& cache) const {
    if (x.c != channels) throw std::logic_error("group norm: channel mismatch");
    const int cg = channels / groups;
    const std::size_t plane = x.plane();
    const double count = static_cast<double>(cg) * static_cast<double>(plane);
    cache.xhat = Tensor<S>(x.c, x.n, x.h, x.w);
    cache.inv_std.assign(static_cast<std::size_t>(x.n) * groups, 0.0);
    Tensor<S> y(x.c, x.n, x.h, x.w);
    const S* gm = p.data(gamma);
    const S* bt = p.data(beta);
    for (int ni = 0; ni < x.n; ++ni) {
      for (int gi = 0; gi < groups; ++gi) {
        double sum = 0.0;
        for (int ci = gi * cg; ci < (gi + 1) * cg; ++ci) {
          const S* src = x.ptr(ci, ni);
          for (std::size_t i = 0; i < plane; ++i) sum += src[i];
        }
        const double mean = sum / count;
        double var = 0.0;
        for (int ci = gi * cg; ci < (gi + 1) * cg; ++ci) {
          const S* src = x.ptr(ci, ni);
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = src[i] - mean;
            var += d * d;
          }
        }
        const double inv = 1.0 / std::sqrt(var / count + eps);
        cache.inv_std[static_cast<std::size_t>(ni) * groups + gi] = inv;
        for (int ci = gi * cg; ci < (gi + 1) * cg; ++ci) {
          const S* src = x.ptr(ci, ni);
          S* xh = cache.xhat.ptr(ci, ni);
          S* dst = y.ptr(ci, ni);
          for (std::size_t i = 0; i < plane; ++i) {
            xh[i] = static_cast<S>((src[i] - mean) * inv);
            dst[i] = gm[ci] * xh[i] + bt[ci];
          }
        }
      }
    }
    return y;
  }

  template <typename S>
  Tensor<S> backward(const ParamSet<S>& p, const Cache<S>& cache, const Tensor<S>& dy, ParamSet<S>& g) const {
    const int cg = channels / groups;
    const std::size_t plane = dy.plane();
    const double count = static_cast<double>(cg) * static_cast<double>(plane);
    const S* gm = p.data(gamma);
    S* dgm = g.data(gamma);
    S* dbt = g.data(beta);
    Tensor<S> dx(dy.c, dy.n, dy.h, dy.w);
    for (int ci = 0; ci < channels; ++ci) {
      double sg = 0.0, sb = 0.0;
      for (int ni = 0; ni < dy.n; ++ni) {
        const S* d = dy.ptr(ci, ni);
        const S* xh = cache.xhat.ptr(ci, ni);
        for (std::size_t i = 0; i < plane; ++i) {
          sg += static_cast<double>(d[i]) * xh[i];
          sb += d[i];
        }
      }
      dgm[ci] += static_cast<S>(sg);
      dbt[ci] += static_cast<S>(sb);
    }
    for (int ni = 0; ni < dy.n; ++ni) {
      for (int gi = 0; gi < groups; ++gi) {
        double m1 = 0.0, m2 = 0.0;
        for (int ci = gi * cg; ci < (gi + 1) * cg; ++ci) {
          const S* d = dy.ptr(ci, ni);
          const S* xh = cache.xhat.ptr(ci, ni);
          for (std::size_t i = 0; i < plane; ++i) {
            const double dxh = static_cast<double>(d[i]) * gm[ci];
            m1 += dxh;
            m2 += dxh * xh[i];
          }
        }
        m1 /= count;
        m2 /= count;
        const double inv = cache.inv_std[static_cast<std::size_t>(ni) * groups + gi];
        for (int ci = gi * cg; ci < (gi + 1) * cg; ++ci) {
          const S* d = dy.ptr(ci, ni);
          const S* xh = cache.xhat.ptr(ci, ni);
          S* out = dx.ptr(ci, ni);
          for (std::size_t i = 0; i < plane; ++i) {
            out[i] = static_cast<S>(inv * (static_cast<double>(d[i]) * gm[ci] - m1 - xh[i] * m2));
          }
        }
      }
    }
    return dx;
  }
};

/// Fully connected layer over column batches: x is [in, batch] row-major.
struct Dense {
  std::size_t weight = 0;  // [out, in]
  std::size_t bias = 0;    // [out]
  int in = 0;
  int out = 0;

  template <typename S>
  RowMat<S> forward(const ParamSet<S>& p, const RowMat<S>& x) const {
    ConstMatMap<S> w(p.data(weight), out, in);
    RowMat<S> y = w * x;
    const S* b = p.data(bias);
    for (int o = 0; o < out; ++o) y.row(o).array() += b[o];
    return y;
  }

  template <typename S>
  RowMat<S> backward(const ParamSet<S>& p, const RowMat<S>& x, const RowMat<S>& dy, ParamSet<S>& g) const {
    ConstMatMap<S> w(p.data(weight), out, in);
    MatMap<S>(g.data(weight), out, in).noalias() += dy * x.transpose();
    add_row_sums(dy.data(), out, dy.cols(), g.data(bias));
    return w.transpose() * dy;
  }
};

template <typename S>
RowMat<S> silu(const RowMat<S>& x) {
  return x.unaryExpr([](S e) { return e * sigmoid(e); });
}

template <typename S>
RowMat<S> silu_backward(const RowMat<S>& x, const RowMat<S>& dy) {
  RowMat<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dx.size(); ++i) {
    const S s = sigmoid(x.data()[i]);
    dx.data()[i] = dy.data()[i] * (s + x.data()[i] * s * (S(1) - s));
  }
  return dx;
}

/// 2x2 mean pooling, halves the spatial side.
template <typename S>
Tensor<S> avg_pool2(const Tensor<S>& x) {
  Tensor<S> y(x.c, x.n, x.h / 2, x.w / 2);
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ni = 0; ni < x.n; ++ni) {
      const S* src = x.ptr(ci, ni);
      S* dst = y.ptr(ci, ni);
      for (int yy = 0; yy < y.h; ++yy) {
        for (int xx = 0; xx < y.w; ++xx) {
          const S* a = src + static_cast<std::size_t>(2 * yy) * x.w + 2 * xx;
          dst[yy * y.w + xx] = (a[0] + a[1] + a[x.w] + a[x.w + 1]) * S(0.25);
        }
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> avg_pool2_backward(const Tensor<S>& dy) {
  Tensor<S> dx(dy.c, dy.n, dy.h * 2, dy.w * 2);
  for (int ci = 0; ci < dy.c; ++ci) {
    for (int ni = 0; ni < dy.n; ++ni) {
      const S* src = dy.ptr(ci, ni);
      S* dst = dx.ptr(ci, ni);
      for (int yy = 0; yy < dx.h; ++yy) {
        for (int xx = 0; xx < dx.w; ++xx) dst[yy * dx.w + xx] = src[(yy / 2) * dy.w + xx / 2] * S(0.25);
      }
    }
  }
  return dx;
}

/// Nearest-neighbour 2x upsampling, doubles the spatial side.
template <typename S>
Tensor<S> upsample2(const Tensor<S>& x) {
  Tensor<S> y(x.c, x.n, x.h * 2, x.w * 2);
  for (int ci = 0; ci < x.c; ++ci) {
    for (int ni = 0; ni < x.n; ++ni) {
      const S* src = x.ptr(ci, ni);
      S* dst = y.ptr(ci, ni);
      for (int yy = 0; yy < y.h; ++yy) {
        for (int xx = 0; xx < y.w; ++xx) dst[yy * y.w + xx] = src[(yy / 2) * x.w + xx / 2];
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> upsample2_backward(const Tensor<S>& dy) {
  Tensor<S> dx(dy.c, dy.n, dy.h / 2, dy.w / 2);
  for (int ci = 0; ci < dy.c; ++ci) {
    for (int ni = 0; ni < dy.n; ++ni) {
      const S* src = dy.ptr(ci, ni);
      S* dst = dx.ptr(ci, ni);
      for (int yy = 0; yy < dy.h; ++yy) {
        for (int xx = 0; xx < dy.w; ++xx) dst[(yy / 2) * dx.w + xx / 2] += src[yy * dy.w + xx];
      }
    }
  }
  return dx;
}

/// Channel concatenation [a; b].
template <typename S>
Tensor<S> concat(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw std::logic_error("concat: resolution mismatch");
  Tensor<S> y(a.c + b.c, a.n, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), y.v.begin());
  std::copy(b.v.begin(), b.v.end(), y.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  return y;
}

template <typename S>
std::pair<Tensor<S>, Tensor<S>> split_channels(const Tensor<S>& y, int first) {
  Tensor<S> a(first, y.n, y.h, y.w);
  Tensor<S> b(y.c - first, y.n, y.h, y.w);
  std::copy(y.v.begin(), y.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()), a.v.begin());
  std::copy(y.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()), y.v.end(), b.v.begin());
  return {std::move(a), std::move(b)};
}

template <typename S>
void add_inplace(Tensor<S>& a, const Tensor<S>& b) {
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

}  // namespace pvdiff::nn
