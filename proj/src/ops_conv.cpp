#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ops_common.hpp"
#include "picnet/ops.hpp"
#include "picnet/parallel.hpp"

namespace picnet::ops {

using detail::gbuf;
using detail::K;
using detail::upstream;

namespace {

void check_geometry(int stride, int pad, const char* op) {
  if (stride < 1) throw ConfigError(std::string(op) + ": stride must be >= 1");
  if (pad < 0) throw ConfigError(std::string(op) + ": pad must be >= 0");
}

int conv_extent(int in, int k, int stride, int pad, const char* op) {
  if (k > in + 2 * pad) {
    throw ShapeError(std::string(op) + ": kernel extent " + std::to_string(k) +
                     " exceeds padded input " + std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - k) / stride + 1;
}

// Output rows whose input row oh*stride - pad + u lands inside [0, in).
struct Range {
  int lo, hi;
};

Range valid_range(int out, int in, int stride, int pad, int u) {
  const int lo_num = pad - u;
  int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  const int hi_num = in - 1 + pad - u;
  int hi = hi_num < 0 ? 0 : hi_num / stride + 1;
  lo = std::min(lo, out);
  hi = std::min(hi, out);
  return {lo, std::max(lo, hi)};
}

// Accumulates alpha * src into dst over the valid output-column range.
// Contiguous axpy when stride == 1, strided scalar loop otherwise. The
// per-element accumulation order is one add per call either way, so the
// result is independent of the kernel dispatch.
void accumulate_row(double alpha, const double* src_row, double* dst_row,
                    const Range& cols, int stride, int v, int pad) {
  if (stride == 1) {
    const int iw0 = cols.lo - pad + v;
    K().axpy(alpha, src_row + iw0, dst_row + cols.lo,
             static_cast<std::size_t>(cols.hi - cols.lo));
  } else {
    for (int ow = cols.lo; ow < cols.hi; ++ow) {
      dst_row[ow] += alpha * src_row[ow * stride - pad + v];
    }
  }
}

// Same pairing as accumulate_row but scattering output gradient back to
// the input row.
void scatter_row(double alpha, const double* g_row, double* dx_row,
                 const Range& cols, int stride, int v, int pad) {
  if (stride == 1) {
    const int iw0 = cols.lo - pad + v;
    K().axpy(alpha, g_row + cols.lo, dx_row + iw0,
             static_cast<std::size_t>(cols.hi - cols.lo));
  } else {
    for (int ow = cols.lo; ow < cols.hi; ++ow) {
      dx_row[ow * stride - pad + v] += alpha * g_row[ow];
    }
  }
}

double row_correlation(const double* g_row, const double* x_row,
                       const Range& cols, int stride, int v, int pad) {
  if (stride == 1) {
    const int iw0 = cols.lo - pad + v;
    return K().dot(g_row + cols.lo, x_row + iw0,
                   static_cast<std::size_t>(cols.hi - cols.lo));
  }
  double acc = 0.0;
  for (int ow = cols.lo; ow < cols.hi; ++ow) {
    acc += g_row[ow] * x_row[ow * stride - pad + v];
  }
  return acc;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
  detail::check_ndim(x, 4, "conv2d");
  detail::check_ndim(w, 4, "conv2d");
  check_geometry(stride, pad, "conv2d");
  const int nb = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(cin));
  }
  const bool has_bias = b.defined();
  if (has_bias && (b.ndim() != 1 || b.dim(0) != cout)) {
    throw ShapeError("conv2d: bias shape " + shape_str(b.shape()) +
                     " does not match " + std::to_string(cout) + " filters");
  }
  const int oh = conv_extent(h, kh, stride, pad, "conv2d");
  const int ow = conv_extent(wd, kw, stride, pad, "conv2d");
  Tensor out = Tensor::zeros({nb, cout, oh, ow});

  const std::int64_t x_plane = static_cast<std::int64_t>(h) * wd;
  const std::int64_t o_plane = static_cast<std::int64_t>(oh) * ow;
  {
    const double* xp = x.data().data();
    const double* wp = w.data().data();
    const double* bp = has_bias ? b.data().data() : nullptr;
    double* op = out.mutable_data().data();
    parallel_for(nb, [&](std::int64_t b0, std::int64_t b1) {
      for (std::int64_t bi = b0; bi < b1; ++bi) {
        for (int co = 0; co < cout; ++co) {
          double* oplane = op + (bi * cout + co) * o_plane;
          if (bp != nullptr) {
            for (std::int64_t i = 0; i < o_plane; ++i) oplane[i] = bp[co];
          }
          for (int ci = 0; ci < cin; ++ci) {
            const double* xplane = xp + (bi * cin + ci) * x_plane;
            for (int u = 0; u < kh; ++u) {
              const Range rows = valid_range(oh, h, stride, pad, u);
              for (int v = 0; v < kw; ++v) {
                const Range cols = valid_range(ow, wd, stride, pad, v);
                const double wv = wp[((co * cin + ci) * kh + u) * kw + v];
                for (int r = rows.lo; r < rows.hi; ++r) {
                  const int ih = r * stride - pad + u;
                  accumulate_row(wv, xplane + static_cast<std::int64_t>(ih) * wd,
                                 oplane + static_cast<std::int64_t>(r) * ow,
                                 cols, stride, v, pad);
                }
              }
            }
          }
        }
      }
    });
  }

  const bool rg = x.requires_grad() || w.requires_grad() ||
                  (has_bias && b.requires_grad());
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), wn = w.node(), on = out.node();
    auto bn = has_bias ? b.node() : std::shared_ptr<TensorNode>();
    GradTape::active()->record([xn, wn, bn, on, nb, cin, cout, h, wd, kh, kw,
                                oh, ow, stride, pad, x_plane, o_plane] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (bn && bn->requires_grad) {
        double* db = gbuf(bn);
        for (int co = 0; co < cout; ++co) {
          for (int bi = 0; bi < nb; ++bi) {
            db[co] += K().sum(g + (static_cast<std::int64_t>(bi) * cout + co) *
                                      o_plane,
                              static_cast<std::size_t>(o_plane));
          }
        }
      }
      if (wn->requires_grad) {
        double* dw = gbuf(wn);
        const double* xp = xn->data.data();
        for (int co = 0; co < cout; ++co) {
          for (int ci = 0; ci < cin; ++ci) {
            for (int u = 0; u < kh; ++u) {
              const Range rows = valid_range(oh, h, stride, pad, u);
              for (int v = 0; v < kw; ++v) {
                const Range cols = valid_range(ow, wd, stride, pad, v);
                double acc = 0.0;
                for (int bi = 0; bi < nb; ++bi) {
                  const double* gplane =
                      g + (static_cast<std::int64_t>(bi) * cout + co) * o_plane;
                  const double* xplane =
                      xp + (static_cast<std::int64_t>(bi) * cin + ci) * x_plane;
                  for (int r = rows.lo; r < rows.hi; ++r) {
                    const int ih = r * stride - pad + u;
                    acc += row_correlation(
                        gplane + static_cast<std::int64_t>(r) * ow,
                        xplane + static_cast<std::int64_t>(ih) * wd, cols,
                        stride, v, pad);
                  }
                }
                dw[((co * cin + ci) * kh + u) * kw + v] += acc;
              }
            }
          }
        }
      }
      if (xn->requires_grad) {
        double* dx = gbuf(xn);
        const double* wp = wn->data.data();
        parallel_for(nb, [&](std::int64_t b0, std::int64_t b1) {
          for (std::int64_t bi = b0; bi < b1; ++bi) {
            for (int co = 0; co < cout; ++co) {
              const double* gplane = g + (bi * cout + co) * o_plane;
              for (int ci = 0; ci < cin; ++ci) {
                double* dxplane = dx + (bi * cin + ci) * x_plane;
                for (int u = 0; u < kh; ++u) {
                  const Range rows = valid_range(oh, h, stride, pad, u);
                  for (int v = 0; v < kw; ++v) {
                    const Range cols = valid_range(ow, wd, stride, pad, v);
                    const double wv = wp[((co * cin + ci) * kh + u) * kw + v];
                    for (int r = rows.lo; r < rows.hi; ++r) {
                      const int ih = r * stride - pad + u;
                      scatter_row(wv, gplane + static_cast<std::int64_t>(r) * ow,
                                  dxplane + static_cast<std::int64_t>(ih) * wd,
                                  cols, stride, v, pad);
                    }
                  }
                }
              }
            }
          }
        });
      }
    });
  }
  return out;
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
  detail::check_ndim(x, 4, "depthwise_conv2d");
  detail::check_ndim(w, 4, "depthwise_conv2d");
  check_geometry(stride, pad, "depthwise_conv2d");
  const int nb = x.dim(0), ch = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int kh = w.dim(2), kw = w.dim(3);
  if (w.dim(0) != ch || w.dim(1) != 1) {
    throw ShapeError("depthwise_conv2d: weight " + shape_str(w.shape()) +
                     " must be [" + std::to_string(ch) + ",1,kh,kw]");
  }
  const int oh = conv_extent(h, kh, stride, pad, "depthwise_conv2d");
  const int ow = conv_extent(wd, kw, stride, pad, "depthwise_conv2d");
  Tensor out = Tensor::zeros({nb, ch, oh, ow});

  const std::int64_t x_plane = static_cast<std::int64_t>(h) * wd;
  const std::int64_t o_plane = static_cast<std::int64_t>(oh) * ow;
  {
    const double* xp = x.data().data();
    const double* wp = w.data().data();
    double* op = out.mutable_data().data();
    parallel_for(nb, [&](std::int64_t b0, std::int64_t b1) {
      for (std::int64_t bi = b0; bi < b1; ++bi) {
        for (int c = 0; c < ch; ++c) {
          const double* xplane = xp + (bi * ch + c) * x_plane;
          double* oplane = op + (bi * ch + c) * o_plane;
          for (int u = 0; u < kh; ++u) {
            const Range rows = valid_range(oh, h, stride, pad, u);
            for (int v = 0; v < kw; ++v) {
              const Range cols = valid_range(ow, wd, stride, pad, v);
              const double wv = wp[(c * kh + u) * kw + v];
              for (int r = rows.lo; r < rows.hi; ++r) {
                const int ih = r * stride - pad + u;
                accumulate_row(wv, xplane + static_cast<std::int64_t>(ih) * wd,
                               oplane + static_cast<std::int64_t>(r) * ow, cols,
                               stride, v, pad);
              }
            }
          }
        }
      }
    });
  }

  const bool rg = x.requires_grad() || w.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), wn = w.node(), on = out.node();
    GradTape::active()->record([xn, wn, on, nb, ch, h, wd, kh, kw, oh, ow,
                                stride, pad, x_plane, o_plane] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (wn->requires_grad) {
        double* dw = gbuf(wn);
        const double* xp = xn->data.data();
        for (int c = 0; c < ch; ++c) {
          for (int u = 0; u < kh; ++u) {
            const Range rows = valid_range(oh, h, stride, pad, u);
            for (int v = 0; v < kw; ++v) {
              const Range cols = valid_range(ow, wd, stride, pad, v);
              double acc = 0.0;
              for (int bi = 0; bi < nb; ++bi) {
                const double* gplane =
                    g + (static_cast<std::int64_t>(bi) * ch + c) * o_plane;
                const double* xplane =
                    xp + (static_cast<std::int64_t>(bi) * ch + c) * x_plane;
                for (int r = rows.lo; r < rows.hi; ++r) {
                  const int ih = r * stride - pad + u;
                  acc += row_correlation(
                      gplane + static_cast<std::int64_t>(r) * ow,
                      xplane + static_cast<std::int64_t>(ih) * wd, cols, stride,
                      v, pad);
                }
              }
              dw[(c * kh + u) * kw + v] += acc;
            }
          }
        }
      }
      if (xn->requires_grad) {
        double* dx = gbuf(xn);
        const double* wp = wn->data.data();
        parallel_for(nb, [&](std::int64_t b0, std::int64_t b1) {
          for (std::int64_t bi = b0; bi < b1; ++bi) {
            for (int c = 0; c < ch; ++c) {
              const double* gplane = g + (bi * ch + c) * o_plane;
              double* dxplane = dx + (bi * ch + c) * x_plane;
              for (int u = 0; u < kh; ++u) {
                const Range rows = valid_range(oh, h, stride, pad, u);
                for (int v = 0; v < kw; ++v) {
                  const Range cols = valid_range(ow, wd, stride, pad, v);
                  const double wv = wp[(c * kh + u) * kw + v];
                  for (int r = rows.lo; r < rows.hi; ++r) {
                    const int ih = r * stride - pad + u;
                    scatter_row(wv, gplane + static_cast<std::int64_t>(r) * ow,
                                dxplane + static_cast<std::int64_t>(ih) * wd,
                                cols, stride, v, pad);
                  }
                }
              }
            }
          }
        });
      }
    });
  }
  return out;
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
  detail::check_ndim(x, 5, "conv3d");
  detail::check_ndim(w, 5, "conv3d");
  check_geometry(stride, pad, "conv3d");
  const int nb = x.dim(0), cin = x.dim(1), d = x.dim(2), h = x.dim(3),
            wd = x.dim(4);
  const int cout = w.dim(0), kd = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  if (w.dim(1) != cin) {
    throw ShapeError("conv3d: weight expects " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(cin));
  }
  const bool has_bias = b.defined();
  if (has_bias && (b.ndim() != 1 || b.dim(0) != cout)) {
    throw ShapeError("conv3d: bias shape " + shape_str(b.shape()) +
                     " does not match " + std::to_string(cout) + " filters");
  }
  const int od = conv_extent(d, kd, stride, pad, "conv3d");
  const int oh = conv_extent(h, kh, stride, pad, "conv3d");
  const int ow = conv_extent(wd, kw, stride, pad, "conv3d");
  Tensor out = Tensor::zeros({nb, cout, od, oh, ow});

  const std::int64_t x_vol = static_cast<std::int64_t>(d) * h * wd;
  const std::int64_t o_vol = static_cast<std::int64_t>(od) * oh * ow;
  {
    const double* xp = x.data().data();
    const double* wp = w.data().data();
    const double* bp = has_bias ? b.data().data() : nullptr;
    double* op = out.mutable_data().data();
    parallel_for(nb, [&](std::int64_t b0, std::int64_t b1) {
      for (std::int64_t bi = b0; bi < b1; ++bi) {
        for (int co = 0; co < cout; ++co) {
          double* ovol = op + (bi * cout + co) * o_vol;
          if (bp != nullptr) {
            for (std::int64_t i = 0; i < o_vol; ++i) ovol[i] = bp[co];
          }
          for (int ci = 0; ci < cin; ++ci) {
            const double* xvol = xp + (bi * cin + ci) * x_vol;
            for (int t = 0; t < kd; ++t) {
              const Range deps = valid_range(od, d, stride, pad, t);
              for (int u = 0; u < kh; ++u) {
                const Range rows = valid_range(oh, h, stride, pad, u);
                for (int v = 0; v < kw; ++v) {
                  const Range cols = valid_range(ow, wd, stride, pad, v);
                  const double wv =
                      wp[(((co * cin + ci) * kd + t) * kh + u) * kw + v];
                  for (int dd = deps.lo; dd < deps.hi; ++dd) {
                    const int id = dd * stride - pad + t;
                    for (int r = rows.lo; r < rows.hi; ++r) {
                      const int ih = r * stride - pad + u;
                      accumulate_row(
                          wv,
                          xvol + (static_cast<std::int64_t>(id) * h + ih) * wd,
                          ovol + (static_cast<std::int64_t>(dd) * oh + r) * ow,
                          cols, stride, v, pad);
                    }
                  }
                }
              }
            }
          }
        }
      }
    });
  }

  const bool rg = x.requires_grad() || w.requires_grad() ||
                  (has_bias && b.requires_grad());
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), wn = w.node(), on = out.node();
    auto bn = has_bias ? b.node() : std::shared_ptr<TensorNode>();
    GradTape::active()->record([xn, wn, bn, on, nb, cin, cout, d, h, wd, kd, kh,
                                kw, od, oh, ow, stride, pad, x_vol, o_vol] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      if (bn && bn->requires_grad) {
        double* db = gbuf(bn);
        for (int co = 0; co < cout; ++co) {
          for (int bi = 0; bi < nb; ++bi) {
            db[co] += K().sum(
                g + (static_cast<std::int64_t>(bi) * cout + co) * o_vol,
                static_cast<std::size_t>(o_vol));
          }
        }
      }
      if (wn->requires_grad) {
        double* dw = gbuf(wn);
        const double* xp = xn->data.data();
        for (int co = 0; co < cout; ++co) {
          for (int ci = 0; ci < cin; ++ci) {
            for (int t = 0; t < kd; ++t) {
              const Range deps = valid_range(od, d, stride, pad, t);
              for (int u = 0; u < kh; ++u) {
                const Range rows = valid_range(oh, h, stride, pad, u);
                for (int v = 0; v < kw; ++v) {
                  const Range cols = valid_range(ow, wd, stride, pad, v);
                  double acc = 0.0;
                  for (int bi = 0; bi < nb; ++bi) {
                    const double* gvol =
                        g + (static_cast<std::int64_t>(bi) * cout + co) * o_vol;
                    const double* xvol =
                        xp +
                        (static_cast<std::int64_t>(bi) * cin + ci) * x_vol;
                    for (int dd = deps.lo; dd < deps.hi; ++dd) {
                      const int id = dd * stride - pad + t;
                      for (int r = rows.lo; r < rows.hi; ++r) {
                        const int ih = r * stride - pad + u;
                        acc += row_correlation(
                            gvol +
                                (static_cast<std::int64_t>(dd) * oh + r) * ow,
                            xvol +
                                (static_cast<std::int64_t>(id) * h + ih) * wd,
                            cols, stride, v, pad);
                      }
                    }
                  }
                  dw[(((co * cin + ci) * kd + t) * kh + u) * kw + v] += acc;
                }
              }
            }
          }
        }
      }
      if (xn->requires_grad) {
        double* dx = gbuf(xn);
        const double* wp = wn->data.data();
        parallel_for(nb, [&](std::int64_t b0, std::int64_t b1) {
          for (std::int64_t bi = b0; bi < b1; ++bi) {
            for (int co = 0; co < cout; ++co) {
              const double* gvol = g + (bi * cout + co) * o_vol;
              for (int ci = 0; ci < cin; ++ci) {
                double* dxvol = dx + (bi * cin + ci) * x_vol;
                for (int t = 0; t < kd; ++t) {
                  const Range deps = valid_range(od, d, stride, pad, t);
                  for (int u = 0; u < kh; ++u) {
                    const Range rows = valid_range(oh, h, stride, pad, u);
                    for (int v = 0; v < kw; ++v) {
                      const Range cols = valid_range(ow, wd, stride, pad, v);
                      const double wv =
                          wp[(((co * cin + ci) * kd + t) * kh + u) * kw + v];
                      for (int dd = deps.lo; dd < deps.hi; ++dd) {
                        const int id = dd * stride - pad + t;
                        for (int r = rows.lo; r < rows.hi; ++r) {
                          const int ih = r * stride - pad + u;
                          scatter_row(
                              wv,
                              gvol +
                                  (static_cast<std::int64_t>(dd) * oh + r) * ow,
                              dxvol +
                                  (static_cast<std::int64_t>(id) * h + ih) * wd,
                              cols, stride, v, pad);
                        }
                      }
                    }
                  }
                }
              }
            }
          }
        });
      }
    });
  }
  return out;
}

Tensor avg_pool2d(const Tensor& x, int kernel, int stride) {
  detail::check_ndim(x, 4, "avg_pool2d");
  if (kernel < 1 || stride < 1) {
    throw ConfigError("avg_pool2d: kernel and stride must be >= 1");
  }
  const int nb = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  // Ceil mode without padding: trailing partial windows are kept and
  // divided by their in-bounds element count.
  auto pooled_extent = [&](int in) {
    int out = in <= kernel ? 1 : (in - kernel + stride - 1) / stride + 1;
    while (out > 1 && (out - 1) * stride >= in) --out;
    return out;
  };
  const int oh = pooled_extent(h);
  const int ow = pooled_extent(w);
  Tensor out = Tensor::zeros({nb, ch, oh, ow});

  const std::int64_t x_plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t o_plane = static_cast<std::int64_t>(oh) * ow;
  {
    const double* xp = x.data().data();
    double* op = out.mutable_data().data();
    for (int pc = 0; pc < nb * ch; ++pc) {
      const double* xplane = xp + pc * x_plane;
      double* oplane = op + pc * o_plane;
      for (int r = 0; r < oh; ++r) {
        const int r0 = r * stride;
        const int r1 = std::min(r0 + kernel, h);
        for (int c = 0; c < ow; ++c) {
          const int c0 = c * stride;
          const int c1 = std::min(c0 + kernel, w);
          const int count = (r1 - r0) * (c1 - c0);
          // Difference-form mean: constants pool to themselves exactly.
          const double first = xplane[static_cast<std::int64_t>(r0) * w + c0];
          double acc = 0.0;
          for (int i = r0; i < r1; ++i) {
            for (int j = c0; j < c1; ++j) {
              acc += xplane[static_cast<std::int64_t>(i) * w + j] - first;
            }
          }
          oplane[static_cast<std::int64_t>(r) * ow + c] =
              first + acc / static_cast<double>(count);
        }
      }
    }
  }

  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record(
        [xn, on, nb, ch, h, w, oh, ow, kernel, stride, x_plane, o_plane] {
          const double* g = upstream(on);
          if (g == nullptr) return;
          double* dx = gbuf(xn);
          for (int pc = 0; pc < nb * ch; ++pc) {
            const double* gplane = g + pc * o_plane;
            double* dxplane = dx + pc * x_plane;
            for (int r = 0; r < oh; ++r) {
              const int r0 = r * stride;
              const int r1 = std::min(r0 + kernel, h);
              for (int c = 0; c < ow; ++c) {
                const int c0 = c * stride;
                const int c1 = std::min(c0 + kernel, w);
                const int count = (r1 - r0) * (c1 - c0);
                const double share =
                    gplane[static_cast<std::int64_t>(r) * ow + c] /
                    static_cast<double>(count);
                for (int i = r0; i < r1; ++i) {
                  for (int j = c0; j < c1; ++j) {
                    dxplane[static_cast<std::int64_t>(i) * w + j] += share;
                  }
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w) {
  detail::check_ndim(x, 4, "bilinear_upsample");
  const int nb = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (out_h < h || out_w < w) {
    throw ShapeError("bilinear_upsample: target " + std::to_string(out_h) +
                     "x" + std::to_string(out_w) + " smaller than source " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  struct Tap {
    int i0, i1;
    double f;
  };
  auto make_taps = [](int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double pos = (o + 0.5) * scale - 0.5;
      if (pos < 0.0) pos = 0.0;
      if (pos > in - 1) pos = in - 1;
      const int i0 = static_cast<int>(pos);
      const int i1 = std::min(i0 + 1, in - 1);
      taps[static_cast<std::size_t>(o)] = {i0, i1, pos - i0};
    }
    return taps;
  };
  const std::vector<Tap> ty = make_taps(h, out_h);
  const std::vector<Tap> tx = make_taps(w, out_w);

  Tensor out = Tensor::zeros({nb, ch, out_h, out_w});
  const std::int64_t x_plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t o_plane = static_cast<std::int64_t>(out_h) * out_w;
  {
    const double* xp = x.data().data();
    double* op = out.mutable_data().data();
    for (int pc = 0; pc < nb * ch; ++pc) {
      const double* xplane = xp + pc * x_plane;
      double* oplane = op + pc * o_plane;
      for (int r = 0; r < out_h; ++r) {
        const Tap& a = ty[static_cast<std::size_t>(r)];
        for (int c = 0; c < out_w; ++c) {
          const Tap& b = tx[static_cast<std::size_t>(c)];
          const double v00 = xplane[static_cast<std::int64_t>(a.i0) * w + b.i0];
          const double v01 = xplane[static_cast<std::int64_t>(a.i0) * w + b.i1];
          const double v10 = xplane[static_cast<std::int64_t>(a.i1) * w + b.i0];
          const double v11 = xplane[static_cast<std::int64_t>(a.i1) * w + b.i1];
          // Difference form keeps constant inputs exact.
          const double top = v00 + b.f * (v01 - v00);
          const double bot = v10 + b.f * (v11 - v10);
          oplane[static_cast<std::int64_t>(r) * out_w + c] =
              top + a.f * (bot - top);
        }
      }
    }
  }

  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record(
        [xn, on, nb, ch, w, out_h, out_w, ty, tx, x_plane, o_plane] {
          const double* g = upstream(on);
          if (g == nullptr) return;
          double* dx = gbuf(xn);
          for (int pc = 0; pc < nb * ch; ++pc) {
            const double* gplane = g + pc * o_plane;
            double* dxplane = dx + pc * x_plane;
            for (int r = 0; r < out_h; ++r) {
              const Tap& a = ty[static_cast<std::size_t>(r)];
              for (int c = 0; c < out_w; ++c) {
                const Tap& b = tx[static_cast<std::size_t>(c)];
                const double gv =
                    gplane[static_cast<std::int64_t>(r) * out_w + c];
                dxplane[static_cast<std::int64_t>(a.i0) * w + b.i0] +=
                    gv * (1.0 - a.f) * (1.0 - b.f);
                dxplane[static_cast<std::int64_t>(a.i0) * w + b.i1] +=
                    gv * (1.0 - a.f) * b.f;
                dxplane[static_cast<std::int64_t>(a.i1) * w + b.i0] +=
                    gv * a.f * (1.0 - b.f);
                dxplane[static_cast<std::int64_t>(a.i1) * w + b.i1] +=
                    gv * a.f * b.f;
              }
            }
          }
        });
  }
  return out;
}

}  // namespace picnet::ops
