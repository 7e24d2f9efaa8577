#include <cstddef>
#include <cstdint>
#include <cstring>

#include "ops_common.hpp"
#include "picnet/ops.hpp"

namespace picnet::ops {

using detail::gbuf;
using detail::K;
using detail::upstream;

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw UsageError("concat: no inputs");
  const Shape& first = xs[0].shape();
  if (axis < 0 || axis >= static_cast<int>(first.size())) {
    throw ShapeError("concat: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(first));
  }
  int cat_extent = 0;
  for (const Tensor& t : xs) {
    const Shape& s = t.shape();
    if (s.size() != first.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(first) + " vs " +
                       shape_str(s));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != first[i]) {
        throw ShapeError("concat: extent mismatch on axis " +
                         std::to_string(i) + ": " + shape_str(first) + " vs " +
                         shape_str(s));
      }
    }
    cat_extent += s[static_cast<std::size_t>(axis)];
  }
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(axis)] = cat_extent;

  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= first[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < first.size();
       ++i) {
    inner *= first[i];
  }

  Tensor out = Tensor::zeros(out_shape);
  {
    double* op = out.mutable_data().data();
    const std::int64_t out_block = static_cast<std::int64_t>(cat_extent) * inner;
    std::int64_t offset = 0;
    for (const Tensor& t : xs) {
      const std::int64_t block =
          static_cast<std::int64_t>(t.dim(axis)) * inner;
      const double* ip = t.data().data();
      for (std::int64_t o = 0; o < outer; ++o) {
        std::memcpy(op + o * out_block + offset, ip + o * block,
                    static_cast<std::size_t>(block) * sizeof(double));
      }
      offset += block;
    }
  }

  bool rg = false;
  for (const Tensor& t : xs) rg = rg || t.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    std::vector<std::int64_t> blocks;
    nodes.reserve(xs.size());
    for (const Tensor& t : xs) {
      nodes.push_back(t.node());
      blocks.push_back(static_cast<std::int64_t>(t.dim(axis)) * inner);
    }
    auto on = out.node();
    const std::int64_t out_block = static_cast<std::int64_t>(cat_extent) * inner;
    GradTape::active()->record([nodes, blocks, on, outer, out_block] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      std::int64_t offset = 0;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i]->requires_grad) {
          double* dst = gbuf(nodes[i]);
          for (std::int64_t o = 0; o < outer; ++o) {
            K().axpy(1.0, g + o * out_block + offset, dst + o * blocks[i],
                     static_cast<std::size_t>(blocks[i]));
          }
        }
        offset += blocks[i];
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " has " +
                     std::to_string(x.numel()) + " elements, target " +
                     shape_str(new_shape));
  }
  Tensor out = Tensor::from(std::move(new_shape), x.data());
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    const std::size_t n = x.data().size();
    GradTape::active()->record([xn, on, n] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      K().axpy(1.0, g, gbuf(xn), n);
    });
  }
  return out;
}

Tensor grid_to_tokens(const Tensor& x) {
  detail::check_ndim(x, 4, "grid_to_tokens");
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int t = h * w;
  Tensor out = Tensor::zeros({b, t, c});
  {
    const double* in = x.data().data();
    double* o = out.mutable_data().data();
    for (int bi = 0; bi < b; ++bi) {
      for (int ci = 0; ci < c; ++ci) {
        const double* plane =
            in + (static_cast<std::int64_t>(bi) * c + ci) * t;
        double* obatch = o + static_cast<std::int64_t>(bi) * t * c;
        for (int ti = 0; ti < t; ++ti) obatch[ti * c + ci] = plane[ti];
      }
    }
  }
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, b, c, t] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      double* dx = gbuf(xn);
      for (int bi = 0; bi < b; ++bi) {
        for (int ci = 0; ci < c; ++ci) {
          double* plane = dx + (static_cast<std::int64_t>(bi) * c + ci) * t;
          const double* gbatch = g + static_cast<std::int64_t>(bi) * t * c;
          for (int ti = 0; ti < t; ++ti) plane[ti] += gbatch[ti * c + ci];
        }
      }
    });
  }
  return out;
}

Tensor tokens_to_grid(const Tensor& x, int h, int w) {
  detail::check_ndim(x, 3, "tokens_to_grid");
  const int b = x.dim(0), t = x.dim(1), c = x.dim(2);
  if (t != h * w) {
    throw ShapeError("tokens_to_grid: " + std::to_string(t) +
                     " tokens cannot fill a " + std::to_string(h) + "x" +
                     std::to_string(w) + " grid");
  }
  Tensor out = Tensor::zeros({b, c, h, w});
  {
    const double* in = x.data().data();
    double* o = out.mutable_data().data();
    for (int bi = 0; bi < b; ++bi) {
      const double* ibatch = in + static_cast<std::int64_t>(bi) * t * c;
      for (int ci = 0; ci < c; ++ci) {
        double* plane = o + (static_cast<std::int64_t>(bi) * c + ci) * t;
        for (int ti = 0; ti < t; ++ti) plane[ti] = ibatch[ti * c + ci];
      }
    }
  }
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, b, c, t] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      double* dx = gbuf(xn);
      for (int bi = 0; bi < b; ++bi) {
        double* ibatch = dx + static_cast<std::int64_t>(bi) * t * c;
        for (int ci = 0; ci < c; ++ci) {
          const double* plane =
              g + (static_cast<std::int64_t>(bi) * c + ci) * t;
          for (int ti = 0; ti < t; ++ti) ibatch[ti * c + ci] += plane[ti];
        }
      }
    });
  }
  return out;
}

Tensor select0(const Tensor& x, int index) {
  if (x.ndim() < 2) throw ShapeError("select0: rank must be >= 2");
  const int d0 = x.dim(0);
  if (index < 0 || index >= d0) {
    throw ShapeError("select0: index " + std::to_string(index) +
                     " out of range for " + shape_str(x.shape()));
  }
  Shape out_shape(x.shape().begin() + 1, x.shape().end());
  const std::int64_t block = shape_numel(out_shape);
  std::vector<double> data(
      x.data().begin() + static_cast<std::ptrdiff_t>(index * block),
      x.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * block));
  Tensor out = Tensor::from(std::move(out_shape), std::move(data));
  const bool rg = x.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    auto xn = x.node(), on = out.node();
    GradTape::active()->record([xn, on, index, block] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      K().axpy(1.0, g, gbuf(xn) + index * block,
               static_cast<std::size_t>(block));
    });
  }
  return out;
}

Tensor stack0(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw UsageError("stack0: no inputs");
  const Shape& inner = xs[0].shape();
  for (const Tensor& t : xs) {
    if (!same_shape(t.shape(), inner)) {
      throw ShapeError("stack0: shape mismatch " + shape_str(inner) + " vs " +
                       shape_str(t.shape()));
    }
  }
  Shape out_shape;
  out_shape.push_back(static_cast<int>(xs.size()));
  out_shape.insert(out_shape.end(), inner.begin(), inner.end());
  const std::int64_t block = shape_numel(inner);
  Tensor out = Tensor::zeros(out_shape);
  {
    double* o = out.mutable_data().data();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::memcpy(o + static_cast<std::int64_t>(i) * block,
                  xs[i].data().data(),
                  static_cast<std::size_t>(block) * sizeof(double));
    }
  }
  bool rg = false;
  for (const Tensor& t : xs) rg = rg || t.requires_grad();
  out.set_requires_grad(rg);
  if (rg && grad_recording()) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(xs.size());
    for (const Tensor& t : xs) nodes.push_back(t.node());
    auto on = out.node();
    GradTape::active()->record([nodes, on, block] {
      const double* g = upstream(on);
      if (g == nullptr) return;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i]->requires_grad) continue;
        K().axpy(1.0, g + static_cast<std::int64_t>(i) * block,
                 gbuf(nodes[i]), static_cast<std::size_t>(block));
      }
    });
  }
  return out;
}

}  // namespace picnet::ops
