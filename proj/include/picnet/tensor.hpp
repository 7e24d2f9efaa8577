#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace picnet {

// Extents of a dense row-major tensor.
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  // Allocated lazily on first accumulation; always shape-sized once present.
  std::vector<double> grad;
  bool requires_grad = false;
};

// Dense binary64 tensor. A Tensor is a cheap handle onto a shared node;
// values are treated as immutable after construction except by the
// optimizer and by gradient accumulation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int dim(int axis) const;
  std::int64_t numel() const;

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  const std::vector<double>& grad() const;  // UsageError when absent
  // Zero-allocates the gradient if absent, then returns it.
  std::vector<double>& ensure_grad();
  void zero_grad();
  void drop_grad();

  // Value of a one-element tensor; UsageError otherwise.
  double item() const;

  bool all_finite() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

}  // namespace picnet
