#include "picnet/tensor.hpp"

#include <cmath>
#include <sstream>

#include "picnet/errors.hpp"

namespace picnet {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (auto& x : t.mutable_data()) x = value;
  return t;
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!defined()) throw UsageError("shape() on undefined tensor");
  return node_->shape;
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw UsageError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(data().size());
}

const std::vector<double>& Tensor::data() const {
  if (!defined()) throw UsageError("data() on undefined tensor");
  return node_->data;
}

std::vector<double>& Tensor::mutable_data() {
  if (!defined()) throw UsageError("mutable_data() on undefined tensor");
  return node_->data;
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!defined()) throw UsageError("set_requires_grad() on undefined tensor");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw UsageError("gradient not populated");
  return node_->grad;
}

std::vector<double>& Tensor::ensure_grad() {
  if (!defined()) throw UsageError("ensure_grad() on undefined tensor");
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (has_grad()) node_->grad.assign(node_->data.size(), 0.0);
}

void Tensor::drop_grad() {
  if (defined()) node_->grad.clear();
}

double Tensor::item() const {
  if (numel() != 1) {
    throw UsageError("item() requires a one-element tensor, got " +
                     shape_str(shape()));
  }
  return data()[0];
}

bool Tensor::all_finite() const {
  for (double v : data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace picnet
