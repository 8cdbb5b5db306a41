#include "eapcr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "eapcr/error.hpp"

namespace eapcr::autodiff {

namespace {

std::atomic<TensorId> next_id{1};

TensorId fresh_id() { return next_id.fetch_add(1, std::memory_order_relaxed); }

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
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

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : id_(fresh_id()), requires_grad_(requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (autodiff::numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(autodiff::numel(shape)) +
                         " values, got " + std::to_string(data.size()));
  }
  storage_ = std::make_shared<const Storage>(Storage{std::move(shape), std::move(data)});
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = autodiff::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(data), requires_grad);
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) + " vs tensor " + shape_str(s));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw LookupError("index " + std::to_string(i) + " out of range on axis " + std::to_string(axis));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return storage_->data[flat];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return storage_->data[0];
}

Tensor Tensor::detached(bool requires_grad) const {
  return Tensor(storage_->shape, storage_->data, requires_grad);
}

bool Tensor::all_finite() const {
  return std::all_of(storage_->data.begin(), storage_->data.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

Tensor Graph::emit(const char* op, std::vector<Tensor> inputs, Shape shape, std::vector<double> values,
                   BackwardFn backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  const bool needs_grad =
      recording() && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  Tensor out(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    if (consumed_) throw StateError(std::string("cannot record ") + op + " on a graph after backward");
    nodes_.push_back(Node{op, std::move(inputs), out, std::move(backward)});
  }
  return out;
}

void Graph::backward(const Tensor& loss) {
  if (!recording()) throw StateError("backward on an inference-mode graph");
  if (consumed_) throw StateError("backward already ran on this graph; build a new graph");
  if (loss.numel() != 1) throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  const bool produced_here = std::any_of(nodes_.begin(), nodes_.end(),
                                         [&](const Node& n) { return n.output.id() == loss.id(); });
  if (!produced_here) throw ContractError("loss was not produced through this graph");

  consumed_ = true;
  grads_.clear();
  grads_[loss.id()] = std::vector<double>{1.0};

  std::vector<std::vector<double>> grad_in;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const Node& node = *it;
    auto found = grads_.find(node.output.id());
    if (found == grads_.end()) continue;

    grad_in.assign(node.inputs.size(), {});
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (node.inputs[i].requires_grad()) grad_in[i].assign(node.inputs[i].numel(), 0.0);
    }
    node.backward(found->second, grad_in);

    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (grad_in[i].empty()) continue;
      auto& slot = grads_[node.inputs[i].id()];
      if (slot.empty()) {
        slot = std::move(grad_in[i]);
      } else {
        for (std::size_t k = 0; k < slot.size(); ++k) slot[k] += grad_in[i][k];
      }
    }
  }
}

bool Graph::has_grad(const Tensor& t) const { return grads_.count(t.id()) != 0; }

Tensor Graph::grad(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) {
    if (!consumed_) throw StateError("gradients requested before backward");
    // Unreachable from the loss: the gradient is identically zero.
    return Tensor::zeros(t.shape());
  }
  return Tensor(t.shape(), it->second);
}

}  // namespace eapcr::autodiff
