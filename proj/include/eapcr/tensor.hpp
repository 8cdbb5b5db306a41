#pragma once

// Dense float64 tensors with a recorded tape for reverse-mode differentiation.
//
// A Tensor is an immutable handle: copies share storage and identity. Every
// differentiable op takes the Graph it records onto as its first argument;
// the op's output requires a gradient iff the graph is recording and any
// input requires one. Graph::backward replays the tape in exact reverse.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace eapcr::autodiff {

using Shape = std::vector<std::size_t>;
using TensorId = std::uint64_t;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t numel() const { return storage_->data.size(); }
  std::span<const double> data() const { return storage_->data; }
  double operator[](std::size_t i) const { return storage_->data[i]; }
  double at(std::initializer_list<std::size_t> index) const;
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  TensorId id() const { return id_; }

  // Same values under a fresh identity.
  Tensor detached(bool requires_grad = false) const;
  bool all_finite() const;

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
  };
  std::shared_ptr<const Storage> storage_;
  TensorId id_ = 0;
  bool requires_grad_ = false;
};

enum class GraphMode { Record, Inference };

class Graph {
 public:
  // Receives dL/d(output) and one buffer per input; a buffer is sized to its
  // input when that input requires a gradient and is empty otherwise.
  using BackwardFn = std::function<void(std::span<const double> grad_out,
                                        std::vector<std::vector<double>>& grad_in)>;

  explicit Graph(GraphMode mode = GraphMode::Record) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return mode_ == GraphMode::Record; }
  std::size_t size() const { return nodes_.size(); }

  // Wraps freshly computed values as the op's output and records the node
  // when any input requires a gradient. Throws NumericError on non-finite
  // output.
  Tensor emit(const char* op, std::vector<Tensor> inputs, Shape shape,
              std::vector<double> values, BackwardFn backward);

  // Fills gradient buffers for every requires_grad tensor reachable from
  // `loss`. Allowed once per graph.
  void backward(const Tensor& loss);

  bool has_grad(const Tensor& t) const;
  Tensor grad(const Tensor& t) const;

 private:
  struct Node {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  GraphMode mode_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<TensorId, std::vector<double>> grads_;
};

// ---- differentiable primitives ----

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
// Stride-1 "same" cross-correlation with 3x3 kernels plus per-channel bias.
Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernels, const Tensor& bias);
// 2x2 windows, stride 2; odd trailing rows/columns form narrower windows.
Tensor maxpool2(Graph& g, const Tensor& input);
Tensor relu(Graph& g, const Tensor& x);
Tensor gather_rows(Graph& g, const Tensor& table, std::span<const std::size_t> indices);
Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor scale(Graph& g, const Tensor& x, double factor);
Tensor concat(Graph& g, const std::vector<Tensor>& parts, std::size_t axis);
Tensor transpose(Graph& g, const Tensor& x);
Tensor reshape(Graph& g, const Tensor& x, Shape shape);
Tensor flatten(Graph& g, const Tensor& x);
Tensor sum(Graph& g, const Tensor& x);
Tensor mean(Graph& g, const Tensor& x);

}  // namespace eapcr::autodiff
