#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "error.hpp"

namespace bf {

using Shape = std::vector<int64_t>;

int64_t shape_size(const Shape& shape);

// Dense row-major 64-bit tensor with value semantics. Rank is 1 or 2
// everywhere in this project; scalars are shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(values_.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  int64_t cols() const { return rank() == 2 ? shape_[1] : 1; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](int64_t i) { return values_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return values_[static_cast<size_t>(i)]; }
  double& at(int64_t r, int64_t c) { return values_[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return values_[static_cast<size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> values_;
};

// Linear record of primitive applications. The reverse pass walks records in
// strict reverse order of the forward pass; a tape may run backward once.
// Tapes are confined to one logical execution context.
class Tape {
 public:
  using Var = int32_t;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var matmul(Var a, Var b);                 // [m,k] @ [k,n] -> [m,n]
  Var add(Var a, Var b);                    // same shape
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                    // elementwise
  Var add_row(Var a, Var bias);             // [m,n] + [n], row broadcast
  Var mul_col(Var a, Var col);              // [m,n] * [m,1], column broadcast
  Var scale(Var a, double factor);
  Var relu(Var a);                          // derivative at 0 is 0
  Var silu(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, int64_t from, int64_t to);
  Var sum_all(Var a);                       // -> scalar
  Var mean_all(Var a);
  Var sum_axis(Var a, int axis);            // 2-D only
  Var mean_axis(Var a, int axis);
  Var gather_rows(Var src, std::vector<int64_t> indices);
  Var scatter_add_rows(Var src, std::vector<int64_t> indices, int64_t out_rows);
  Var l1_loss(Var a, Var b);                // scalar, mean |a-b|
  Var l2_loss(Var a, Var b);                // scalar, mean (a-b)^2

  // Seeds the scalar `loss` with 1 and accumulates gradients for every
  // record on the tape; records not contributing to the loss keep zero grad.
  void backward(Var loss);
  bool backward_done() const { return consumed_; }

  const Tensor& value(Var v) const { return node(v).value; }
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  int64_t node_count() const { return static_cast<int64_t>(nodes_.size()); }
  // Forward arithmetic operations recorded so far (multiply-accumulates count 2).
  uint64_t flop_count() const { return flops_; }

 private:
  enum class Prim : uint8_t {
    Leaf, MatMul, Add, Sub, Mul, AddRow, MulCol, Scale, Relu, Silu,
    Concat, Slice, SumAll, MeanAll, SumAxis, MeanAxis, Gather, ScatterAdd,
    L1Loss, L2Loss,
  };

  struct Node {
    Tensor value;
    Tensor grad;  // allocated during backward
    Prim op = Prim::Leaf;
    bool requires_grad = false;
    std::vector<Var> inputs;
    std::vector<int64_t> aux;  // indices / axis / slice bounds
    double factor = 0.0;       // Scale
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node node);
  Var unary(Prim op, Var a, Tensor value, uint64_t flops);
  Var binary(Prim op, Var a, Var b, Tensor value, uint64_t flops);
  void backward_step(Node& n);
  Tensor& grad_buffer(Var v);

  std::vector<Node> nodes_;
  bool consumed_ = false;
  uint64_t flops_ = 0;
};

// Builds a scalar loss on a tape from a single input leaf.
using ScalarFn = std::function<Tape::Var(Tape&, Tape::Var)>;

// Max over coordinates of |analytic - central difference| / max(1, |central
// difference|). `fn` must be smooth at `point`; a non-finite evaluation is an
// error.
double grad_check(const ScalarFn& fn, const Tensor& point, double step);

}  // namespace bf
