#include "tensor.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace bf {

int64_t shape_size(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    require(d >= 0, Error::Kind::InvalidArgument, "negative dimension in shape");
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  values_.assign(static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(shape_size(shape_) == static_cast<int64_t>(values_.size()),
          Error::Kind::InvalidArgument, "shape does not match element count");
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_2d(const Tensor& t, const char* what) {
  require(t.rank() == 2, Error::Kind::InvalidArgument,
          std::string(what) + " requires a 2-D tensor");
}

}  // namespace

Tape::Node& Tape::node(Var v) {
  require(v >= 0 && v < static_cast<Var>(nodes_.size()), Error::Kind::InvalidArgument,
          "tape variable out of range");
  return nodes_[static_cast<size_t>(v)];
}

const Tape::Node& Tape::node(Var v) const {
  require(v >= 0 && v < static_cast<Var>(nodes_.size()), Error::Kind::InvalidArgument,
          "tape variable out of range");
  return nodes_[static_cast<size_t>(v)];
}

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Tape::Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.op = Prim::Leaf;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Tape::Var Tape::unary(Prim op, Var a, Tensor value, uint64_t flops) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.inputs = {a};
  n.requires_grad = node(a).requires_grad;
  flops_ += flops;
  return push(std::move(n));
}

Tape::Var Tape::binary(Prim op, Var a, Var b, Tensor value, uint64_t flops) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.inputs = {a, b};
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  flops_ += flops;
  return push(std::move(n));
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_2d(ta, "matmul");
  check_2d(tb, "matmul");
  require(ta.cols() == tb.rows(), Error::Kind::InvalidArgument,
          "matmul inner dimensions differ");
  const int64_t m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out({m, n});
  const double* pa = ta.data();
  const double* pb = tb.data();
  double* po = out.data();
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* orow = po + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return binary(Prim::MatMul, a, b, std::move(out),
                2ull * static_cast<uint64_t>(m) * static_cast<uint64_t>(k) *
                    static_cast<uint64_t>(n));
}

Tape::Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), Error::Kind::InvalidArgument, "add shape mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + tb[i];
  return binary(Prim::Add, a, b, std::move(out), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), Error::Kind::InvalidArgument, "sub shape mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] - tb[i];
  return binary(Prim::Sub, a, b, std::move(out), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), Error::Kind::InvalidArgument, "mul shape mismatch");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * tb[i];
  return binary(Prim::Mul, a, b, std::move(out), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::add_row(Var a, Var bias) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(bias);
  check_2d(ta, "add_row");
  require(tb.rank() == 1 && tb.rows() == ta.cols(), Error::Kind::InvalidArgument,
          "add_row bias length must equal column count");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.rows(); ++i)
    for (int64_t j = 0; j < ta.cols(); ++j) out.at(i, j) = ta.at(i, j) + tb[j];
  return binary(Prim::AddRow, a, bias, std::move(out), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::mul_col(Var a, Var col) {
  const Tensor& ta = value(a);
  const Tensor& tc = value(col);
  check_2d(ta, "mul_col");
  require(tc.rank() == 2 && tc.cols() == 1 && tc.rows() == ta.rows(),
          Error::Kind::InvalidArgument, "mul_col column must be [rows,1]");
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.rows(); ++i)
    for (int64_t j = 0; j < ta.cols(); ++j) out.at(i, j) = ta.at(i, j) * tc[i];
  return binary(Prim::MulCol, a, col, std::move(out), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::scale(Var a, double factor) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = factor * ta[i];
  Var v = unary(Prim::Scale, a, std::move(out), static_cast<uint64_t>(ta.size()));
  node(v).factor = factor;
  return v;
}

Tape::Var Tape::relu(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
  return unary(Prim::Relu, a, std::move(out), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::silu(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * sigmoid(ta[i]);
  return unary(Prim::Silu, a, std::move(out), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), Error::Kind::InvalidArgument, "concat of zero tensors");
  const int64_t rows = value(parts[0]).rows();
  int64_t total_cols = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    check_2d(t, "concat_cols");
    require(t.rows() == rows, Error::Kind::InvalidArgument, "concat row count mismatch");
    total_cols += t.cols();
  }
  Tensor out({rows, total_cols});
  int64_t offset = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    for (int64_t i = 0; i < rows; ++i)
      std::memcpy(out.data() + i * total_cols + offset, t.data() + i * t.cols(),
                  static_cast<size_t>(t.cols()) * sizeof(double));
    offset += t.cols();
  }
  Node n;
  n.value = std::move(out);
  n.op = Prim::Concat;
  n.inputs.assign(parts.begin(), parts.end());
  for (Var p : parts) n.requires_grad = n.requires_grad || node(p).requires_grad;
  return push(std::move(n));
}

Tape::Var Tape::slice_cols(Var a, int64_t from, int64_t to) {
  const Tensor& ta = value(a);
  check_2d(ta, "slice_cols");
  require(0 <= from && from < to && to <= ta.cols(), Error::Kind::InvalidArgument,
          "slice bounds out of range");
  Tensor out({ta.rows(), to - from});
  for (int64_t i = 0; i < ta.rows(); ++i)
    std::memcpy(out.data() + i * (to - from), ta.data() + i * ta.cols() + from,
                static_cast<size_t>(to - from) * sizeof(double));
  Var v = unary(Prim::Slice, a, std::move(out), 0);
  node(v).aux = {from, to};
  return v;
}

Tape::Var Tape::sum_all(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (int64_t i = 0; i < ta.size(); ++i) s += ta[i];
  return unary(Prim::SumAll, a, Tensor::scalar(s), static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::mean_all(Var a) {
  const Tensor& ta = value(a);
  require(ta.size() > 0, Error::Kind::InvalidArgument, "mean of empty tensor");
  double s = 0.0;
  for (int64_t i = 0; i < ta.size(); ++i) s += ta[i];
  return unary(Prim::MeanAll, a, Tensor::scalar(s / static_cast<double>(ta.size())),
               static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::sum_axis(Var a, int axis) {
  const Tensor& ta = value(a);
  check_2d(ta, "sum_axis");
  require(axis == 0 || axis == 1, Error::Kind::InvalidArgument, "axis must be 0 or 1");
  Tensor out(axis == 0 ? Shape{ta.cols()} : Shape{ta.rows()});
  for (int64_t i = 0; i < ta.rows(); ++i)
    for (int64_t j = 0; j < ta.cols(); ++j) out[axis == 0 ? j : i] += ta.at(i, j);
  Var v = unary(Prim::SumAxis, a, std::move(out), static_cast<uint64_t>(ta.size()));
  node(v).aux = {axis};
  return v;
}

Tape::Var Tape::mean_axis(Var a, int axis) {
  const Tensor& ta = value(a);
  check_2d(ta, "mean_axis");
  require(axis == 0 || axis == 1, Error::Kind::InvalidArgument, "axis must be 0 or 1");
  const double denom = static_cast<double>(axis == 0 ? ta.rows() : ta.cols());
  require(denom > 0, Error::Kind::InvalidArgument, "mean over empty axis");
  Tensor out(axis == 0 ? Shape{ta.cols()} : Shape{ta.rows()});
  for (int64_t i = 0; i < ta.rows(); ++i)
    for (int64_t j = 0; j < ta.cols(); ++j) out[axis == 0 ? j : i] += ta.at(i, j);
  for (int64_t i = 0; i < out.size(); ++i) out[i] /= denom;
  Var v = unary(Prim::MeanAxis, a, std::move(out), static_cast<uint64_t>(ta.size()));
  node(v).aux = {axis};
  return v;
}

Tape::Var Tape::gather_rows(Var src, std::vector<int64_t> indices) {
  const Tensor& ts = value(src);
  check_2d(ts, "gather_rows");
  for (int64_t idx : indices)
    require(0 <= idx && idx < ts.rows(), Error::Kind::InvalidArgument,
            "gather index out of range");
  Tensor out({static_cast<int64_t>(indices.size()), ts.cols()});
  for (size_t k = 0; k < indices.size(); ++k)
    std::memcpy(out.data() + static_cast<int64_t>(k) * ts.cols(),
                ts.data() + indices[k] * ts.cols(),
                static_cast<size_t>(ts.cols()) * sizeof(double));
  Var v = unary(Prim::Gather, src, std::move(out), 0);
  node(v).aux = std::move(indices);
  return v;
}

Tape::Var Tape::scatter_add_rows(Var src, std::vector<int64_t> indices, int64_t out_rows) {
  const Tensor& ts = value(src);
  check_2d(ts, "scatter_add_rows");
  require(static_cast<int64_t>(indices.size()) == ts.rows(), Error::Kind::InvalidArgument,
          "scatter index count must equal source rows");
  for (int64_t idx : indices)
    require(0 <= idx && idx < out_rows, Error::Kind::InvalidArgument,
            "scatter index out of range");
  Tensor out({out_rows, ts.cols()});
  // Accumulation in ascending source-row order keeps runs bit-reproducible.
  for (int64_t k = 0; k < ts.rows(); ++k)
    for (int64_t j = 0; j < ts.cols(); ++j) out.at(indices[static_cast<size_t>(k)], j) += ts.at(k, j);
  Var v = unary(Prim::ScatterAdd, src, std::move(out), static_cast<uint64_t>(ts.size()));
  node(v).aux = std::move(indices);
  node(v).aux.push_back(out_rows);
  return v;
}

Tape::Var Tape::l1_loss(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), Error::Kind::InvalidArgument, "l1_loss shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < ta.size(); ++i) s += std::abs(ta[i] - tb[i]);
  return binary(Prim::L1Loss, a, b, Tensor::scalar(s / static_cast<double>(ta.size())),
                3ull * static_cast<uint64_t>(ta.size()));
}

Tape::Var Tape::l2_loss(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), Error::Kind::InvalidArgument, "l2_loss shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < ta.size(); ++i) {
    const double d = ta[i] - tb[i];
    s += d * d;
  }
  return binary(Prim::L2Loss, a, b, Tensor::scalar(s / static_cast<double>(ta.size())),
                3ull * static_cast<uint64_t>(ta.size()));
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  require(consumed_, Error::Kind::InvalidArgument, "backward has not run on this tape");
  const Node& n = node(v);
  require(n.grad.size() == n.value.size(), Error::Kind::Internal, "missing gradient buffer");
  return n.grad;
}

void Tape::backward(Var loss) {
  require(!consumed_, Error::Kind::InvalidArgument, "tape already consumed by backward");
  const Node& ln = node(loss);
  require(ln.value.size() == 1, Error::Kind::InvalidArgument,
          "backward seed must be a scalar");
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
  consumed_ = true;
  node(loss).grad[0] = 1.0;
  for (Var v = loss; v >= 0; --v) backward_step(node(v));
}

void Tape::backward_step(Node& n) {
  if (n.op == Prim::Leaf) return;
  const Tensor& g = n.grad;
  switch (n.op) {
    case Prim::MatMul: {
      const Tensor& a = node(n.inputs[0]).value;
      const Tensor& b = node(n.inputs[1]).value;
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& db = grad_buffer(n.inputs[1]);
      const int64_t m = a.rows(), k = a.cols(), c = b.cols();
      // da += g @ b^T ; db += a^T @ g
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < c; ++j) {
          const double gv = g.at(i, j);
          if (gv == 0.0) continue;
          for (int64_t kk = 0; kk < k; ++kk) da.at(i, kk) += gv * b.at(kk, j);
        }
      for (int64_t i = 0; i < m; ++i)
        for (int64_t kk = 0; kk < k; ++kk) {
          const double av = a.at(i, kk);
          if (av == 0.0) continue;
          for (int64_t j = 0; j < c; ++j) db.at(kk, j) += av * g.at(i, j);
        }
      break;
    }
    case Prim::Add: {
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& db = grad_buffer(n.inputs[1]);
      for (int64_t i = 0; i < g.size(); ++i) {
        da[i] += g[i];
        db[i] += g[i];
      }
      break;
    }
    case Prim::Sub: {
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& db = grad_buffer(n.inputs[1]);
      for (int64_t i = 0; i < g.size(); ++i) {
        da[i] += g[i];
        db[i] -= g[i];
      }
      break;
    }
    case Prim::Mul: {
      const Tensor& a = node(n.inputs[0]).value;
      const Tensor& b = node(n.inputs[1]).value;
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& db = grad_buffer(n.inputs[1]);
      for (int64_t i = 0; i < g.size(); ++i) {
        da[i] += g[i] * b[i];
        db[i] += g[i] * a[i];
      }
      break;
    }
    case Prim::AddRow: {
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& db = grad_buffer(n.inputs[1]);
      for (int64_t i = 0; i < g.rows(); ++i)
        for (int64_t j = 0; j < g.cols(); ++j) {
          da.at(i, j) += g.at(i, j);
          db[j] += g.at(i, j);
        }
      break;
    }
    case Prim::MulCol: {
      const Tensor& a = node(n.inputs[0]).value;
      const Tensor& c = node(n.inputs[1]).value;
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& dc = grad_buffer(n.inputs[1]);
      for (int64_t i = 0; i < g.rows(); ++i)
        for (int64_t j = 0; j < g.cols(); ++j) {
          da.at(i, j) += g.at(i, j) * c[i];
          dc[i] += g.at(i, j) * a.at(i, j);
        }
      break;
    }
    case Prim::Scale: {
      Tensor& da = grad_buffer(n.inputs[0]);
      for (int64_t i = 0; i < g.size(); ++i) da[i] += n.factor * g[i];
      break;
    }
    case Prim::Relu: {
      const Tensor& x = node(n.inputs[0]).value;
      Tensor& da = grad_buffer(n.inputs[0]);
      for (int64_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) da[i] += g[i];
      break;
    }
    case Prim::Silu: {
      const Tensor& x = node(n.inputs[0]).value;
      Tensor& da = grad_buffer(n.inputs[0]);
      for (int64_t i = 0; i < g.size(); ++i) {
        const double s = sigmoid(x[i]);
        da[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
      }
      break;
    }
    case Prim::Concat: {
      int64_t offset = 0;
      for (Var p : n.inputs) {
        Tensor& dp = grad_buffer(p);
        const int64_t pc = dp.cols();
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < pc; ++j) dp.at(i, j) += g.at(i, offset + j);
        offset += pc;
      }
      break;
    }
    case Prim::Slice: {
      Tensor& da = grad_buffer(n.inputs[0]);
      const int64_t from = n.aux[0];
      for (int64_t i = 0; i < g.rows(); ++i)
        for (int64_t j = 0; j < g.cols(); ++j) da.at(i, from + j) += g.at(i, j);
      break;
    }
    case Prim::SumAll: {
      Tensor& da = grad_buffer(n.inputs[0]);
      for (int64_t i = 0; i < da.size(); ++i) da[i] += g[0];
      break;
    }
    case Prim::MeanAll: {
      Tensor& da = grad_buffer(n.inputs[0]);
      const double inv = 1.0 / static_cast<double>(da.size());
      for (int64_t i = 0; i < da.size(); ++i) da[i] += g[0] * inv;
      break;
    }
    case Prim::SumAxis: {
      Tensor& da = grad_buffer(n.inputs[0]);
      const int axis = static_cast<int>(n.aux[0]);
      for (int64_t i = 0; i < da.rows(); ++i)
        for (int64_t j = 0; j < da.cols(); ++j) da.at(i, j) += g[axis == 0 ? j : i];
      break;
    }
    case Prim::MeanAxis: {
      Tensor& da = grad_buffer(n.inputs[0]);
      const int axis = static_cast<int>(n.aux[0]);
      const double inv = 1.0 / static_cast<double>(axis == 0 ? da.rows() : da.cols());
      for (int64_t i = 0; i < da.rows(); ++i)
        for (int64_t j = 0; j < da.cols(); ++j) da.at(i, j) += g[axis == 0 ? j : i] * inv;
      break;
    }
    case Prim::Gather: {
      Tensor& da = grad_buffer(n.inputs[0]);
      for (int64_t k = 0; k < g.rows(); ++k) {
        const int64_t row = n.aux[static_cast<size_t>(k)];
        for (int64_t j = 0; j < g.cols(); ++j) da.at(row, j) += g.at(k, j);
      }
      break;
    }
    case Prim::ScatterAdd: {
      Tensor& da = grad_buffer(n.inputs[0]);
      for (int64_t k = 0; k < da.rows(); ++k) {
        const int64_t row = n.aux[static_cast<size_t>(k)];
        for (int64_t j = 0; j < da.cols(); ++j) da.at(k, j) += g.at(row, j);
      }
      break;
    }
    case Prim::L1Loss: {
      const Tensor& a = node(n.inputs[0]).value;
      const Tensor& b = node(n.inputs[1]).value;
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& db = grad_buffer(n.inputs[1]);
      const double inv = g[0] / static_cast<double>(a.size());
      for (int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        da[i] += inv * s;
        db[i] -= inv * s;
      }
      break;
    }
    case Prim::L2Loss: {
      const Tensor& a = node(n.inputs[0]).value;
      const Tensor& b = node(n.inputs[1]).value;
      Tensor& da = grad_buffer(n.inputs[0]);
      Tensor& db = grad_buffer(n.inputs[1]);
      const double inv = 2.0 * g[0] / static_cast<double>(a.size());
      for (int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        da[i] += inv * d;
        db[i] -= inv * d;
      }
      break;
    }
    case Prim::Leaf:
      break;
  }
}

double grad_check(const ScalarFn& fn, const Tensor& point, double step) {
  require(step > 0.0, Error::Kind::InvalidArgument, "grad_check step must be positive");
  auto eval = [&fn](const Tensor& x) {
    Tape tape;
    Tape::Var in = tape.leaf(x, true);
    Tape::Var out = fn(tape, in);
    const Tensor& v = tape.value(out);
    require(v.size() == 1, Error::Kind::InvalidArgument, "grad_check fn must return a scalar");
    require(std::isfinite(v[0]), Error::Kind::Numeric, "grad_check fn produced a non-finite value");
    return v[0];
  };

  Tape tape;
  Tape::Var in = tape.leaf(point, true);
  Tape::Var out = fn(tape, in);
  require(tape.value(out).size() == 1, Error::Kind::InvalidArgument,
          "grad_check fn must return a scalar");
  require(std::isfinite(tape.value(out)[0]), Error::Kind::Numeric,
          "grad_check fn produced a non-finite value");
  tape.backward(out);
  const Tensor& analytic = tape.grad(in);

  double worst = 0.0;
  Tensor probe = point;
  for (int64_t i = 0; i < point.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double fp = eval(probe);
    probe[i] = saved - step;
    const double fm = eval(probe);
    probe[i] = saved;
    const double central = (fp - fm) / (2.0 * step);
    const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace bf
