#include "atoc/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>

#include "atoc/errors.hpp"

namespace atoc {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

MapC cmap(const Array& a) {
  return MapC(a.v.data(), static_cast<Eigen::Index>(a.rows()),
              static_cast<Eigen::Index>(a.cols()));
}

MapM mmap(Array& a) {
  return MapM(a.v.data(), static_cast<Eigen::Index>(a.rows()),
              static_cast<Eigen::Index>(a.cols()));
}

std::string node_label(int id, Graph::Op op) {
  return "node " + std::to_string(id) + " (" + op_name(op) + ")";
}

}  // namespace

const char* op_name(Graph::Op op) {
  switch (op) {
    case Graph::Op::Input: return "input";
    case Graph::Op::Param: return "param";
    case Graph::Op::Constant: return "constant";
    case Graph::Op::Matmul: return "matmul";
    case Graph::Op::Add: return "add";
    case Graph::Op::Sub: return "sub";
    case Graph::Op::Mul: return "mul";
    case Graph::Op::Scale: return "scale";
    case Graph::Op::AddScalar: return "add_scalar";
    case Graph::Op::Relu: return "relu";
    case Graph::Op::Tanh: return "tanh";
    case Graph::Op::Sigmoid: return "sigmoid";
    case Graph::Op::Log: return "log";
    case Graph::Op::Clamp: return "clamp";
    case Graph::Op::ConcatCols: return "concat_cols";
    case Graph::Op::SliceCols: return "slice_cols";
    case Graph::Op::ConcatRows: return "concat_rows";
    case Graph::Op::SliceRows: return "slice_rows";
    case Graph::Op::GatherRows: return "gather_rows";
    case Graph::Op::ScatterRows: return "scatter_rows";
    case Graph::Op::ReduceMean: return "reduce_mean";
    case Graph::Op::ReduceSum: return "reduce_sum";
    case Graph::Op::BnTrain: return "bn_train";
    case Graph::Op::BnInfer: return "bn_infer";
  }
  return "?";
}

int Graph::push(Node n) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  check_value(id);
  return id;
}

Graph::Node& Graph::at(int id) {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw ShapeError("graph node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Graph::Node& Graph::at(int id) const {
  return const_cast<Graph*>(this)->at(id);
}

void Graph::check_value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.value.rank() != 2) {
    throw ShapeError("graph values must be rank-2, got " + n.value.shape_str() +
                     " at " + node_label(id, n.op));
  }
  if (!n.value.all_finite()) {
    throw NumericError("non-finite value at " + node_label(id, n.op));
  }
}

int Graph::input(Array value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

int Graph::param(ParameterSet& ps, const std::string& name) {
  const std::pair<const ParameterSet*, std::string> key{&ps, name};
  auto it = param_cache_.find(key);
  if (it != param_cache_.end()) return it->second;
  Node n;
  n.op = Op::Param;
  n.value = ps.get(name);
  n.needs_grad = true;
  n.pset = &ps;
  n.pname = name;
  const int id = push(std::move(n));
  param_cache_.emplace(key, id);
  return id;
}

int Graph::constant(Array value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

int Graph::matmul(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (na.value.cols() != nb.value.rows()) {
    throw ShapeError("matmul shape mismatch: " + na.value.shape_str() + " x " +
                     nb.value.shape_str());
  }
  Node n;
  n.op = Op::Matmul;
  n.args = {a, b};
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = Array({na.value.rows(), nb.value.cols()});
  mmap(n.value).noalias() = cmap(na.value) * cmap(nb.value);
  return push(std::move(n));
}

bool Graph::broadcast_ok(const Array& a, const Array& b) {
  // b broadcasts over a when b is [1, cols(a)] or [1,1].
  return b.rows() == 1 && (b.cols() == a.cols() || b.cols() == 1);
}

int Graph::add(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  const bool same = na.value.same_shape(nb.value);
  if (!same && !broadcast_ok(na.value, nb.value)) {
    throw ShapeError("add shape mismatch: " + na.value.shape_str() + " vs " +
                     nb.value.shape_str());
  }
  Node n;
  n.op = Op::Add;
  n.args = {a, b};
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  if (same) {
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.v[i] += nb.value.v[i];
  } else if (nb.value.cols() == 1) {
    const double s = nb.value.v[0];
    for (double& x : n.value.v) x += s;
  } else {
    const std::size_t c = n.value.cols();
    for (std::size_t r = 0; r < n.value.rows(); ++r)
      for (std::size_t j = 0; j < c; ++j) n.value.v[r * c + j] += nb.value.v[j];
  }
  return push(std::move(n));
}

int Graph::sub(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  const bool same = na.value.same_shape(nb.value);
  if (!same && !broadcast_ok(na.value, nb.value)) {
    throw ShapeError("sub shape mismatch: " + na.value.shape_str() + " vs " +
                     nb.value.shape_str());
  }
  Node n;
  n.op = Op::Sub;
  n.args = {a, b};
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  if (same) {
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.v[i] -= nb.value.v[i];
  } else if (nb.value.cols() == 1) {
    const double s = nb.value.v[0];
    for (double& x : n.value.v) x -= s;
  } else {
    const std::size_t c = n.value.cols();
    for (std::size_t r = 0; r < n.value.rows(); ++r)
      for (std::size_t j = 0; j < c; ++j) n.value.v[r * c + j] -= nb.value.v[j];
  }
  return push(std::move(n));
}

int Graph::mul(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  const bool same = na.value.same_shape(nb.value);
  if (!same && !broadcast_ok(na.value, nb.value)) {
    throw ShapeError("mul shape mismatch: " + na.value.shape_str() + " vs " +
                     nb.value.shape_str());
  }
  Node n;
  n.op = Op::Mul;
  n.args = {a, b};
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  if (same) {
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.v[i] *= nb.value.v[i];
  } else if (nb.value.cols() == 1) {
    const double s = nb.value.v[0];
    for (double& x : n.value.v) x *= s;
  } else {
    const std::size_t c = n.value.cols();
    for (std::size_t r = 0; r < n.value.rows(); ++r)
      for (std::size_t j = 0; j < c; ++j) n.value.v[r * c + j] *= nb.value.v[j];
  }
  return push(std::move(n));
}

int Graph::scale(int a, double s) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Scale;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.s0 = s;
  n.value = na.value;
  for (double& x : n.value.v) x *= s;
  return push(std::move(n));
}

int Graph::add_scalar(int a, double s) {
  const Node& na = at(a);
  Node n;
  n.op = Op::AddScalar;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.s0 = s;
  n.value = na.value;
  for (double& x : n.value.v) x += s;
  return push(std::move(n));
}

int Graph::relu(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Relu;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = x > 0.0 ? x : 0.0;
  return push(std::move(n));
}

int Graph::tanh_(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Tanh;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = std::tanh(x);
  return push(std::move(n));
}

int Graph::sigmoid(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Sigmoid;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = 1.0 / (1.0 + std::exp(-x));
  return push(std::move(n));
}

int Graph::log_(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::Log;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = std::log(x);
  return push(std::move(n));
}

int Graph::clamp(int a, double lo, double hi) {
  if (!(lo < hi)) throw ShapeError("clamp requires lo < hi");
  const Node& na = at(a);
  Node n;
  n.op = Op::Clamp;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.s0 = lo;
  n.s1 = hi;
  n.value = na.value;
  for (double& x : n.value.v) x = std::min(hi, std::max(lo, x));
  return push(std::move(n));
}

int Graph::concat_cols(const std::vector<int>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols of zero arrays");
  const std::size_t rows = at(xs[0]).value.rows();
  std::size_t cols = 0;
  bool ng = false;
  for (int id : xs) {
    const Node& n = at(id);
    if (n.value.rows() != rows) {
      throw ShapeError("concat_cols row mismatch: " + n.value.shape_str());
    }
    cols += n.value.cols();
    ng = ng || n.needs_grad;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.args = xs;
  n.needs_grad = ng;
  n.value = Array({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t off = 0;
    for (int id : xs) {
      const Array& src = at(id).value;
      const std::size_t c = src.cols();
      std::copy_n(src.v.data() + r * c, c, n.value.v.data() + r * cols + off);
      off += c;
    }
  }
  return push(std::move(n));
}

int Graph::slice_cols(int a, std::size_t start, std::size_t count) {
  const Node& na = at(a);
  if (count == 0 || start + count > na.value.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(start) + ", +" +
                     std::to_string(count) + ") out of " + na.value.shape_str());
  }
  Node n;
  n.op = Op::SliceCols;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.start = start;
  const std::size_t rows = na.value.rows();
  const std::size_t c = na.value.cols();
  n.value = Array({rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(na.value.v.data() + r * c + start, count, n.value.v.data() + r * count);
  }
  return push(std::move(n));
}

int Graph::concat_rows(const std::vector<int>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows of zero arrays");
  const std::size_t cols = at(xs[0]).value.cols();
  std::size_t rows = 0;
  bool ng = false;
  for (int id : xs) {
    const Node& n = at(id);
    if (n.value.cols() != cols) {
      throw ShapeError("concat_rows column mismatch: " + n.value.shape_str());
    }
    rows += n.value.rows();
    ng = ng || n.needs_grad;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.args = xs;
  n.needs_grad = ng;
  n.value = Array({rows, cols});
  std::size_t off = 0;
  for (int id : xs) {
    const Array& src = at(id).value;
    std::copy_n(src.v.data(), src.numel(), n.value.v.data() + off);
    off += src.numel();
  }
  return push(std::move(n));
}

int Graph::slice_rows(int a, std::size_t start, std::size_t count) {
  const Node& na = at(a);
  if (count == 0 || start + count > na.value.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(start) + ", +" +
                     std::to_string(count) + ") out of " + na.value.shape_str());
  }
  Node n;
  n.op = Op::SliceRows;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  n.start = start;
  const std::size_t cols = na.value.cols();
  n.value = Array({count, cols});
  std::copy_n(na.value.v.data() + start * cols, count * cols, n.value.v.data());
  return push(std::move(n));
}

int Graph::gather_rows(int a, std::vector<std::size_t> rows) {
  const Node& na = at(a);
  if (rows.empty()) throw ShapeError("gather_rows with empty index list");
  for (std::size_t r : rows) {
    if (r >= na.value.rows()) {
      throw ShapeError("gather_rows index " + std::to_string(r) + " out of " +
                       na.value.shape_str());
    }
  }
  Node n;
  n.op = Op::GatherRows;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  const std::size_t cols = na.value.cols();
  n.value = Array({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(na.value.v.data() + rows[i] * cols, cols, n.value.v.data() + i * cols);
  }
  n.rows = std::move(rows);
  return push(std::move(n));
}

int Graph::scatter_rows(int base, int values, std::vector<std::size_t> rows) {
  const Node& nb = at(base);
  const Node& nv = at(values);
  if (nv.value.cols() != nb.value.cols() || nv.value.rows() != rows.size()) {
    throw ShapeError("scatter_rows values " + nv.value.shape_str() + " do not fit " +
                     std::to_string(rows.size()) + " rows of " + nb.value.shape_str());
  }
  std::set<std::size_t> seen;
  for (std::size_t r : rows) {
    if (r >= nb.value.rows()) {
      throw ShapeError("scatter_rows index " + std::to_string(r) + " out of " +
                       nb.value.shape_str());
    }
    if (!seen.insert(r).second) {
      throw ShapeError("scatter_rows duplicate index " + std::to_string(r));
    }
  }
  Node n;
  n.op = Op::ScatterRows;
  n.args = {base, values};
  n.needs_grad = nb.needs_grad || nv.needs_grad;
  const std::size_t cols = nb.value.cols();
  n.value = nb.value;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(nv.value.v.data() + i * cols, cols, n.value.v.data() + rows[i] * cols);
  }
  n.rows = std::move(rows);
  return push(std::move(n));
}

int Graph::reduce_mean(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::ReduceMean;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (double x : na.value.v) s += x;
  n.value = Array::scalar(s / static_cast<double>(na.value.numel()));
  return push(std::move(n));
}

int Graph::reduce_sum(int a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::ReduceSum;
  n.args = {a};
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (double x : na.value.v) s += x;
  n.value = Array::scalar(s);
  return push(std::move(n));
}

namespace {

void bn_shape_check(const Array& x, const Array& gamma, const Array& beta) {
  const std::size_t d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw ShapeError("batch norm scale/shift must be [1," + std::to_string(d) +
                     "], got " + gamma.shape_str() + " and " + beta.shape_str());
  }
}

}  // namespace

int Graph::bn_train(int x, int gamma, int beta) {
  const Node& nx = at(x);
  const Node& ng = at(gamma);
  const Node& nb = at(beta);
  bn_shape_check(nx.value, ng.value, nb.value);
  const std::size_t rows = nx.value.rows();
  const std::size_t d = nx.value.cols();
  if (rows < 2) {
    throw ShapeError("batch norm train mode requires batch size >= 2, got " +
                     std::to_string(rows));
  }
  Node n;
  n.op = Op::BnTrain;
  n.args = {x, gamma, beta};
  n.needs_grad = nx.needs_grad || ng.needs_grad || nb.needs_grad;
  n.aux0 = Array({1, d});
  n.aux1 = Array({1, d});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) n.aux0.v[j] += nx.value.v[r * d + j];
  for (std::size_t j = 0; j < d; ++j) n.aux0.v[j] /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = nx.value.v[r * d + j] - n.aux0.v[j];
      n.aux1.v[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) n.aux1.v[j] /= static_cast<double>(rows);
  n.value = Array({rows, d});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat =
          (nx.value.v[r * d + j] - n.aux0.v[j]) / std::sqrt(n.aux1.v[j] + kBnEps);
      n.value.v[r * d + j] = ng.value.v[j] * xhat + nb.value.v[j];
    }
  return push(std::move(n));
}

int Graph::bn_infer(int x, int gamma, int beta, const Array& running_mean,
                    const Array& running_var) {
  const Node& nx = at(x);
  const Node& ng = at(gamma);
  const Node& nb = at(beta);
  bn_shape_check(nx.value, ng.value, nb.value);
  const std::size_t d = nx.value.cols();
  if (running_mean.rows() != 1 || running_mean.cols() != d || running_var.rows() != 1 ||
      running_var.cols() != d) {
    throw ShapeError("batch norm running stats must be [1," + std::to_string(d) + "]");
  }
  Node n;
  n.op = Op::BnInfer;
  n.args = {x, gamma, beta};
  n.needs_grad = nx.needs_grad || ng.needs_grad || nb.needs_grad;
  n.aux0 = running_mean;
  n.aux1 = running_var;
  const std::size_t rows = nx.value.rows();
  n.value = Array({rows, d});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double xhat =
          (nx.value.v[r * d + j] - n.aux0.v[j]) / std::sqrt(n.aux1.v[j] + kBnEps);
      n.value.v[r * d + j] = ng.value.v[j] * xhat + nb.value.v[j];
    }
  return push(std::move(n));
}

const Array& Graph::value(int id) const { return at(id).value; }

void Graph::accumulate(int id, const Array& g) {
  Node& n = at(id);
  if (!n.needs_grad) return;
  if (n.grad.numel() == 0) {
    n.grad = g;
    return;
  }
  if (!n.grad.same_shape(g)) {
    throw ShapeError("gradient shape mismatch at " + node_label(id, n.op));
  }
  for (std::size_t i = 0; i < g.numel(); ++i) n.grad.v[i] += g.v[i];
}

void Graph::accumulate_rows(int id, const Array& g, const std::vector<std::size_t>& rows) {
  Node& n = at(id);
  if (!n.needs_grad) return;
  if (n.grad.numel() == 0) n.grad = Array(n.value.shape);
  const std::size_t cols = n.value.cols();
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) n.grad.v[rows[i] * cols + j] += g.v[i * cols + j];
}

void Graph::backward(int output, const Array* seed) {
  if (backward_done_) throw ShapeError("backward may run only once per graph");
  backward_done_ = true;
  Node& out = at(output);
  if (!out.needs_grad) {
    throw ShapeError("backward from a non-differentiable output");
  }
  if (seed == nullptr) {
    if (out.value.numel() != 1) {
      throw ShapeError("backward without a seed requires a scalar output, got " +
                       out.value.shape_str());
    }
    out.grad = Array::scalar(1.0);
  } else {
    if (!seed->same_shape(out.value)) {
      throw ShapeError("backward seed shape " + seed->shape_str() +
                       " does not match output " + out.value.shape_str());
    }
    out.grad = *seed;
  }

  for (int id = output; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.numel() == 0) continue;
    const Array& g = n.grad;
    switch (n.op) {
      case Op::Input:
      case Op::Param:
      case Op::Constant:
        break;
      case Op::Matmul: {
        const Array& av = at(n.args[0]).value;
        const Array& bv = at(n.args[1]).value;
        if (at(n.args[0]).needs_grad) {
          Array da({av.rows(), av.cols()});
          mmap(da).noalias() = cmap(g) * cmap(bv).transpose();
          accumulate(n.args[0], da);
        }
        if (at(n.args[1]).needs_grad) {
          Array db({bv.rows(), bv.cols()});
          mmap(db).noalias() = cmap(av).transpose() * cmap(g);
          accumulate(n.args[1], db);
        }
        break;
      }
      case Op::Add:
      case Op::Sub: {
        const double sign = n.op == Op::Sub ? -1.0 : 1.0;
        accumulate(n.args[0], g);
        const Node& nb = at(n.args[1]);
        if (nb.needs_grad) {
          if (nb.value.same_shape(g)) {
            if (sign > 0) {
              accumulate(n.args[1], g);
            } else {
              Array db = g;
              for (double& x : db.v) x = -x;
              accumulate(n.args[1], db);
            }
          } else {
            Array db(nb.value.shape);
            const std::size_t c = g.cols();
            if (nb.value.cols() == 1) {
              for (double x : g.v) db.v[0] += sign * x;
            } else {
              for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t j = 0; j < c; ++j) db.v[j] += sign * g.v[r * c + j];
            }
            accumulate(n.args[1], db);
          }
        }
        break;
      }
      case Op::Mul: {
        const Node& na = at(n.args[0]);
        const Node& nb = at(n.args[1]);
        if (na.needs_grad) {
          Array da = g;
          if (nb.value.same_shape(g)) {
            for (std::size_t i = 0; i < da.numel(); ++i) da.v[i] *= nb.value.v[i];
          } else if (nb.value.cols() == 1) {
            for (double& x : da.v) x *= nb.value.v[0];
          } else {
            const std::size_t c = da.cols();
            for (std::size_t r = 0; r < da.rows(); ++r)
              for (std::size_t j = 0; j < c; ++j) da.v[r * c + j] *= nb.value.v[j];
          }
          accumulate(n.args[0], da);
        }
        if (nb.needs_grad) {
          const Array& av = na.value;
          if (nb.value.same_shape(g)) {
            Array db = g;
            for (std::size_t i = 0; i < db.numel(); ++i) db.v[i] *= av.v[i];
            accumulate(n.args[1], db);
          } else {
            Array db(nb.value.shape);
            const std::size_t c = g.cols();
            if (nb.value.cols() == 1) {
              for (std::size_t i = 0; i < g.numel(); ++i) db.v[0] += g.v[i] * av.v[i];
            } else {
              for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t j = 0; j < c; ++j) db.v[j] += g.v[r * c + j] * av.v[r * c + j];
            }
            accumulate(n.args[1], db);
          }
        }
        break;
      }
      case Op::Scale: {
        Array da = g;
        for (double& x : da.v) x *= n.s0;
        accumulate(n.args[0], da);
        break;
      }
      case Op::AddScalar:
        accumulate(n.args[0], g);
        break;
      case Op::Relu: {
        const Array& xv = at(n.args[0]).value;
        Array da = g;
        for (std::size_t i = 0; i < da.numel(); ++i)
          if (xv.v[i] <= 0.0) da.v[i] = 0.0;
        accumulate(n.args[0], da);
        break;
      }
      case Op::Tanh: {
        Array da = g;
        for (std::size_t i = 0; i < da.numel(); ++i) da.v[i] *= 1.0 - n.value.v[i] * n.value.v[i];
        accumulate(n.args[0], da);
        break;
      }
      case Op::Sigmoid: {
        Array da = g;
        for (std::size_t i = 0; i < da.numel(); ++i)
          da.v[i] *= n.value.v[i] * (1.0 - n.value.v[i]);
        accumulate(n.args[0], da);
        break;
      }
      case Op::Log: {
        const Array& xv = at(n.args[0]).value;
        Array da = g;
        for (std::size_t i = 0; i < da.numel(); ++i) da.v[i] /= xv.v[i];
        accumulate(n.args[0], da);
        break;
      }
      case Op::Clamp: {
        const Array& xv = at(n.args[0]).value;
        Array da = g;
        for (std::size_t i = 0; i < da.numel(); ++i)
          if (xv.v[i] <= n.s0 || xv.v[i] >= n.s1) da.v[i] = 0.0;
        accumulate(n.args[0], da);
        break;
      }
      case Op::ConcatCols: {
        const std::size_t cols = n.value.cols();
        std::size_t off = 0;
        for (int arg : n.args) {
          const Node& na = at(arg);
          const std::size_t c = na.value.cols();
          if (na.needs_grad) {
            Array da(na.value.shape);
            for (std::size_t r = 0; r < na.value.rows(); ++r)
              std::copy_n(g.v.data() + r * cols + off, c, da.v.data() + r * c);
            accumulate(arg, da);
          }
          off += c;
        }
        break;
      }
      case Op::SliceCols: {
        const Node& na = at(n.args[0]);
        Array da(na.value.shape);
        const std::size_t c = na.value.cols();
        const std::size_t cnt = n.value.cols();
        for (std::size_t r = 0; r < n.value.rows(); ++r)
          std::copy_n(g.v.data() + r * cnt, cnt, da.v.data() + r * c + n.start);
        accumulate(n.args[0], da);
        break;
      }
      case Op::ConcatRows: {
        std::size_t off = 0;
        for (int arg : n.args) {
          const Node& na = at(arg);
          if (na.needs_grad) {
            Array da(na.value.shape);
            std::copy_n(g.v.data() + off, na.value.numel(), da.v.data());
            accumulate(arg, da);
          }
          off += na.value.numel();
        }
        break;
      }
      case Op::SliceRows: {
        const Node& na = at(n.args[0]);
        if (na.needs_grad) {
          Node& mut = at(n.args[0]);
          if (mut.grad.numel() == 0) mut.grad = Array(mut.value.shape);
          const std::size_t cols = mut.value.cols();
          for (std::size_t i = 0; i < g.numel(); ++i)
            mut.grad.v[n.start * cols + i] += g.v[i];
        }
        break;
      }
      case Op::GatherRows:
        accumulate_rows(n.args[0], g, n.rows);
        break;
      case Op::ScatterRows: {
        const Node& nb = at(n.args[0]);
        if (nb.needs_grad) {
          Array db = g;
          const std::size_t cols = db.cols();
          for (std::size_t r : n.rows) std::fill_n(db.v.data() + r * cols, cols, 0.0);
          accumulate(n.args[0], db);
        }
        const Node& nv = at(n.args[1]);
        if (nv.needs_grad) {
          Array dv(nv.value.shape);
          const std::size_t cols = dv.cols();
          for (std::size_t i = 0; i < n.rows.size(); ++i)
            std::copy_n(g.v.data() + n.rows[i] * cols, cols, dv.v.data() + i * cols);
          accumulate(n.args[1], dv);
        }
        break;
      }
      case Op::ReduceMean:
      case Op::ReduceSum: {
        const Node& na = at(n.args[0]);
        const double w =
            n.op == Op::ReduceMean ? g.v[0] / static_cast<double>(na.value.numel()) : g.v[0];
        Array da = Array::full(na.value.shape, w);
        accumulate(n.args[0], da);
        break;
      }
      case Op::BnTrain: {
        const Node& nx = at(n.args[0]);
        const Node& ng = at(n.args[1]);
        const Node& nb = at(n.args[2]);
        const std::size_t rows = nx.value.rows();
        const std::size_t d = nx.value.cols();
        const double inv_n = 1.0 / static_cast<double>(rows);
        // Recompute xhat columns on the fly from the recorded batch stats.
        std::vector<double> inv_std(d);
        for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(n.aux1.v[j] + kBnEps);
        if (ng.needs_grad || nb.needs_grad) {
          Array dgamma({1, d});
          Array dbeta({1, d});
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) {
              const double xhat = (nx.value.v[r * d + j] - n.aux0.v[j]) * inv_std[j];
              dgamma.v[j] += g.v[r * d + j] * xhat;
              dbeta.v[j] += g.v[r * d + j];
            }
          if (ng.needs_grad) accumulate(n.args[1], dgamma);
          if (nb.needs_grad) accumulate(n.args[2], dbeta);
        }
        if (nx.needs_grad) {
          // dxhat = g * gamma; standard train-mode expansion with biased variance.
          Array dx({rows, d});
          std::vector<double> sum_dxhat(d), sum_dxhat_xhat(d);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) {
              const double dxhat = g.v[r * d + j] * ng.value.v[j];
              const double xhat = (nx.value.v[r * d + j] - n.aux0.v[j]) * inv_std[j];
              sum_dxhat[j] += dxhat;
              sum_dxhat_xhat[j] += dxhat * xhat;
            }
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) {
              const double dxhat = g.v[r * d + j] * ng.value.v[j];
              const double xhat = (nx.value.v[r * d + j] - n.aux0.v[j]) * inv_std[j];
              dx.v[r * d + j] = inv_std[j] * (dxhat - inv_n * sum_dxhat[j] -
                                              inv_n * xhat * sum_dxhat_xhat[j]);
            }
          accumulate(n.args[0], dx);
        }
        break;
      }
      case Op::BnInfer: {
        const Node& nx = at(n.args[0]);
        const Node& ng = at(n.args[1]);
        const Node& nb = at(n.args[2]);
        const std::size_t rows = nx.value.rows();
        const std::size_t d = nx.value.cols();
        std::vector<double> inv_std(d);
        for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(n.aux1.v[j] + kBnEps);
        if (nx.needs_grad) {
          Array dx({rows, d});
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j)
              dx.v[r * d + j] = g.v[r * d + j] * ng.value.v[j] * inv_std[j];
          accumulate(n.args[0], dx);
        }
        if (ng.needs_grad || nb.needs_grad) {
          Array dgamma({1, d});
          Array dbeta({1, d});
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) {
              const double xhat = (nx.value.v[r * d + j] - n.aux0.v[j]) * inv_std[j];
              dgamma.v[j] += g.v[r * d + j] * xhat;
              dbeta.v[j] += g.v[r * d + j];
            }
          if (ng.needs_grad) accumulate(n.args[1], dgamma);
          if (nb.needs_grad) accumulate(n.args[2], dbeta);
        }
        break;
      }
    }
  }
}

std::map<std::string, Array> Graph::param_grads(const ParameterSet& ps) const {
  if (!backward_done_) throw ShapeError("param_grads before backward");
  std::map<std::string, Array> out;
  for (const Node& n : nodes_) {
    if (n.op != Op::Param || n.pset != &ps) continue;
    Array g = n.grad.numel() ? n.grad : Array(n.value.shape);
    if (!g.all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + n.pname + "'");
    }
    out.emplace(n.pname, std::move(g));
  }
  return out;
}

Array Graph::input_grad(int input_id) const {
  if (!backward_done_) throw ShapeError("input_grad before backward");
  const Node& n = at(input_id);
  if (n.op != Op::Input) {
    throw ShapeError("input_grad on a non-input node");
  }
  Array g = n.grad.numel() ? n.grad : Array(n.value.shape);
  if (!g.all_finite()) throw NumericError("non-finite input gradient");
  return g;
}

std::vector<Graph::BnBatchStats> Graph::bn_batch_stats() const {
  std::vector<BnBatchStats> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::BnTrain) {
      out.push_back({static_cast<int>(i), nodes_[i].aux0, nodes_[i].aux1});
    }
  }
  return out;
}

}  // namespace atoc
