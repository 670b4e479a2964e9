#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "atoc/array.hpp"
#include "atoc/params.hpp"

namespace atoc {

// Reverse-mode tape over 2-D float64 arrays. Nodes are created eagerly:
// each builder call computes its forward value immediately and validates
// finiteness, so a Graph is also a record of one concrete evaluation.
// backward() then accumulates exact gradients in reverse creation order.
//
// Graphs are single-use: build, read values, optionally run backward once.
class Graph {
 public:
  enum class Op {
    Input,
    Param,
    Constant,
    Matmul,
    Add,
    Sub,
    Mul,
    Scale,
    AddScalar,
    Relu,
    Tanh,
    Sigmoid,
    Log,
    Clamp,
    ConcatCols,
    SliceCols,
    ConcatRows,
    SliceRows,
    GatherRows,
    ScatterRows,
    ReduceMean,
    ReduceSum,
    BnTrain,
    BnInfer,
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  int input(Array value);            // differentiable leaf; grad retrievable
  int param(ParameterSet& ps, const std::string& name);  // cached per (set, name)
  int constant(Array value);         // non-differentiable leaf

  // Linear algebra and arithmetic. add/sub/mul accept equal shapes, or a
  // second argument of shape [1,k] (row broadcast) or [1,1] (scalar).
  int matmul(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, double s);
  int add_scalar(int a, double s);

  // Elementwise nonlinearities.
  int relu(int a);
  int tanh_(int a);
  int sigmoid(int a);
  int log_(int a);
  int clamp(int a, double lo, double hi);

  // Shape surgery.
  int concat_cols(const std::vector<int>& xs);
  int slice_cols(int a, std::size_t start, std::size_t count);
  int concat_rows(const std::vector<int>& xs);
  int slice_rows(int a, std::size_t start, std::size_t count);
  int gather_rows(int a, std::vector<std::size_t> rows);
  // Copy of `base` with base[rows[i], :] replaced by values[i, :].
  // Indices must be unique and in range.
  int scatter_rows(int base, int values, std::vector<std::size_t> rows);

  // Full reductions to a [1,1] scalar.
  int reduce_mean(int a);
  int reduce_sum(int a);

  // Batch normalization over rows of x [n,d] with gamma/beta of shape [1,d].
  // Train mode uses batch statistics (biased variance) and requires n >= 2;
  // the batch mean/variance are recorded on the node for running-stat folds.
  // Infer mode normalizes by the provided running statistics.
  int bn_train(int x, int gamma, int beta);
  int bn_infer(int x, int gamma, int beta, const Array& running_mean,
               const Array& running_var);

  static constexpr double kBnEps = 1e-5;

  // Accessors.
  const Array& value(int id) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Reverse pass seeded at `output`: with a scalar node the seed is 1,
  // otherwise `seed` must match the output's shape. Call at most once.
  void backward(int output, const Array* seed = nullptr);

  // Post-backward reads. Both throw NumericError on non-finite gradients.
  std::map<std::string, Array> param_grads(const ParameterSet& ps) const;
  Array input_grad(int input_id) const;

  // Batch statistics recorded by bn_train nodes, in creation order.
  struct BnBatchStats {
    int node;
    Array mean;
    Array var;
  };
  std::vector<BnBatchStats> bn_batch_stats() const;

 private:
  struct Node {
    Op op;
    std::vector<int> args;
    Array value;
    Array grad;                 // allocated on first accumulation
    bool needs_grad = false;
    double s0 = 0.0;            // scale factor / clamp lo
    double s1 = 0.0;            // clamp hi
    std::size_t start = 0;      // slice offset
    std::vector<std::size_t> rows;  // gather/scatter indices
    ParameterSet* pset = nullptr;
    std::string pname;
    Array aux0;                 // bn mean (batch or running)
    Array aux1;                 // bn variance (batch or running)
  };

  int push(Node n);
  Node& at(int id);
  const Node& at(int id) const;
  void accumulate(int id, const Array& g);
  void accumulate_rows(int id, const Array& g, const std::vector<std::size_t>& rows);
  void check_value(int id) const;
  static bool broadcast_ok(const Array& a, const Array& b);

  std::vector<Node> nodes_;
  std::map<std::pair<const ParameterSet*, std::string>, int> param_cache_;
  bool backward_done_ = false;
};

const char* op_name(Graph::Op op);

}  // namespace atoc
