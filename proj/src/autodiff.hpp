#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace actsum::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so replaying the
// backward closures in reverse is a valid topological order.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(1024); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  // Leaf node holding a copy of the parameter value. Its gradient is read
  // back with param_grad after backward(); the Parameter itself is never
  // written, so one model can serve several graphs at once.
  Var param(const Parameter& p);
  // Null when the parameter was not used or received no gradient.
  const Matrix* param_grad(const Parameter& p) const;
  Var constant(Matrix value);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer for a node, allocated (zeroed) on first use.
  Matrix& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() != 0; }

  // Adds a computed node. The backward closure runs only when the node
  // received a gradient.
  Var push(Matrix value, bool needs_grad, std::function<void(Graph&, const Matrix&)> backward);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 node and propagates to every leaf.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Graph&, const Matrix&)> backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool grad_enabled_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// a (n x m) + bias (1 x m) broadcast over rows.
Var add_bias(Var a, Var bias);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
// Rows of `table` selected by ids.
Var embedding(Var table, std::span<const int> ids);
// mask[i] * a.row(i) + (1 - mask[i]) * b.row(i)
Var blend_rows(std::span<const double> mask, Var a, Var b);
// Elementwise product with a constant matrix (dropout masks).
Var mul_constant(Var a, const Matrix& c);
Var sum(std::span<const Var> scalars);

// 1x1 convolution over a batch of channel-major grids: x is n x (in * pixels),
// weight is out x in, bias is 1 x out; result is n x (out * pixels).
Var pointwise_conv(Var x, Var weight, Var bias, Eigen::Index pixels);

// One GRU step (r, z, n gate order). gx holds precomputed input projections;
// rows [row, row + h.rows()) are used. Rows whose mask entry is 0 keep their
// previous state; an empty mask means every row advances.
Var gru_cell(Var gx, Eigen::Index row, Var h, Var w_hh, Var b_hh, std::span<const double> mask = {});

// Dot-product attention of query rows over a memory of per-position rows,
// restricted to the first lengths[b] positions of row b. Returns the context
// (rows x memory cols); weights, if given, receives rows x positions.
Var attention(Var query, std::span<const Var> memory, std::span<const int> lengths,
              Matrix* weights = nullptr);

// Mean over the first lengths[b] memory positions of each row.
Var masked_mean(std::span<const Var> memory, std::span<const int> lengths);

// Summed softmax cross-entropy over rows whose target is not ignore_id.
// Returns a 1x1 node; correct, if given, is incremented by the number of
// counted rows whose argmax equals the target.
Var cross_entropy(Var logits, std::span<const int> targets, int ignore_id, long* correct = nullptr);

// Numerically stable log-softmax of one row vector.
Eigen::VectorXd log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits);

}  // namespace actsum::ad
