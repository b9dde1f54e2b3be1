#pragma once

#include <functional>
#include <deque>
#include <string>
#include <vector>

#include "mvlatent/tensor.hpp"

namespace mvlatent::nn {

class Graph;

/// Lightweight handle to a node on a Graph tape.
struct Value {
  int id = -1;
  Graph* graph = nullptr;
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// Define-by-run reverse-mode tape. Operations (free functions below) append
/// nodes eagerly; backward() runs the recorded adjoint calls in reverse
/// construction order, which is a valid topological order by construction.
class Graph {
 public:
  /// checked = validate every intermediate for NaN/Inf and throw NumericError
  /// naming the offending operation.
  explicit Graph(bool checked = false) : checked_(checked) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Value constant(Tensor v, std::string name = "const");
  /// Leaf that accumulates a gradient (model parameter or differentiable input).
  Value param(Tensor v, std::string name = "param");

  /// Reverse pass from a scalar node. May be called once per graph.
  void backward(Value loss);

  const Tensor& value(Value v) const;
  /// Gradient of the last backward() target w.r.t. this node. Zero tensor for
  /// nodes off every path to the loss. Throws LookupError for foreign nodes.
  const Tensor& grad(Value v) const;
  double scalar(Value v) const;

  bool checked() const { return checked_; }
  std::size_t size() const { return nodes_.size(); }

  // Used by the op implementations.
  using BackFn = std::function<void(Graph&, int self)>;
  Value add_node(Tensor val, std::vector<int> parents, BackFn back, std::string name);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  const Tensor& val_ref(int id) const { return nodes_[id].val; }
  Tensor& grad_ref(int id) { return nodes_[id].grad; }
  void accumulate_grad(int id, const Tensor& g);

 private:
  struct Node {
    Tensor val;
    Tensor grad;  // allocated iff needs_grad
    std::vector<int> parents;
    BackFn back;
    std::string name;
    bool needs_grad = false;
  };

  void check_value(Value v) const;

  std::deque<Node> nodes_;  // deque: references stay valid as the tape grows
  bool checked_ = false;
  bool ran_backward_ = false;
};

// ---- Elementwise and structural ops ----

namespace ops {

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value scale(Value a, double c);
Value add_scalar(Value a, double c);
Value neg(Value a);

Value matmul(Value a, Value b);
/// x [n,in] * w [out,in]^T + b [out] in one node.
Value affine(Value x, Value w, Value b);

Value relu(Value a);
Value tanh_act(Value a);
Value sigmoid(Value a);
Value exp_elem(Value a);
/// log(max(x, floor)); zero gradient in the clamped region.
Value log_clamped(Value a, double floor = 1e-12);
Value square(Value a);
/// sqrt(x) with the adjoint denominator clamped away from zero.
Value sqrt_guarded(Value a, double guard = 1e-12);

Value row_sum(Value a);    // [n,m] -> [n,1]
Value sum_all(Value a);    // -> [1,1]
Value mean_all(Value a);   // -> [1,1]
Value concat_cols(Value a, Value b);
Value gather_rows(Value a, std::vector<std::size_t> rows);

}  // namespace ops

inline Value operator+(Value a, Value b) { return ops::add(a, b); }
inline Value operator-(Value a, Value b) { return ops::sub(a, b); }
inline Value operator*(Value a, Value b) { return ops::mul(a, b); }
inline Value operator*(double c, Value a) { return ops::scale(a, c); }

}  // namespace mvlatent::nn
