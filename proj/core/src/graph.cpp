#include "mvlatent/graph.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "mvlatent/errors.hpp"
#include "mvlatent/tensor_ops.hpp"

namespace mvlatent::nn {

namespace {

Graph* common_graph(Value a, Value b, const char* op) {
  if (!a.valid() || !b.valid() || a.graph != b.graph) {
    throw InvalidArgument(std::string(op) + ": operands from different graphs");
  }
  return a.graph;
}

}  // namespace

Value Graph::constant(Tensor v, std::string name) {
  if (checked_) v.require_finite(name);
  nodes_.push_back(Node{std::move(v), Tensor{}, {}, nullptr, std::move(name), false});
  return Value{static_cast<int>(nodes_.size()) - 1, this};
}

Value Graph::param(Tensor v, std::string name) {
  if (checked_) v.require_finite(name);
  Tensor g = Tensor::zeros(v.shape);
  nodes_.push_back(Node{std::move(v), std::move(g), {}, nullptr, std::move(name), true});
  return Value{static_cast<int>(nodes_.size()) - 1, this};
}

Value Graph::add_node(Tensor val, std::vector<int> parents, BackFn back,
                      std::string name) {
  if (checked_) val.require_finite(name);
  bool needs = false;
  for (int p : parents) needs = needs || nodes_[p].needs_grad;
  Node node{std::move(val), Tensor{}, std::move(parents), nullptr, std::move(name), needs};
  if (needs) {
    node.grad = Tensor::zeros(node.val.shape);
    node.back = std::move(back);
  }
  nodes_.push_back(std::move(node));
  return Value{static_cast<int>(nodes_.size()) - 1, this};
}

void Graph::accumulate_grad(int id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.grad.same_shape(g)) throw DimensionError("grad accumulation: shape mismatch");
  for (std::size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
}

void Graph::backward(Value loss) {
  check_value(loss);
  Node& top = nodes_[loss.id];
  if (top.val.numel() != 1) {
    throw InvalidArgument("backward: loss must be a scalar node");
  }
  if (ran_backward_) throw InvalidArgument("graph: backward() already ran");
  ran_backward_ = true;
  if (!top.needs_grad) return;  // loss independent of every parameter
  top.grad.data[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.back) n.back(*this, i);
  }
}

void Graph::check_value(Value v) const {
  if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw LookupError("graph: value not recorded on this graph");
  }
}

const Tensor& Graph::value(Value v) const {
  check_value(v);
  return nodes_[v.id].val;
}

const Tensor& Graph::grad(Value v) const {
  check_value(v);
  const Node& n = nodes_[v.id];
  if (!n.needs_grad) {
    throw LookupError(std::string("graph: node '") + n.name +
                      "' does not carry a gradient");
  }
  return n.grad;
}

double Graph::scalar(Value v) const {
  const Tensor& t = value(v);
  if (t.numel() != 1) throw DimensionError("scalar: node is not a scalar");
  return t.data[0];
}

// ---- op helpers ----

namespace {

template <typename Fwd, typename BackA, typename BackB>
Value binary_op(Value a, Value b, const char* name, Fwd fwd, BackA back_a, BackB back_b) {
  Graph* g = common_graph(a, b, name);
  Tensor out = fwd(g->val_ref(a.id), g->val_ref(b.id));
  int ia = a.id, ib = b.id;
  return g->add_node(std::move(out), {ia, ib},
                     [ia, ib, back_a, back_b](Graph& gr, int self) {
                       const Tensor& gout = gr.grad_ref(self);
                       if (gr.needs_grad(ia)) gr.accumulate_grad(ia, back_a(gr, gout, ia, ib));
                       if (gr.needs_grad(ib)) gr.accumulate_grad(ib, back_b(gr, gout, ia, ib));
                     },
                     name);
}

}  // namespace

namespace ops {

Value add(Value a, Value b) {
  return binary_op(
      a, b, "add", [](const Tensor& x, const Tensor& y) { return t_add(x, y); },
      [](Graph&, const Tensor& gout, int, int) { return gout; },
      [](Graph&, const Tensor& gout, int, int) { return gout; });
}

Value sub(Value a, Value b) {
  return binary_op(
      a, b, "sub", [](const Tensor& x, const Tensor& y) { return t_sub(x, y); },
      [](Graph&, const Tensor& gout, int, int) { return gout; },
      [](Graph&, const Tensor& gout, int, int) { return t_scale(gout, -1.0); });
}

Value mul(Value a, Value b) {
  return binary_op(
      a, b, "mul", [](const Tensor& x, const Tensor& y) { return t_mul(x, y); },
      [](Graph& gr, const Tensor& gout, int, int ib) { return t_mul(gout, gr.val_ref(ib)); },
      [](Graph& gr, const Tensor& gout, int ia, int) { return t_mul(gout, gr.val_ref(ia)); });
}

Value matmul(Value a, Value b) {
  return binary_op(
      a, b, "matmul",
      [](const Tensor& x, const Tensor& y) { return t_matmul(x, y); },
      [](Graph& gr, const Tensor& gout, int, int ib) {
        return t_matmul_nt(gout, gr.val_ref(ib));  // dA = G B^T
      },
      [](Graph& gr, const Tensor& gout, int ia, int) {
        return t_matmul_tn(gr.val_ref(ia), gout);  // dB = A^T G
      });
}

Value affine(Value x, Value w, Value b) {
  Graph* g = common_graph(x, w, "affine");
  common_graph(w, b, "affine");
  const Tensor& xv = g->val_ref(x.id);
  const Tensor& wv = g->val_ref(w.id);
  const Tensor& bv = g->val_ref(b.id);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.shape[1] != wv.shape[1]) {
    throw DimensionError("affine: input width " +
                         std::to_string(xv.rank() == 2 ? xv.shape[1] : xv.numel()) +
                         " does not match weight width " +
                         std::to_string(wv.rank() == 2 ? wv.shape[1] : 0));
  }
  if (bv.numel() != wv.shape[0]) throw DimensionError("affine: bias length mismatch");
  Tensor out = t_add_rowvec(t_matmul_nt(xv, wv), bv);
  int ix = x.id, iw = w.id, ib = b.id;
  return g->add_node(std::move(out), {ix, iw, ib},
                     [ix, iw, ib](Graph& gr, int self) {
                       const Tensor& gout = gr.grad_ref(self);
                       if (gr.needs_grad(ix))
                         gr.accumulate_grad(ix, t_matmul(gout, gr.val_ref(iw)));
                       if (gr.needs_grad(iw))
                         gr.accumulate_grad(iw, t_matmul_tn(gout, gr.val_ref(ix)));
                       if (gr.needs_grad(ib))
                         gr.accumulate_grad(ib, t_col_sum(gout));
                     },
                     "affine");
}

namespace {

template <typename Fwd, typename Back>
Value unary_op(Value a, const char* name, Fwd fwd, Back back) {
  Graph* g = a.graph;
  if (!a.valid()) throw InvalidArgument(std::string(name) + ": invalid value");
  Tensor out = fwd(g->val_ref(a.id));
  int ia = a.id;
  return g->add_node(std::move(out), {ia},
                     [ia, back](Graph& gr, int self) {
                       const Tensor& gout = gr.grad_ref(self);
                       gr.accumulate_grad(ia, back(gr, gout, ia, self));
                     },
                     name);
}

}  // namespace

Value scale(Value a, double c) {
  return unary_op(
      a, "scale", [c](const Tensor& x) { return t_scale(x, c); },
      [c](Graph&, const Tensor& gout, int, int) { return t_scale(gout, c); });
}

Value add_scalar(Value a, double c) {
  return unary_op(
      a, "add_scalar", [c](const Tensor& x) { return t_add_scalar(x, c); },
      [](Graph&, const Tensor& gout, int, int) { return gout; });
}

Value neg(Value a) { return scale(a, -1.0); }

Value relu(Value a) {
  return unary_op(
      a, "relu", [](const Tensor& x) { return t_relu(x); },
      [](Graph& gr, const Tensor& gout, int ia, int) {
        // Subgradient 0 at exactly 0.
        const Tensor& x = gr.val_ref(ia);
        Tensor g = gout;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          if (x.data[i] <= 0.0) g.data[i] = 0.0;
        }
        return g;
      });
}

Value tanh_act(Value a) {
  return unary_op(
      a, "tanh", [](const Tensor& x) { return t_tanh(x); },
      [](Graph& gr, const Tensor& gout, int, int self) {
        const Tensor& y = gr.val_ref(self);
        Tensor g = gout;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          g.data[i] *= 1.0 - y.data[i] * y.data[i];
        }
        return g;
      });
}

Value sigmoid(Value a) {
  return unary_op(
      a, "sigmoid", [](const Tensor& x) { return t_sigmoid(x); },
      [](Graph& gr, const Tensor& gout, int, int self) {
        const Tensor& y = gr.val_ref(self);
        Tensor g = gout;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          g.data[i] *= y.data[i] * (1.0 - y.data[i]);
        }
        return g;
      });
}

Value exp_elem(Value a) {
  return unary_op(
      a, "exp", [](const Tensor& x) { return t_exp(x); },
      [](Graph& gr, const Tensor& gout, int, int self) {
        return t_mul(gout, gr.val_ref(self));
      });
}

Value log_clamped(Value a, double floor) {
  return unary_op(
      a, "log_clamped",
      [floor](const Tensor& x) { return t_log_clamped(x, floor); },
      [floor](Graph& gr, const Tensor& gout, int ia, int) {
        const Tensor& x = gr.val_ref(ia);
        Tensor g = gout;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          g.data[i] = x.data[i] > floor ? g.data[i] / x.data[i] : 0.0;
        }
        return g;
      });
}

Value square(Value a) {
  return unary_op(
      a, "square", [](const Tensor& x) { return t_square(x); },
      [](Graph& gr, const Tensor& gout, int ia, int) {
        const Tensor& x = gr.val_ref(ia);
        Tensor g = gout;
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= 2.0 * x.data[i];
        return g;
      });
}

Value sqrt_guarded(Value a, double guard) {
  return unary_op(
      a, "sqrt_guarded", [](const Tensor& x) { return t_sqrt(x); },
      [guard](Graph& gr, const Tensor& gout, int, int self) {
        const Tensor& y = gr.val_ref(self);
        Tensor g = gout;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          g.data[i] *= 0.5 / (y.data[i] > guard ? y.data[i] : guard);
        }
        return g;
      });
}

Value row_sum(Value a) {
  return unary_op(
      a, "row_sum", [](const Tensor& x) { return t_row_sum(x); },
      [](Graph& gr, const Tensor& gout, int ia, int) {
        const Tensor& x = gr.val_ref(ia);
        Tensor g = Tensor::zeros(x.shape);
        const std::size_t n = x.shape[0], m = x.shape[1];
        for (std::size_t i = 0; i < n; ++i) {
          double gi = gout.data[i];
          double* row = g.data.data() + i * m;
          for (std::size_t j = 0; j < m; ++j) row[j] = gi;
        }
        return g;
      });
}

Value sum_all(Value a) {
  return unary_op(
      a, "sum_all",
      [](const Tensor& x) { return Tensor({1, 1}, {t_sum_all(x)}); },
      [](Graph& gr, const Tensor& gout, int ia, int) {
        return Tensor::full(gr.val_ref(ia).shape, gout.data[0]);
      });
}

Value mean_all(Value a) {
  if (!a.valid()) throw InvalidArgument("mean_all: invalid value");
  Graph* g = a.graph;
  double inv = 1.0 / static_cast<double>(g->val_ref(a.id).numel());
  return unary_op(
      a, "mean_all",
      [inv](const Tensor& x) { return Tensor({1, 1}, {t_sum_all(x) * inv}); },
      [inv](Graph& gr, const Tensor& gout, int ia, int) {
        return Tensor::full(gr.val_ref(ia).shape, gout.data[0] * inv);
      });
}

Value concat_cols(Value a, Value b) {
  return binary_op(
      a, b, "concat_cols",
      [](const Tensor& x, const Tensor& y) { return t_concat_cols(x, y); },
      [](Graph& gr, const Tensor& gout, int ia, int) {
        return t_slice_cols(gout, 0, gr.val_ref(ia).shape[1]);
      },
      [](Graph& gr, const Tensor& gout, int ia, int ib) {
        return t_slice_cols(gout, gr.val_ref(ia).shape[1], gr.val_ref(ib).shape[1]);
      });
}

Value gather_rows(Value a, std::vector<std::size_t> rows) {
  if (!a.valid()) throw InvalidArgument("gather_rows: invalid value");
  Graph* g = a.graph;
  const Tensor& x = g->val_ref(a.id);
  if (x.rank() != 2) throw DimensionError("gather_rows: expected rank-2 tensor");
  const std::size_t m = x.shape[1];
  Tensor out = Tensor::zeros({rows.size(), m});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.shape[0]) throw DimensionError("gather_rows: index out of range");
    const double* src = x.data.data() + rows[i] * m;
    double* dst = out.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) dst[j] = src[j];
  }
  int ia = a.id;
  return g->add_node(std::move(out), {ia},
                     [ia, rows = std::move(rows), m](Graph& gr, int self) {
                       const Tensor& gout = gr.grad_ref(self);
                       Tensor gin = Tensor::zeros(gr.val_ref(ia).shape);
                       for (std::size_t i = 0; i < rows.size(); ++i) {
                         double* dst = gin.data.data() + rows[i] * m;
                         const double* src = gout.data.data() + i * m;
                         for (std::size_t j = 0; j < m; ++j) dst[j] += src[j];
                       }
                       gr.accumulate_grad(ia, gin);
                     },
                     "gather_rows");
}

}  // namespace ops

}  // namespace mvlatent::nn
