#include "mvlatent/tensor_ops.hpp"

#include <cmath>
#include <string>

#include "mvlatent/errors.hpp"

namespace mvlatent::nn {

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw DimensionError(std::string(op) + ": shape mismatch");
}

template <typename F>
Tensor map_elem(const Tensor& a, F f) {
  Tensor out = a;
  for (double& v : out.data) v = f(v);
  return out;
}

}  // namespace

Tensor t_matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
  if (b.shape[0] != k) throw DimensionError("matmul: inner dimensions disagree");
  Tensor out = Tensor::zeros({n, m});
  const double* ap = a.data.data();
  const double* bp = b.data.data();
  double* cp = out.data.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = ap + i * k;
    double* crow = cp + i * m;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aval = arow[kk];
      if (aval == 0.0) continue;
      const double* brow = bp + kk * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aval * brow[j];
    }
  }
  return out;
}

Tensor t_matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[0];
  if (b.shape[1] != k) throw DimensionError("matmul_nt: inner dimensions disagree");
  Tensor out = Tensor::zeros({n, m});
  const double* ap = a.data.data();
  const double* bp = b.data.data();
  double* cp = out.data.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = ap + i * k;
    double* crow = cp + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = bp + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] = acc;
    }
  }
  return out;
}

Tensor t_matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_tn");
  require_rank2(b, "matmul_tn");
  const std::size_t k = a.shape[0], n = a.shape[1], m = b.shape[1];
  if (b.shape[0] != k) throw DimensionError("matmul_tn: inner dimensions disagree");
  Tensor out = Tensor::zeros({n, m});
  const double* ap = a.data.data();
  const double* bp = b.data.data();
  double* cp = out.data.data();
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = ap + kk * n;
    const double* brow = bp + kk * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double aval = arow[i];
      if (aval == 0.0) continue;
      double* crow = cp + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aval * brow[j];
    }
  }
  return out;
}

Tensor t_add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor t_sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor t_mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor t_scale(const Tensor& a, double c) {
  return map_elem(a, [c](double v) { return v * c; });
}

Tensor t_add_scalar(const Tensor& a, double c) {
  return map_elem(a, [c](double v) { return v + c; });
}

Tensor t_add_rowvec(const Tensor& a, const Tensor& v) {
  require_rank2(a, "add_rowvec");
  if (v.numel() != a.shape[1]) throw DimensionError("add_rowvec: width mismatch");
  Tensor out = a;
  const std::size_t n = a.shape[0], m = a.shape[1];
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] += v.data[j];
  }
  return out;
}

Tensor t_relu(const Tensor& a) {
  return map_elem(a, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor t_tanh(const Tensor& a) {
  return map_elem(a, [](double v) { return std::tanh(v); });
}

Tensor t_sigmoid(const Tensor& a) {
  return map_elem(a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor t_exp(const Tensor& a) {
  return map_elem(a, [](double v) { return std::exp(v); });
}

Tensor t_log_clamped(const Tensor& a, double floor) {
  return map_elem(a, [floor](double v) { return std::log(v > floor ? v : floor); });
}

Tensor t_square(const Tensor& a) {
  return map_elem(a, [](double v) { return v * v; });
}

Tensor t_sqrt(const Tensor& a) {
  return map_elem(a, [](double v) { return std::sqrt(v); });
}

Tensor t_row_sum(const Tensor& a) {
  require_rank2(a, "row_sum");
  const std::size_t n = a.shape[0], m = a.shape[1];
  Tensor out = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = a.data.data() + i * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += row[j];
    out.data[i] = acc;
  }
  return out;
}

Tensor t_col_sum(const Tensor& a) {
  require_rank2(a, "col_sum");
  const std::size_t n = a.shape[0], m = a.shape[1];
  Tensor out = Tensor::zeros({m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = a.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) out.data[j] += row[j];
  }
  return out;
}

double t_sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v;
  return acc;
}

Tensor t_concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.shape[0] != b.shape[0]) throw DimensionError("concat_cols: row count mismatch");
  const std::size_t n = a.shape[0], ma = a.shape[1], mb = b.shape[1];
  Tensor out = Tensor::zeros({n, ma + mb});
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data.data() + i * (ma + mb);
    const double* arow = a.data.data() + i * ma;
    const double* brow = b.data.data() + i * mb;
    for (std::size_t j = 0; j < ma; ++j) row[j] = arow[j];
    for (std::size_t j = 0; j < mb; ++j) row[ma + j] = brow[j];
  }
  return out;
}

Tensor t_slice_cols(const Tensor& a, std::size_t begin, std::size_t len) {
  require_rank2(a, "slice_cols");
  if (begin + len > a.shape[1]) throw DimensionError("slice_cols: out of range");
  const std::size_t n = a.shape[0], m = a.shape[1];
  Tensor out = Tensor::zeros({n, len});
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * m + begin;
    double* row = out.data.data() + i * len;
    for (std::size_t j = 0; j < len; ++j) row[j] = arow[j];
  }
  return out;
}

}  // namespace mvlatent::nn
