#pragma once

#include "mvlatent/tensor.hpp"

namespace mvlatent::nn {

// Numeric kernels shared by the graph ops and the no-tape forward paths.
// Matrix products use a fixed accumulation order (ascending k per output
// row), so every output row is bit-reproducible and independent of the
// other rows in the batch.

Tensor t_matmul(const Tensor& a, const Tensor& b);     // [n,k] x [k,m]
Tensor t_matmul_nt(const Tensor& a, const Tensor& b);  // [n,k] x [m,k]^T -> [n,m]
Tensor t_matmul_tn(const Tensor& a, const Tensor& b);  // [k,n]^T x [k,m] -> [n,m]

Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_mul(const Tensor& a, const Tensor& b);
Tensor t_scale(const Tensor& a, double c);
Tensor t_add_scalar(const Tensor& a, double c);
Tensor t_add_rowvec(const Tensor& a, const Tensor& v);  // [n,m] + [m]

Tensor t_relu(const Tensor& a);
Tensor t_tanh(const Tensor& a);
Tensor t_sigmoid(const Tensor& a);
Tensor t_exp(const Tensor& a);
Tensor t_log_clamped(const Tensor& a, double floor);
Tensor t_square(const Tensor& a);
Tensor t_sqrt(const Tensor& a);

Tensor t_row_sum(const Tensor& a);  // [n,m] -> [n,1]
Tensor t_col_sum(const Tensor& a);  // [n,m] -> [m]
double t_sum_all(const Tensor& a);

Tensor t_concat_cols(const Tensor& a, const Tensor& b);
Tensor t_slice_cols(const Tensor& a, std::size_t begin, std::size_t len);

}  // namespace mvlatent::nn
