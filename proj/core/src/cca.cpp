#include "mvlatent/cca.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "mvlatent/errors.hpp"

namespace mvlatent::cca {

using nn::shape_string;

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("cca: expected a rank-2 sample matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.at(i, j);
  return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(m.rows()),
                            static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      t.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  return t;
}

Tensor vec_from_eigen(const Eigen::VectorXd& v) {
  Tensor t = Tensor::zeros({static_cast<std::size_t>(v.size())});
  for (Eigen::Index i = 0; i < v.size(); ++i) t[static_cast<std::size_t>(i)] = v(i);
  return t;
}

/// Inverse matrix square root of a symmetric PSD matrix, with the smallest
/// eigenvalue reported for singularity checks.
Eigen::MatrixXd inv_sqrt_psd(const Eigen::MatrixXd& S, double* min_eig) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) {
    throw NumericError("cca: eigendecomposition of a view covariance failed");
  }
  const Eigen::VectorXd& evals = es.eigenvalues();
  *min_eig = evals(0);
  Eigen::VectorXd inv_sqrt(evals.size());
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    inv_sqrt(i) = evals(i) > 0.0 ? 1.0 / std::sqrt(evals(i)) : 0.0;
  }
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

struct Whitened {
  Eigen::MatrixXd Xc, Yc;       // centered samples
  Eigen::VectorXd mx, my;       // view means
  Eigen::MatrixXd Sxx, Syy, Sxy;
  Eigen::MatrixXd Wx, Wy;       // inverse square roots of (S + reg I)
  Eigen::MatrixXd U, V;         // SVD factors of the whitened cross-covariance
  Eigen::VectorXd sv;           // singular values (canonical correlations)
};

Whitened whiten_and_decompose(const Tensor& X, const Tensor& Y, std::size_t k,
                              double reg) {
  if (X.rank() != 2 || Y.rank() != 2 || X.rows() != Y.rows()) {
    throw DimensionError("cca: X and Y must be [N, d] matrices with equal N");
  }
  const std::size_t n = X.rows();
  if (k == 0) throw InvalidArgument("cca: k must be >= 1");
  if (k > std::min(X.cols(), Y.cols())) {
    throw InvalidArgument("cca: k = " + std::to_string(k) +
                          " exceeds min view dimension " +
                          std::to_string(std::min(X.cols(), Y.cols())));
  }
  if (n <= k) {
    throw InvalidArgument("cca: need more than k = " + std::to_string(k) +
                          " samples, got " + std::to_string(n));
  }
  if (reg < 0.0) throw InvalidArgument("cca: reg must be >= 0");

  Whitened w;
  Eigen::MatrixXd Xe = to_eigen(X), Ye = to_eigen(Y);
  w.mx = Xe.colwise().mean();
  w.my = Ye.colwise().mean();
  w.Xc = Xe.rowwise() - w.mx.transpose();
  w.Yc = Ye.rowwise() - w.my.transpose();

  const double inv_n = 1.0 / static_cast<double>(n);
  w.Sxx = (w.Xc.transpose() * w.Xc) * inv_n;
  w.Syy = (w.Yc.transpose() * w.Yc) * inv_n;
  w.Sxy = (w.Xc.transpose() * w.Yc) * inv_n;
  w.Sxx.diagonal().array() += reg;
  w.Syy.diagonal().array() += reg;

  double min_x = 0.0, min_y = 0.0;
  w.Wx = inv_sqrt_psd(w.Sxx, &min_x);
  w.Wy = inv_sqrt_psd(w.Syy, &min_y);
  const double tol_x = 1e-12 * std::max(1.0, w.Sxx.diagonal().maxCoeff());
  const double tol_y = 1e-12 * std::max(1.0, w.Syy.diagonal().maxCoeff());
  if (reg == 0.0 && (min_x <= tol_x || min_y <= tol_y)) {
    throw NumericError(
        "cca: a view covariance is singular with reg=0; pass reg > 0 "
        "(e.g. 1e-4) to regularize");
  }

  Eigen::MatrixXd T = w.Wx * w.Sxy * w.Wy;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T, Eigen::ComputeThinU | Eigen::ComputeThinV);
  w.U = svd.matrixU();
  w.V = svd.matrixV();
  w.sv = svd.singularValues();
  return w;
}

/// Largest-magnitude entry of each proj_x column made positive; the paired
/// proj_y column is flipped in tandem, keeping projected cross-covariances
/// (and so the reported correlations) positive.
void fix_signs(Eigen::MatrixXd& px, Eigen::MatrixXd& py) {
  for (Eigen::Index c = 0; c < px.cols(); ++c) {
    Eigen::Index imax = 0;
    px.col(c).cwiseAbs().maxCoeff(&imax);
    if (px(imax, c) < 0.0) {
      px.col(c) = -px.col(c);
      py.col(c) = -py.col(c);
    }
  }
}

}  // namespace

CcaResult linear_cca(const Tensor& X, const Tensor& Y, std::size_t k, double reg) {
  Whitened w = whiten_and_decompose(X, Y, k, reg);
  const auto ki = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd px = w.Wx * w.U.leftCols(ki);
  Eigen::MatrixXd py = w.Wy * w.V.leftCols(ki);
  fix_signs(px, py);

  CcaResult result;
  result.proj_x = from_eigen(px);
  result.proj_y = from_eigen(py);
  result.mean_x = vec_from_eigen(w.mx);
  result.mean_y = vec_from_eigen(w.my);
  result.correlations.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    result.correlations[i] = std::clamp(w.sv(static_cast<Eigen::Index>(i)), 0.0, 1.0);
  }
  result.regularization = reg;
  return result;
}

PccaResult pcca_ml(const Tensor& X, const Tensor& Y, std::size_t k, double reg) {
  Whitened w = whiten_and_decompose(X, Y, k, reg);
  const auto ki = static_cast<Eigen::Index>(k);

  // Canonical directions U_x = Sxx^-1/2 U, and the ML loadings
  // W_x = Sxx U_x M with M = diag(sqrt(rho)); posterior map E[z|x] =
  // M^T U_x^T (x - mean), i.e. post_x = U_x M.
  Eigen::MatrixXd ux = w.Wx * w.U.leftCols(ki);
  Eigen::MatrixXd uy = w.Wy * w.V.leftCols(ki);
  fix_signs(ux, uy);

  Eigen::VectorXd sqrt_rho(ki);
  for (Eigen::Index i = 0; i < ki; ++i) {
    sqrt_rho(i) = std::sqrt(std::clamp(w.sv(i), 0.0, 1.0));
  }
  Eigen::MatrixXd load_x = w.Sxx * ux * sqrt_rho.asDiagonal();
  Eigen::MatrixXd load_y = w.Syy * uy * sqrt_rho.asDiagonal();
  Eigen::MatrixXd noise_x = w.Sxx - load_x * load_x.transpose();
  Eigen::MatrixXd noise_y = w.Syy - load_y * load_y.transpose();
  Eigen::MatrixXd post_x = ux * sqrt_rho.asDiagonal();
  Eigen::MatrixXd post_y = uy * sqrt_rho.asDiagonal();

  PccaResult result;
  result.load_x = from_eigen(load_x);
  result.load_y = from_eigen(load_y);
  result.noise_x = from_eigen(noise_x);
  result.noise_y = from_eigen(noise_y);
  result.post_x = from_eigen(post_x);
  result.post_y = from_eigen(post_y);
  result.mean_x = vec_from_eigen(w.mx);
  result.mean_y = vec_from_eigen(w.my);
  result.correlations.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    result.correlations[i] = std::clamp(w.sv(static_cast<Eigen::Index>(i)), 0.0, 1.0);
  }
  return result;
}

std::vector<double> principal_angles(const Tensor& U, const Tensor& V) {
  Eigen::MatrixXd Ue = to_eigen(U), Ve = to_eigen(V);
  if (Ue.rows() != Ve.rows()) {
    throw DimensionError("principal_angles: row counts differ");
  }
  auto orthonormalize = [](const Eigen::MatrixXd& M, const char* which) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
    if (qr.rank() < M.cols()) {
      throw NumericError(std::string("principal_angles: ") + which +
                         " is column rank-deficient");
    }
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), M.cols());
    return Q;
  };
  Eigen::MatrixXd Qu = orthonormalize(Ue, "U");
  Eigen::MatrixXd Qv = orthonormalize(Ve, "V");
  // Cosines from the inner-product SVD lose precision near angle 0 (acos is
  // flat there); sines from the residual SVD lose it near pi/2. atan2 of the
  // paired values is accurate across the whole range.
  Eigen::MatrixXd M = Qu.transpose() * Qv;
  Eigen::JacobiSVD<Eigen::MatrixXd> csvd(M);
  Eigen::VectorXd cosines = csvd.singularValues();  // descending
  Eigen::JacobiSVD<Eigen::MatrixXd> ssvd(Qv - Qu * M);
  Eigen::VectorXd sines = ssvd.singularValues();  // descending
  const std::size_t k = static_cast<std::size_t>(cosines.size());
  const auto n_sines = sines.size();
  std::vector<double> angles(k);
  for (std::size_t i = 0; i < k; ++i) {
    // i-th largest cosine pairs with the i-th smallest sine.
    const double c = std::clamp(cosines(static_cast<Eigen::Index>(i)), 0.0, 1.0);
    const double s =
        std::clamp(sines(n_sines - 1 - static_cast<Eigen::Index>(i)), 0.0, 1.0);
    angles[i] = std::atan2(s, c);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

Tensor project(const Tensor& X, const Tensor& P, const Tensor& mean) {
  if (X.rank() != 2 || P.rank() != 2 || X.cols() != P.rows() ||
      mean.numel() != X.cols()) {
    throw DimensionError("project: incompatible shapes X " + shape_string(X.shape) +
                         ", P " + shape_string(P.shape));
  }
  const std::size_t n = X.rows(), d = X.cols(), k = P.cols();
  Tensor out = Tensor::zeros({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double xc = X.at(i, j) - mean[j];
      if (xc == 0.0) continue;
      for (std::size_t c = 0; c < k; ++c) out.at(i, c) += xc * P.at(j, c);
    }
  }
  return out;
}

}  // namespace mvlatent::cca
