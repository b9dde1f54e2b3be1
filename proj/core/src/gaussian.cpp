#include "mvlatent/gaussian.hpp"

#include <algorithm>
#include <cmath>

#include "mvlatent/errors.hpp"

namespace mvlatent::nn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLogVarClamp = 10.0;

}  // namespace

DiagGaussian::DiagGaussian(Tensor mean_, Tensor log_var_)
    : mean(std::move(mean_)), log_var(std::move(log_var_)) {
  if (mean.numel() != log_var.numel()) {
    throw DimensionError("diag gaussian: mean length " + std::to_string(mean.numel()) +
                         " != log_var length " + std::to_string(log_var.numel()));
  }
}

DiagGaussian DiagGaussian::checked(Tensor mean, Tensor log_var) {
  mean.require_finite("diag gaussian mean");
  log_var.require_finite("diag gaussian log_var");
  for (auto& v : log_var.data) v = std::clamp(v, -kLogVarClamp, kLogVarClamp);
  return DiagGaussian(std::move(mean), std::move(log_var));
}

DiagGaussian DiagGaussian::standard(std::size_t d) {
  return DiagGaussian(Tensor::zeros({d}), Tensor::zeros({d}));
}

double kl_divergence(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.dim() != p.dim()) {
    throw DimensionError("kl_divergence: dimension mismatch (" +
                         std::to_string(q.dim()) + " vs " + std::to_string(p.dim()) + ")");
  }
  // 0.5 * sum[ log(vp/vq) + vq/vp + (mq-mp)^2/vp - 1 ]
  double total = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double lvq = q.log_var[i], lvp = p.log_var[i];
    const double vq = std::exp(lvq), vp = std::exp(lvp);
    const double dm = q.mean[i] - p.mean[i];
    total += 0.5 * ((lvp - lvq) + vq / vp + dm * dm / vp - 1.0);
  }
  return total;
}

double log_pdf_isotropic(const Tensor& x, const Tensor& mean, double sigma) {
  if (x.numel() != mean.numel()) {
    throw DimensionError("log_pdf_isotropic: x length " + std::to_string(x.numel()) +
                         " != mean length " + std::to_string(mean.numel()));
  }
  if (sigma <= 0.0) {
    throw InvalidArgument("log_pdf_isotropic: sigma must be > 0, got " +
                          std::to_string(sigma));
  }
  const double d = static_cast<double>(x.numel());
  const double inv_var = 1.0 / (sigma * sigma);
  double sq = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double diff = x[i] - mean[i];
    sq += diff * diff;
  }
  return -0.5 * d * (kLog2Pi + 2.0 * std::log(sigma)) - 0.5 * inv_var * sq;
}

Tensor reparameterize(const DiagGaussian& q, const Tensor& eps) {
  if (eps.numel() != q.dim()) {
    throw DimensionError("reparameterize: eps length " + std::to_string(eps.numel()) +
                         " != distribution dimension " + std::to_string(q.dim()));
  }
  Tensor out = q.mean;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] += std::exp(0.5 * q.log_var[i]) * eps[i];
  }
  return out;
}

Tensor standard_normal(Rng& rng, std::size_t d) {
  if (d == 0) throw InvalidArgument("standard_normal: d must be >= 1");
  Tensor out = Tensor::zeros({d});
  rng.fill_normal(out.data.data(), d);
  return out;
}

}  // namespace mvlatent::nn
