#include "doctest.h"

#include <cmath>
#include <vector>

#include "mvlatent/errors.hpp"
#include "mvlatent/gaussian.hpp"
#include "mvlatent/grad_check.hpp"
#include "mvlatent/vcca.hpp"

using namespace mvlatent;
using namespace mvlatent::model;
using nn::Rng;
using nn::Tensor;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

ArchConfig tiny_arch() {
  ArchConfig config;
  config.input_x = 3;
  config.input_y = 2;
  config.z_dim = 2;
  config.shared_hidden = {4};
  config.private_hidden = {4};
  config.decoder_hidden = {4};
  config.dropout_rate = 0.0;
  return config;
}

void zero_params(VccapModel& model) {
  for (Tensor* t : param_tensors(model)) {
    for (double& v : t->data) v = 0.0;
  }
}

/// Zero-weight model: encoder emits N(0, I), decoders emit 0, so every term
/// of the bound has a closed form.
VccapModel zeroed_model(std::size_t d_x, std::size_t d_y, std::size_t z_dim) {
  ArchConfig config;
  config.input_x = d_x;
  config.input_y = d_y;
  config.z_dim = z_dim;
  config.shared_hidden = {4};
  config.decoder_hidden = {4};
  config.dropout_rate = 0.0;
  Rng rng(7);
  VccapModel model = make_vccap(config, rng);
  zero_params(model);
  return model;
}

ElboDraws zero_draws(const VccapModel& model, std::size_t n) {
  ElboDraws draws;
  draws.eps_z.push_back(Tensor::zeros({n, model.z_dim}));
  if (model.hx_dim > 0) draws.eps_hx.push_back(Tensor::zeros({n, model.hx_dim}));
  if (model.hy_dim > 0) draws.eps_hy.push_back(Tensor::zeros({n, model.hy_dim}));
  return draws;
}

bool params_bitwise_equal(const VccapModel& a, const VccapModel& b) {
  auto ta = param_tensors(a);
  auto tb = param_tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!nn::bitwise_equal(*ta[i], *tb[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero model on zero data reproduces the closed-form bound") {
  // d_x = d_y = 2, sigma_x = 1, sigma_y = 0.1: the bound collapses to
  // -ln(2 pi) - ln(2 pi * 0.01) with every KL term zero.
  VccapModel model = zeroed_model(2, 2, 3);
  const std::size_t n = 2;
  Tensor x = Tensor::zeros({n, 2});
  Tensor y = Tensor::zeros({n, 2});
  ElboBreakdown out = elbo_vccap(model, x, y, zero_draws(model, n), ElboWeights{});

  const double rec_x = -kLog2Pi;
  const double rec_y = -(kLog2Pi + std::log(0.01));
  CHECK(out.kl_z == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(out.kl_hx == 0.0);
  CHECK(out.kl_hy == 0.0);
  CHECK(out.rec_x == doctest::Approx(rec_x).epsilon(1e-12));
  CHECK(out.rec_y == doctest::Approx(rec_y).epsilon(1e-12));
  CHECK(out.elbo == doctest::Approx(0.9294160531694004).epsilon(1e-12));
}

TEST_CASE("reconstruction terms carry the squared-distance penalty") {
  VccapModel model = zeroed_model(2, 2, 3);
  Tensor x = Tensor::matrix(2, 2, {0.3, -0.4, 0.0, 0.0});
  Tensor y = Tensor::zeros({2, 2});
  ElboBreakdown out = elbo_vccap(model, x, y, zero_draws(model, 2), ElboWeights{});
  // Row 0: -ln(2 pi) - (0.09 + 0.16) / 2; row 1: -ln(2 pi). Mean of both.
  CHECK(out.rec_x == doctest::Approx(-kLog2Pi - 0.0625).epsilon(1e-12));
}

TEST_CASE("KL weights scale only the bound, never the reported terms") {
  VccapModel model = zeroed_model(2, 2, 3);
  // Mean head bias (1,1,1): KL(N(1,I) || N(0,I)) = 3/2 per row.
  for (double& v : model.encoder_z.at("b_mean").data) v = 1.0;
  Tensor x = Tensor::zeros({2, 2});
  Tensor y = Tensor::zeros({2, 2});
  ElboDraws draws = zero_draws(model, 2);

  ElboWeights beta1;
  ElboWeights beta10;
  beta10.beta_z = 10.0;
  ElboBreakdown a = elbo_vccap(model, x, y, draws, beta1);
  ElboBreakdown b = elbo_vccap(model, x, y, draws, beta10);
  CHECK(a.kl_z == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(b.kl_z == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(b.elbo - a.elbo == doctest::Approx(-9.0 * 1.5).epsilon(1e-12));

  ElboWeights beta0;
  beta0.beta_z = 0.0;
  ElboBreakdown c = elbo_vccap(model, x, y, draws, beta0);
  CHECK(c.elbo == doctest::Approx(c.rec_x + c.rec_y).epsilon(1e-12));
}

TEST_CASE("a constant prior batch shifts the KL to the given Gaussian") {
  VccapModel model = zeroed_model(2, 2, 3);
  Tensor x = Tensor::zeros({2, 2});
  Tensor y = Tensor::zeros({2, 2});
  PriorBatch prior;
  prior.mean = Tensor::full({2, 3}, 1.0);
  prior.log_var = Tensor::zeros({2, 3});
  ElboBreakdown out =
      elbo_vccap(model, x, y, zero_draws(model, 2), ElboWeights{}, prior);
  // q = N(0, I) against p = N(1, I): KL = 3/2.
  CHECK(out.kl_z == doctest::Approx(1.5).epsilon(1e-12));

  PriorBatch bad;
  bad.mean = Tensor::zeros({2, 2});
  bad.log_var = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(
      elbo_vccap(model, x, y, zero_draws(model, 2), ElboWeights{}, bad),
      DimensionError);
}

TEST_CASE("multi-draw bound is the average of the single-draw bounds") {
  ArchConfig config = tiny_arch();
  config.hx_dim = 1;
  config.hy_dim = 2;
  Rng rng(11);
  VccapModel model = make_vccap(config, rng);

  const std::size_t n = 3;
  Tensor x = Tensor::zeros({n, 3});
  Tensor y = Tensor::zeros({n, 2});
  Rng data_rng(21);
  data_rng.fill_normal(x.data.data(), x.data.size());
  data_rng.fill_normal(y.data.data(), y.data.size());

  Rng eps_rng(31);
  ElboDraws both = make_draws(model, n, 2, eps_rng);
  ElboDraws first, second;
  first.eps_z = {both.eps_z[0]};
  first.eps_hx = {both.eps_hx[0]};
  first.eps_hy = {both.eps_hy[0]};
  second.eps_z = {both.eps_z[1]};
  second.eps_hx = {both.eps_hx[1]};
  second.eps_hy = {both.eps_hy[1]};

  ElboBreakdown ab = elbo_vccap(model, x, y, both, ElboWeights{});
  ElboBreakdown a = elbo_vccap(model, x, y, first, ElboWeights{});
  ElboBreakdown b = elbo_vccap(model, x, y, second, ElboWeights{});

  CHECK(ab.kl_z == a.kl_z);  // KL does not depend on the draws
  CHECK(ab.rec_x == doctest::Approx(0.5 * (a.rec_x + b.rec_x)).epsilon(1e-12));
  CHECK(ab.rec_y == doctest::Approx(0.5 * (a.rec_y + b.rec_y)).epsilon(1e-12));
  CHECK(ab.elbo == doctest::Approx(0.5 * (a.elbo + b.elbo)).epsilon(1e-12));
}

TEST_CASE("draw tensors follow the per-sample z, hx, hy order") {
  ArchConfig config = tiny_arch();
  config.hx_dim = 1;
  config.hy_dim = 2;
  Rng rng(5);
  VccapModel model = make_vccap(config, rng);

  const std::size_t n = 3;
  Rng draws_rng(99);
  ElboDraws draws = make_draws(model, n, 2, draws_rng);
  REQUIRE(draws.eps_z.size() == 2);
  REQUIRE(draws.eps_hx.size() == 2);
  REQUIRE(draws.eps_hy.size() == 2);

  Rng manual(99);
  for (std::size_t s = 0; s < 2; ++s) {
    Tensor ez = Tensor::zeros({n, 2});
    manual.fill_normal(ez.data.data(), ez.data.size());
    Tensor ehx = Tensor::zeros({n, 1});
    manual.fill_normal(ehx.data.data(), ehx.data.size());
    Tensor ehy = Tensor::zeros({n, 2});
    manual.fill_normal(ehy.data.data(), ehy.data.size());
    CHECK(nn::bitwise_equal(draws.eps_z[s], ez));
    CHECK(nn::bitwise_equal(draws.eps_hx[s], ehx));
    CHECK(nn::bitwise_equal(draws.eps_hy[s], ehy));
  }

  Rng bad(1);
  CHECK_THROWS_AS(make_draws(model, n, 0, bad), InvalidArgument);
}

TEST_CASE("disabled private channels reduce to the shared-only model bit for bit") {
  ArchConfig config = tiny_arch();

  Rng rng_a(77);
  VccaModel vcca = make_vcca(config, rng_a);
  Rng rng_b(77);
  VccapModel vccap = make_vccap(config, rng_b);  // hx_dim = hy_dim = 0

  VccapModel vcca_as_vccap;
  static_cast<VccaModel&>(vcca_as_vccap) = vcca;
  CHECK(params_bitwise_equal(vcca_as_vccap, vccap));

  const std::size_t n = 4;
  Tensor x = Tensor::zeros({n, 3});
  Tensor y = Tensor::zeros({n, 2});
  Rng data_rng(3);
  data_rng.fill_normal(x.data.data(), x.data.size());
  data_rng.fill_normal(y.data.data(), y.data.size());
  Tensor eps = Tensor::zeros({n, 2});
  data_rng.fill_normal(eps.data.data(), eps.data.size());

  ElboDraws draws;
  draws.eps_z = {eps};
  ElboBreakdown via_vccap = elbo_vccap(vccap, x, y, draws, ElboWeights{});
  ElboBreakdown via_vcca = elbo_vcca(vcca, x, y, {eps}, 1.0);
  CHECK(via_vcca.elbo == via_vccap.elbo);
  CHECK(via_vcca.kl_z == via_vccap.kl_z);
  CHECK(via_vcca.rec_x == via_vccap.rec_x);
  CHECK(via_vcca.rec_y == via_vccap.rec_y);
  CHECK(via_vcca.kl_hx == 0.0);
  CHECK(via_vcca.kl_hy == 0.0);
}

TEST_CASE("model construction is deterministic in the seed") {
  ArchConfig config = tiny_arch();
  config.hx_dim = 2;
  config.hy_dim = 1;
  Rng a(123);
  Rng b(123);
  Rng c(124);
  VccapModel ma = make_vccap(config, a);
  VccapModel mb = make_vccap(config, b);
  VccapModel mc = make_vccap(config, c);
  CHECK(params_bitwise_equal(ma, mb));

  bool any_diff = false;
  auto ta = param_tensors(ma);
  auto tc = param_tensors(mc);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!nn::bitwise_equal(*ta[i], *tc[i])) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("parameter names follow the canonical net order") {
  ArchConfig config = tiny_arch();
  config.hx_dim = 1;
  config.hy_dim = 1;
  Rng rng(1);
  VccapModel model = make_vccap(config, rng);
  auto names = param_names(model);
  auto tensors = param_tensors(model);
  REQUIRE(names.size() == tensors.size());
  CHECK(names.front() == "encoder_z.w0");
  // Every encoder_z name precedes every encoder_hx name, and so on.
  std::vector<std::string> nets = {"encoder_z", "encoder_hx", "encoder_hy",
                                   "decoder_x", "decoder_y"};
  std::size_t net_idx = 0;
  for (const auto& name : names) {
    while (net_idx < nets.size() &&
           name.rfind(nets[net_idx] + ".", 0) != 0) {
      ++net_idx;
    }
    REQUIRE(net_idx < nets.size());
  }
}

TEST_CASE("model validation rejects inconsistent structures") {
  ArchConfig config = tiny_arch();
  config.hx_dim = 1;
  config.hy_dim = 1;
  Rng rng(9);

  SUBCASE("valid model passes") {
    VccapModel model = make_vccap(config, rng);
    CHECK_NOTHROW(validate_model(model));
  }
  SUBCASE("nonpositive sigma") {
    VccapModel model = make_vccap(config, rng);
    model.sigma_y = 0.0;
    CHECK_THROWS_AS(validate_model(model), ConfigError);
  }
  SUBCASE("decoder input width out of step with the latent dims") {
    VccapModel model = make_vccap(config, rng);
    model.hx_dim = 2;  // decoder_x still consumes z_dim + 1
    CHECK_THROWS_AS(validate_model(model), mvlatent::Error);
  }
  SUBCASE("phantom private parameters") {
    VccapModel model = make_vccap(config, rng);
    model.hx_dim = 0;
    CHECK_THROWS_AS(validate_model(model), ConfigError);
  }
  SUBCASE("zero z_dim is rejected at construction") {
    ArchConfig bad = config;
    bad.z_dim = 0;
    CHECK_THROWS_AS(make_vccap(bad, rng), ConfigError);
  }
}

TEST_CASE("elbo gradients match finite differences") {
  ArchConfig config = tiny_arch();
  config.hx_dim = 1;
  config.hy_dim = 2;
  Rng rng(42);
  VccapModel model = make_vccap(config, rng);

  const std::size_t n = 2;
  Tensor x = Tensor::zeros({n, 3});
  Tensor y = Tensor::zeros({n, 2});
  Rng data_rng(43);
  data_rng.fill_normal(x.data.data(), x.data.size());
  data_rng.fill_normal(y.data.data(), y.data.size());
  Rng eps_rng(44);
  ElboDraws draws = make_draws(model, n, 1, eps_rng);

  std::vector<Tensor> start;
  for (const Tensor* t : param_tensors(model)) start.push_back(*t);

  SUBCASE("plain bound") {
    auto build = [&](nn::Graph& g, const std::vector<nn::Value>& leaves) {
      BoundParams params = split_params(model, leaves);
      ElboNodes nodes =
          build_elbo(g, model, params, x, y, draws, ElboWeights{}, PriorBatch{});
      return nn::ops::neg(nodes.elbo);
    };
    nn::GradCheckResult result = nn::grad_check(build, start);
    CHECK(result.max_rel_error < 1e-4);
    CHECK(result.checked_coords > 0);
  }

  SUBCASE("learned-prior KL and fixed dropout masks") {
    PriorBatch prior;
    prior.mean = Tensor::zeros({n, model.z_dim});
    prior.log_var = Tensor::zeros({n, model.z_dim});
    Rng prior_rng(45);
    prior_rng.fill_normal(prior.mean.data.data(), prior.mean.data.size());
    prior_rng.fill_normal(prior.log_var.data.data(), prior.log_var.data.size());

    VccapModel dropped = model;
    auto set_rate = [](MlpSpec& spec) { spec.dropout_rate = 0.2; };
    set_rate(dropped.encoder_z_spec);
    set_rate(dropped.encoder_hx_spec);
    set_rate(dropped.encoder_hy_spec);
    set_rate(dropped.decoder_x_spec);
    set_rate(dropped.decoder_y_spec);
    Rng mask_rng(46);
    VccapMasks masks = make_masks(dropped, n, mask_rng);

    ElboWeights weights;
    weights.beta_z = 2.0;
    weights.beta_hx = 0.5;
    weights.beta_hy = 3.0;
    auto build = [&](nn::Graph& g, const std::vector<nn::Value>& leaves) {
      BoundParams params = split_params(dropped, leaves);
      ElboNodes nodes =
          build_elbo(g, dropped, params, x, y, draws, weights, prior, &masks);
      return nn::ops::neg(nodes.elbo);
    };
    nn::GradCheckResult result = nn::grad_check(build, start);
    CHECK(result.max_rel_error < 1e-4);
  }
}

TEST_CASE("rate-zero masks are all ones and consume no randomness") {
  ArchConfig config = tiny_arch();
  Rng rng(2);
  VccapModel model = make_vccap(config, rng);  // dropout_rate = 0

  Rng mask_rng(50);
  VccapMasks masks = make_masks(model, 3, mask_rng);
  Rng untouched(50);
  CHECK(mask_rng.next_u64() == untouched.next_u64());
  REQUIRE(masks.encoder_z.size() == 1);
  for (double v : masks.encoder_z[0].data) CHECK(v == 1.0);
  CHECK(masks.encoder_hx.empty());  // channel disabled
  REQUIRE(masks.decoder_x.size() == 1);
  REQUIRE(masks.decoder_y.size() == 1);
}

TEST_CASE("dropout masks scale kept units by the inverse keep rate") {
  ArchConfig config = tiny_arch();
  config.dropout_rate = 0.2;
  Rng rng(3);
  VccapModel model = make_vccap(config, rng);
  Rng mask_rng(51);
  VccapMasks masks = make_masks(model, 64, mask_rng);
  REQUIRE(masks.encoder_z.size() == 1);
  bool saw_zero = false;
  bool saw_kept = false;
  for (double v : masks.encoder_z[0].data) {
    if (v == 0.0) {
      saw_zero = true;
    } else {
      CHECK(v == doctest::Approx(1.0 / 0.8).epsilon(1e-15));
      saw_kept = true;
    }
  }
  CHECK(saw_zero);
  CHECK(saw_kept);
}

TEST_CASE("feature encoding is the mean head and acts row by row") {
  SUBCASE("hand-set affine encoder") {
    ArchConfig config;
    config.input_x = 3;
    config.input_y = 2;
    config.z_dim = 2;
    config.shared_hidden = {};  // the heads consume the input directly
    config.decoder_hidden = {4};
    config.dropout_rate = 0.0;
    Rng rng(8);
    VccapModel model = make_vccap(config, rng);
    model.encoder_z.at("w_mean") =
        Tensor::matrix(2, 3, {1.0, 0.0, 0.0, 0.0, 2.0, 0.0});
    model.encoder_z.at("b_mean") = Tensor::vector({0.5, -1.0});

    Tensor x = Tensor::matrix(1, 3, {1.0, 2.0, 3.0});
    Tensor f = encode_features(model, x);
    REQUIRE(f.shape == std::vector<std::size_t>{1, 2});
    CHECK(f.at(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(f.at(0, 1) == doctest::Approx(3.0).epsilon(1e-15));
  }

  SUBCASE("rows are independent") {
    ArchConfig config = tiny_arch();
    Rng rng(12);
    VccapModel model = make_vccap(config, rng);
    Tensor batch = Tensor::zeros({3, 3});
    Rng data_rng(13);
    data_rng.fill_normal(batch.data.data(), batch.data.size());

    Tensor together = encode_features(model, batch);
    for (std::size_t i = 0; i < 3; ++i) {
      Tensor row = Tensor::zeros({1, 3});
      for (std::size_t j = 0; j < 3; ++j) row.at(0, j) = batch.at(i, j);
      Tensor alone = encode_features(model, row);
      for (std::size_t j = 0; j < together.cols(); ++j) {
        CHECK(together.at(i, j) == alone.at(0, j));
      }
    }
  }

  SUBCASE("input width is validated") {
    ArchConfig config = tiny_arch();
    Rng rng(14);
    VccapModel model = make_vccap(config, rng);
    CHECK_THROWS_AS(encode_features(model, Tensor::zeros({2, 4})),
                    DimensionError);
  }
}
