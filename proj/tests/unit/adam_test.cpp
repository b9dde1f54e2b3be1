#include "doctest.h"

#include <cmath>

#include "mvlatent/adam.hpp"
#include "mvlatent/errors.hpp"
#include "mvlatent/tensor.hpp"

using namespace mvlatent;
using namespace mvlatent::nn;

TEST_CASE("zero gradient leaves parameters unchanged but counts the step") {
  Tensor p = Tensor::vector({1.0, -2.0, 3.0});
  Tensor g = Tensor::zeros({3});
  Adam opt(AdamConfig{}, {&p});
  Tensor before = p;
  opt.step({&p}, {&g});
  CHECK(bitwise_equal(p, before));
  CHECK(opt.step_count() == 1);
  opt.step({&p}, {&g});
  CHECK(opt.step_count() == 2);
}

TEST_CASE("first step moves by about lr against the gradient sign") {
  // After bias correction the first update is lr * g / (|g| + eps'), i.e.
  // almost exactly lr in magnitude regardless of |g|.
  Tensor p = Tensor::vector({0.0});
  Tensor g = Tensor::vector({0.3});
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam opt(cfg, {&p});
  opt.step({&p}, {&g});
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-4));
}

TEST_CASE("two identical steps follow the moment recursion") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, grad = 0.3;
  Tensor p = Tensor::vector({0.0});
  Tensor g = Tensor::vector({grad});
  AdamConfig cfg;
  cfg.lr = lr;
  cfg.beta1 = b1;
  cfg.beta2 = b2;
  cfg.eps = eps;
  Adam opt(cfg, {&p});
  opt.step({&p}, {&g});
  opt.step({&p}, {&g});

  // Hand recursion.
  double m = 0.0, v = 0.0, x = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    double mh = m / (1 - std::pow(b1, t));
    double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
  }
  CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
  CHECK(opt.step_count() == 2);
}

TEST_CASE("shape drift and bad configuration are rejected") {
  Tensor p = Tensor::vector({1.0, 2.0});
  Tensor g = Tensor::vector({0.1, 0.1});
  Adam opt(AdamConfig{}, {&p});
  Tensor wrong = Tensor::vector({0.1});
  CHECK_THROWS_AS(opt.step({&p}, {&wrong}), DimensionError);
  CHECK_THROWS_AS(opt.step({&p}, {&g, &g}), DimensionError);

  AdamConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(Adam(bad, {&p}), ConfigError);
  AdamConfig bad2;
  bad2.beta1 = 1.0;
  CHECK_THROWS_AS(Adam(bad2, {&p}), ConfigError);
}

TEST_CASE("descends a simple quadratic") {
  // f(p) = 0.5 * ||p - target||^2, gradient p - target.
  Tensor p = Tensor::vector({5.0, -3.0});
  Tensor target = Tensor::vector({1.0, 2.0});
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam opt(cfg, {&p});
  for (int i = 0; i < 2000; ++i) {
    Tensor g = Tensor::vector({p[0] - target[0], p[1] - target[1]});
    opt.step({&p}, {&g});
  }
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(p[1] == doctest::Approx(2.0).epsilon(1e-2));
}
