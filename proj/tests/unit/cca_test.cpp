#include "doctest.h"

#include <cmath>

#include "mvlatent/cca.hpp"
#include "mvlatent/errors.hpp"
#include "mvlatent/rng.hpp"

using namespace mvlatent;
using namespace mvlatent::cca;
using nn::Rng;
using nn::Tensor;

namespace {

Tensor random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  Tensor t = Tensor::zeros({n, d});
  Rng rng(seed);
  for (auto& v : t.data) v = rng.normal();
  return t;
}

// Fixed 6-sample scalar dataset used for the hand-checked 1-d cases.
const std::vector<double> kSixX{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
const std::vector<double> kSixY{1.0, 3.0, 2.0, 5.0, 4.0, 6.0};

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    cxx += (x[i] - mx) * (x[i] - mx);
    cyy += (y[i] - my) * (y[i] - my);
  }
  return cxy / std::sqrt(cxx * cyy);
}

}  // namespace

TEST_CASE("identical full-rank views have all correlations one") {
  Tensor X = random_matrix(200, 4, 1);
  CcaResult r = linear_cca(X, X, 4, 0.0);
  for (double c : r.correlations) CHECK(c == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("independent views have near-zero correlations") {
  Tensor X = random_matrix(100000, 5, 2);
  Tensor Y = random_matrix(100000, 5, 3);
  CcaResult r = linear_cca(X, Y, 5, 0.0);
  for (double c : r.correlations) {
    CHECK(c >= 0.0);
    CHECK(c < 0.02);
  }
}

TEST_CASE("one-dimensional cca recovers the pearson correlation") {
  Tensor X({6, 1}, kSixX);
  Tensor Y({6, 1}, kSixY);
  CcaResult r = linear_cca(X, Y, 1, 0.0);
  CHECK(r.correlations[0] == doctest::Approx(pearson(kSixX, kSixY)).epsilon(1e-10));
}

TEST_CASE("correlations are sorted, in range, and deterministic in sign") {
  Tensor X = random_matrix(500, 6, 4);
  // Correlated construction: Y shares 3 latent dimensions with X.
  Tensor Y = Tensor::zeros({500, 4});
  Rng noise(5);
  for (std::size_t i = 0; i < 500; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double shared = j < 3 ? X.at(i, j) : 0.0;
      Y.at(i, j) = shared + 0.5 * noise.normal();
    }
  }
  CcaResult r = linear_cca(X, Y, 4, 1e-6);
  for (std::size_t i = 0; i + 1 < r.correlations.size(); ++i) {
    CHECK(r.correlations[i] >= r.correlations[i + 1]);
  }
  for (double c : r.correlations) {
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
  // Sign convention: the largest-magnitude entry of each proj_x column > 0.
  for (std::size_t c = 0; c < 4; ++c) {
    double best = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      if (std::abs(r.proj_x.at(i, c)) > std::abs(best)) best = r.proj_x.at(i, c);
    }
    CHECK(best > 0.0);
  }
}

TEST_CASE("projected views have diagonal cross-covariance equal to the correlations") {
  Tensor X = random_matrix(2000, 5, 6);
  Tensor Y = Tensor::zeros({2000, 3});
  Rng noise(7);
  for (std::size_t i = 0; i < 2000; ++i) {
    Y.at(i, 0) = X.at(i, 0) + 0.3 * noise.normal();
    Y.at(i, 1) = X.at(i, 1) - X.at(i, 2) + 0.7 * noise.normal();
    Y.at(i, 2) = noise.normal();
  }
  CcaResult r = linear_cca(X, Y, 3, 0.0);
  Tensor px = project(X, r.proj_x, r.mean_x);
  Tensor py = project(Y, r.proj_y, r.mean_y);
  const std::size_t n = 2000;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      double cov = 0.0;
      for (std::size_t i = 0; i < n; ++i) cov += px.at(i, a) * py.at(i, b);
      cov /= n;
      const double expected = a == b ? r.correlations[a] : 0.0;
      CHECK(cov == doctest::Approx(expected).epsilon(1e-8).scale(1.0));
    }
    // Within-view whitening: projected X has unit variance per component.
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += px.at(i, a) * px.at(i, a);
    CHECK(var / n == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("correlations are invariant under invertible affine maps of either view") {
  Tensor X = random_matrix(1500, 4, 8);
  Tensor Y = Tensor::zeros({1500, 4});
  Rng noise(9);
  for (std::size_t i = 0; i < 1500; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      Y.at(i, j) = 0.8 * X.at(i, j) + 0.6 * noise.normal();
    }
  }
  CcaResult base = linear_cca(X, Y, 4, 0.0);

  // Apply a fixed well-conditioned affine map to X.
  Tensor A = Tensor::matrix(4, 4, {2, 1, 0, 0, 0, 3, 1, 0, 0, 0, 1.5, 0.5, 1, 0, 0, 2});
  Tensor Xt = Tensor::zeros({1500, 4});
  for (std::size_t i = 0; i < 1500; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 7.0;  // translation
      for (std::size_t l = 0; l < 4; ++l) acc += X.at(i, l) * A.at(l, j);
      Xt.at(i, j) = acc;
    }
  }
  CcaResult mapped = linear_cca(Xt, Y, 4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(mapped.correlations[i] ==
          doctest::Approx(base.correlations[i]).epsilon(1e-8));
  }
}

TEST_CASE("singular covariance with zero regularization is rejected with advice") {
  Tensor X = Tensor::zeros({50, 2});
  Rng rng(10);
  for (std::size_t i = 0; i < 50; ++i) {
    X.at(i, 0) = rng.normal();
    X.at(i, 1) = 2.0 * X.at(i, 0);  // exactly collinear
  }
  Tensor Y = random_matrix(50, 2, 11);
  CHECK_THROWS_WITH_AS(linear_cca(X, Y, 2, 0.0),
                       doctest::Contains("reg > 0"), NumericError);
  CHECK_NOTHROW(linear_cca(X, Y, 2, 1e-4));
}

TEST_CASE("degenerate k and mismatched sample counts are rejected") {
  Tensor X = random_matrix(20, 3, 12);
  Tensor Y = random_matrix(20, 3, 13);
  CHECK_THROWS_AS(linear_cca(X, Y, 0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(pcca_ml(X, Y, 0), InvalidArgument);
  CHECK_THROWS_AS(linear_cca(X, Y, 4, 0.0), InvalidArgument);
  Tensor Yshort = random_matrix(19, 3, 14);
  CHECK_THROWS_AS(linear_cca(X, Yshort, 2, 0.0), DimensionError);
}

TEST_CASE("pcca posterior maps span the linear cca projections") {
  Tensor X = random_matrix(800, 5, 15);
  Tensor Y = Tensor::zeros({800, 4});
  Rng noise(16);
  for (std::size_t i = 0; i < 800; ++i) {
    Y.at(i, 0) = X.at(i, 0) + 0.2 * noise.normal();
    Y.at(i, 1) = X.at(i, 1) + 0.4 * noise.normal();
    Y.at(i, 2) = X.at(i, 2) + 0.8 * noise.normal();
    Y.at(i, 3) = noise.normal();
  }
  CcaResult lin = linear_cca(X, Y, 3, 1e-8);
  PccaResult ml = pcca_ml(X, Y, 3, 1e-8);
  for (double a : principal_angles(ml.post_x, lin.proj_x)) CHECK(a < 1e-8);
  for (double a : principal_angles(ml.post_y, lin.proj_y)) CHECK(a < 1e-8);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ml.correlations[i] == doctest::Approx(lin.correlations[i]).epsilon(1e-12));
  }
}

TEST_CASE("pcca k=1 posterior direction is parallel to the cca direction") {
  Tensor X({6, 1}, kSixX);
  Tensor Y({6, 1}, kSixY);
  CcaResult lin = linear_cca(X, Y, 1, 0.0);
  PccaResult ml = pcca_ml(X, Y, 1, 0.0);
  // 1-d: both maps are scalars; parallel means the same sign and a
  // sqrt(correlation) scale between them.
  const double ratio = ml.post_x.at(0, 0) / lin.proj_x.at(0, 0);
  CHECK(ratio == doctest::Approx(std::sqrt(lin.correlations[0])).epsilon(1e-10));
  CHECK(ratio > 0.0);
}

TEST_CASE("principal angles on hand-constructed subspaces") {
  Tensor U = Tensor::matrix(3, 2, {1, 0, 0, 1, 0, 0});
  for (double a : principal_angles(U, U)) CHECK(a == doctest::Approx(0.0));

  Tensor e1 = Tensor::matrix(2, 1, {1, 0});
  Tensor e2 = Tensor::matrix(2, 1, {0, 1});
  auto perp = principal_angles(e1, e2);
  CHECK(perp.size() == 1);
  CHECK(perp[0] == doctest::Approx(M_PI / 2).epsilon(1e-12));

  Tensor diag = Tensor::matrix(2, 1, {1, 1});
  auto mid = principal_angles(e1, diag);
  CHECK(mid[0] == doctest::Approx(M_PI / 4).epsilon(1e-12));

  Tensor rank_def = Tensor::matrix(3, 2, {1, 2, 2, 4, 3, 6});  // collinear columns
  CHECK_THROWS_AS(principal_angles(rank_def, U), NumericError);
}
