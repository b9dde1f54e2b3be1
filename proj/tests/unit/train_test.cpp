#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mvlatent/errors.hpp"
#include "mvlatent/train.hpp"

using namespace mvlatent;
using namespace mvlatent::model;
using nn::Rng;
using nn::Tensor;

namespace {

struct ToyData {
  Tensor x;
  Tensor y;
};

/// Two views driven by a shared 2-d latent plus independent noise.
ToyData toy_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = Tensor::zeros({n, 4});
  Tensor y = Tensor::zeros({n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    x.at(i, 0) = z0 + 0.1 * rng.normal();
    x.at(i, 1) = z1 + 0.1 * rng.normal();
    x.at(i, 2) = z0 - z1 + 0.1 * rng.normal();
    x.at(i, 3) = 0.1 * rng.normal();
    y.at(i, 0) = z0 + 0.1 * rng.normal();
    y.at(i, 1) = -z1 + 0.1 * rng.normal();
    y.at(i, 2) = z0 + z1 + 0.1 * rng.normal();
  }
  return {x, y};
}

ArchConfig toy_arch(std::size_t hx = 0, std::size_t hy = 0) {
  ArchConfig config;
  config.input_x = 4;
  config.input_y = 3;
  config.z_dim = 2;
  config.hx_dim = hx;
  config.hy_dim = hy;
  config.shared_hidden = {8};
  config.private_hidden = {8};
  config.decoder_hidden = {8};
  config.dropout_rate = 0.0;
  return config;
}

GanConfig toy_gan(double lambda) {
  GanConfig gan;
  DiscArch dx;
  dx.input = 4;
  dx.hidden = {8};
  dx.dropout_rate = 0.0;
  DiscArch dy;
  dy.input = 3;
  dy.hidden = {8};
  dy.dropout_rate = 0.0;
  Rng rng_x(301);
  Rng rng_y(302);
  nn::Mlp mx = make_discriminator(dx, rng_x);
  nn::Mlp my = make_discriminator(dy, rng_y);
  gan.disc_x_spec = mx.spec;
  gan.disc_x = mx.params;
  gan.disc_y_spec = my.spec;
  gan.disc_y = my.params;
  gan.lambda1 = lambda;
  gan.lambda2 = lambda;
  gan.disc_minibatch = 16;
  gan.disc_update_period = 3;
  return gan;
}

bool models_bitwise_equal(const VccapModel& a, const VccapModel& b) {
  auto ta = param_tensors(a);
  auto tb = param_tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!nn::bitwise_equal(*ta[i], *tb[i])) return false;
  }
  return true;
}

std::vector<Tensor> snapshot(const VccapModel& model) {
  std::vector<Tensor> out;
  for (const Tensor* t : param_tensors(model)) out.push_back(*t);
  return out;
}

}  // namespace

TEST_CASE("zero epochs leave the model at initialization") {
  ToyData data = toy_data(16, 1);
  Rng rng(2);
  VccapModel model = make_vccap(toy_arch(), rng);
  std::vector<Tensor> before = snapshot(model);

  TrainConfig config;
  config.epochs = 0;
  config.dropout_rate = 0.0;
  auto history = train_vccap(model, data.x, data.y, config);
  CHECK(history.empty());
  std::vector<Tensor> after = snapshot(model);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(nn::bitwise_equal(before[i], after[i]));
  }
}

TEST_CASE("the training objective improves on a small dataset") {
  ToyData data = toy_data(64, 3);
  Rng rng(4);
  VccapModel model = make_vccap(toy_arch(), rng);

  TrainConfig config;
  config.epochs = 200;
  config.learning_rate = 0.01;
  config.minibatch = 200;  // whole dataset per step
  config.dropout_rate = 0.0;
  config.seed = 11;
  auto history = train_vccap(model, data.x, data.y, config);
  REQUIRE(history.size() == 200);
  // The minimized objective is the negated bound: it must fall.
  CHECK(history.back().objective < history.front().objective);
  // Equivalently, the mean ELBO of the final epoch beats the first.
  CHECK(-history.back().objective > -history.front().objective);
  for (const EpochStats& row : history) {
    CHECK(std::isfinite(row.objective));
    CHECK(row.kl_z >= 0.0);
    CHECK(row.disc_x_loss == 0.0);
    CHECK(row.disc_y_loss == 0.0);
  }
}

TEST_CASE("training is bitwise deterministic in the seed") {
  ToyData data = toy_data(24, 5);
  TrainConfig config;
  config.epochs = 5;
  config.minibatch = 7;  // exercises a partial trailing batch of 3
  config.learning_rate = 0.003;
  config.dropout_rate = 0.2;
  config.seed = 99;

  Rng rng_a(6);
  VccapModel a = make_vccap(toy_arch(1, 1), rng_a);
  Rng rng_b(6);
  VccapModel b = make_vccap(toy_arch(1, 1), rng_b);

  auto ha = train_vccap(a, data.x, data.y, config);
  auto hb = train_vccap(b, data.x, data.y, config);
  CHECK(models_bitwise_equal(a, b));
  REQUIRE(ha.size() == hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].objective == hb[i].objective);
    CHECK(ha[i].kl_z == hb[i].kl_z);
    CHECK(ha[i].kl_hx == hb[i].kl_hx);
    CHECK(ha[i].rec_x == hb[i].rec_x);
  }

  Rng rng_c(6);
  VccapModel c = make_vccap(toy_arch(1, 1), rng_c);
  TrainConfig other = config;
  other.seed = 100;
  auto hc = train_vccap(c, data.x, data.y, other);
  CHECK(!models_bitwise_equal(a, c));
}

TEST_CASE("zero private dims train identically through both entry points") {
  ToyData data = toy_data(20, 7);
  Rng rng_a(8);
  VccaModel shared_only = make_vcca(toy_arch(), rng_a);
  Rng rng_b(8);
  VccapModel private_free = make_vccap(toy_arch(), rng_b);

  VccapModel lifted;
  static_cast<VccaModel&>(lifted) = shared_only;

  TrainConfig config;
  config.epochs = 4;
  config.minibatch = 8;
  config.dropout_rate = 0.2;
  config.seed = 12;
  auto ha = train_vccap(lifted, data.x, data.y, config);
  auto hb = train_vccap(private_free, data.x, data.y, config);
  CHECK(models_bitwise_equal(lifted, private_free));
  REQUIRE(ha.size() == hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].objective == hb[i].objective);
    CHECK(hb[i].kl_hx == 0.0);
    CHECK(hb[i].kl_hy == 0.0);
  }
}

TEST_CASE("zero adversarial weights leave the generator trajectory untouched") {
  ToyData data = toy_data(32, 9);
  Rng rng_a(10);
  VccapModel plain = make_vccap(toy_arch(1, 1), rng_a);
  Rng rng_b(10);
  VccapModel adversarial = make_vccap(toy_arch(1, 1), rng_b);

  GanConfig gan = toy_gan(0.0);
  const Tensor disc_x_before = gan.disc_x.items()[0].value;

  TrainConfig config;
  config.epochs = 3;
  config.minibatch = 8;
  config.dropout_rate = 0.2;
  config.seed = 13;
  auto h_plain = train_vccap(plain, data.x, data.y, config);
  auto h_gan = train_vccap(adversarial, data.x, data.y, config, PriorSpec{}, &gan);

  CHECK(models_bitwise_equal(plain, adversarial));
  REQUIRE(h_plain.size() == h_gan.size());
  for (std::size_t i = 0; i < h_plain.size(); ++i) {
    CHECK(h_plain[i].objective == h_gan[i].objective);
    CHECK(h_plain[i].kl_z == h_gan[i].kl_z);
  }
  // The discriminators still trained on their own stream.
  CHECK(!nn::bitwise_equal(gan.disc_x.items()[0].value, disc_x_before));
  bool any_disc_loss = false;
  for (const EpochStats& row : h_gan) {
    if (row.disc_x_loss != 0.0) any_disc_loss = true;
  }
  CHECK(any_disc_loss);
}

TEST_CASE("adversarial training stays finite and reports discriminator stats") {
  ToyData data = toy_data(32, 14);
  Rng rng(15);
  VccapModel model = make_vccap(toy_arch(1, 1), rng);
  GanConfig gan = toy_gan(5.0);

  TrainConfig config;
  config.epochs = 6;
  config.minibatch = 8;
  config.learning_rate = 0.001;
  config.dropout_rate = 0.2;
  config.seed = 16;
  auto history = train_vccap(model, data.x, data.y, config, PriorSpec{}, &gan);
  REQUIRE(history.size() == 6);
  for (const EpochStats& row : history) {
    CHECK(std::isfinite(row.objective));
    CHECK(std::isfinite(row.disc_x_loss));
    CHECK(row.disc_x_loss > 0.0);  // 4 steps/epoch, period 3: updates happen
    CHECK(row.disc_x_prob > 0.0);
    CHECK(row.disc_x_prob < 1.0);
    CHECK(row.disc_y_prob > 0.0);
    CHECK(row.disc_y_prob < 1.0);
  }
}

TEST_CASE("a stronger KL weight drives the KL term lower") {
  ToyData data = toy_data(64, 17);
  TrainConfig config;
  config.epochs = 150;
  config.learning_rate = 0.01;
  config.minibatch = 200;
  config.dropout_rate = 0.0;
  config.seed = 18;

  Rng rng_a(19);
  VccapModel beta1 = make_vccap(toy_arch(), rng_a);
  Rng rng_b(19);
  VccapModel beta10 = make_vccap(toy_arch(), rng_b);

  TrainConfig strong = config;
  strong.beta = 10.0;
  auto h1 = train_vccap(beta1, data.x, data.y, config);
  auto h10 = train_vccap(beta10, data.x, data.y, strong);
  CHECK(h10.back().kl_z < h1.back().kl_z);
}

TEST_CASE("training with a learned prior pulls the posterior toward it") {
  // Frozen prior encoder = warm-started copy: at initialization the KL to
  // the prior is exactly zero, so the first reported kl_z must be far below
  // the same model's KL to N(0, I).
  const std::size_t frame_dim = 4;  // treat each toy x row as one frame, W=1
  ToyData data = toy_data(32, 20);

  ArchConfig arch = toy_arch();
  Rng rng(21);
  VccapModel model = make_vccap(arch, rng);

  LearnedPrior learned;
  learned.encoder_spec = model.encoder_z_spec;
  Rng prior_rng(22);
  learned.encoder = nn::init_params(learned.encoder_spec, prior_rng);
  learned.w_prior = 1;
  learned.frame_dim = frame_dim;
  warm_start_from_prior(model, learned, 1);

  PriorSpec spec;
  spec.kind = PriorKind::learned;
  spec.learned = learned;

  TrainConfig config;
  config.epochs = 1;
  config.minibatch = 200;
  config.dropout_rate = 0.0;
  config.seed = 23;
  VccapModel to_prior = model;
  VccapModel to_standard = model;
  auto h_prior = train_vccap(to_prior, data.x, data.y, config, spec);
  auto h_standard = train_vccap(to_standard, data.x, data.y, config);
  CHECK(h_prior.front().kl_z == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(h_standard.front().kl_z > 0.01);
}

TEST_CASE("divergence aborts with the offending term named") {
  ToyData data = toy_data(8, 24);
  Rng rng(25);
  VccapModel model = make_vccap(toy_arch(), rng);
  for (double& v : model.encoder_z.at("b_logvar").data) v = 2000.0;

  TrainConfig config;
  config.epochs = 1;
  config.minibatch = 8;
  config.dropout_rate = 0.0;
  CHECK_THROWS_WITH_AS(train_vccap(model, data.x, data.y, config),
                       doctest::Contains("kl_z"), NumericError);
}

TEST_CASE("train config validation") {
  TrainConfig config;
  config.epochs = 1;
  SUBCASE("valid") { CHECK_NOTHROW(validate(config)); }
  SUBCASE("zero minibatch") {
    config.minibatch = 0;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("zero mc samples") {
    config.mc_samples = 0;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("negative beta") {
    config.beta = -1.0;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("nonpositive learning rate") {
    config.learning_rate = 0.0;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
  SUBCASE("dropout of one") {
    config.dropout_rate = 1.0;
    CHECK_THROWS_AS(validate(config), ConfigError);
  }
}

TEST_CASE("contrastive training shrinks the hinge and is deterministic") {
  ToyData data = toy_data(24, 26);
  ContrastiveArch arch;
  arch.input_x = 4;
  arch.input_y = 3;
  arch.feature_dim = 2;
  arch.hidden = {8};
  arch.dropout_rate = 0.0;

  TrainConfig config;
  config.epochs = 80;
  config.learning_rate = 0.01;
  config.minibatch = 7;  // trailing batch of 3
  config.dropout_rate = 0.0;
  config.seed = 27;

  Rng rng_a(28);
  ContrastiveModel a = make_contrastive(arch, rng_a);
  auto ha = train_contrastive(a, data.x, data.y, config);
  REQUIRE(ha.size() == 80);
  CHECK(ha.back().objective < ha.front().objective);
  CHECK(ha.back().objective >= 0.0);

  Rng rng_b(28);
  ContrastiveModel b = make_contrastive(arch, rng_b);
  auto hb = train_contrastive(b, data.x, data.y, config);
  auto ta = param_tensors(a);
  auto tb = param_tensors(b);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(nn::bitwise_equal(*ta[i], *tb[i]));
  }
  for (std::size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].objective == hb[i].objective);
  }
}

TEST_CASE("contrastive training folds a trailing singleton batch") {
  ToyData data = toy_data(5, 29);  // minibatch 2 -> batches of 2, 2, 1
  ContrastiveArch arch;
  arch.input_x = 4;
  arch.input_y = 3;
  arch.feature_dim = 2;
  arch.hidden = {8};
  arch.dropout_rate = 0.0;
  Rng rng(30);
  ContrastiveModel model = make_contrastive(arch, rng);

  TrainConfig config;
  config.epochs = 2;
  config.minibatch = 2;
  config.dropout_rate = 0.0;
  config.seed = 31;
  CHECK_NOTHROW(train_contrastive(model, data.x, data.y, config));

  ContrastiveModel lone = model;
  Tensor x1 = Tensor::zeros({1, 4});
  Tensor y1 = Tensor::zeros({1, 3});
  CHECK_THROWS_AS(train_contrastive(lone, x1, y1, config), InvalidArgument);
}

TEST_CASE("history CSV has the exact column contract and round-trips") {
  std::vector<EpochStats> history(2);
  history[0].epoch = 1;
  history[0].objective = -1.25;
  history[0].kl_z = 0.1234567890123456789;
  history[0].kl_hx = 3.0;
  history[0].kl_hy = -0.0;
  history[0].rec_x = -123456.789;
  history[0].rec_y = 1e-17;
  history[0].disc_x_loss = 1.3862943611198906;
  history[0].disc_y_loss = 0.21072103131565256;
  history[1].epoch = 2;
  history[1].objective = -2.5;

  std::string csv = history_csv(history);
  CHECK(csv.rfind("epoch,objective,kl_z,kl_hx,kl_hy,rec_x,rec_y,disc_x_loss,"
                  "disc_y_loss\n",
                  0) == 0);
  // Exactly 9 columns per row.
  std::size_t commas = 0;
  std::size_t first_row_begin = csv.find('\n') + 1;
  std::size_t first_row_end = csv.find('\n', first_row_begin);
  for (std::size_t i = first_row_begin; i < first_row_end; ++i) {
    if (csv[i] == ',') ++commas;
  }
  CHECK(commas == 8);

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mvlatent_train_test";
  fs::create_directories(dir);
  fs::path path = dir / "history.csv";
  write_history_csv(path, history);
  auto loaded = read_history_csv(path);
  REQUIRE(loaded.size() == history.size());
  for (std::size_t i = 0; i < history.size(); ++i) {
    CHECK(loaded[i].epoch == history[i].epoch);
    CHECK(loaded[i].objective == history[i].objective);
    CHECK(loaded[i].kl_z == history[i].kl_z);
    CHECK(loaded[i].kl_hx == history[i].kl_hx);
    CHECK(loaded[i].kl_hy == history[i].kl_hy);
    CHECK(loaded[i].rec_x == history[i].rec_x);
    CHECK(loaded[i].rec_y == history[i].rec_y);
    CHECK(loaded[i].disc_x_loss == history[i].disc_x_loss);
    CHECK(loaded[i].disc_y_loss == history[i].disc_y_loss);
  }

  SUBCASE("bad header") {
    fs::path bad = dir / "bad_header.csv";
    std::ofstream out(bad);
    out << "epoch,objective\n1,2\n";
    out.close();
    CHECK_THROWS_AS(read_history_csv(bad), FormatError);
  }
  SUBCASE("wrong field count") {
    fs::path bad = dir / "bad_fields.csv";
    std::ofstream out(bad);
    out << history_csv({}) << "1,2,3\n";
    out.close();
    CHECK_THROWS_AS(read_history_csv(bad), FormatError);
  }
  SUBCASE("non-numeric row") {
    fs::path bad = dir / "bad_value.csv";
    std::ofstream out(bad);
    out << history_csv({}) << "1,a,b,c,d,e,f,g,h\n";
    out.close();
    CHECK_THROWS_AS(read_history_csv(bad), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_history_csv(dir / "absent.csv"), IoError);
  }
  fs::remove_all(dir);
}
