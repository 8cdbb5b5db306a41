#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "eapcr/error.hpp"
#include "eapcr/features.hpp"
#include "eapcr/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace eapcr::train;
using eapcr::autodiff::GraphMode;
using eapcr::autodiff::Shape;
using eapcr::features::EncodedRow;

namespace {

struct Encoded {
  std::vector<EncodedRow> x;
  std::vector<double> y;
  eapcr::model::ModelConfig config;
};

Encoded encode(const eapcr::eval::Dataset& d, std::size_t embed = 4) {
  const auto p = eapcr::features::fit_pipeline(d.rows, d.schema);
  Encoded e;
  e.x = eapcr::features::transform_rows(d.rows, p);
  for (const auto& r : d.rows) e.y.push_back(r.targets[0]);
  e.config.cardinalities = p.cardinalities();
  e.config.embed_size = embed;
  e.config.mlp_hidden = {8};
  return e;
}

}  // namespace

TEST_CASE("mse loss examples") {
  Graph g;
  const Tensor t = Tensor::vector({0, 0});
  CHECK(mse_loss(g, Tensor::vector({1, 2}, true), t).item() == 2.5);
  CHECK(mse_loss(g, Tensor::vector({3, -1}, true), Tensor::vector({3, -1})).item() == 0.0);
  CHECK_THROWS_AS(mse_loss(g, Tensor::vector({1, 2, 3}), t), eapcr::DimensionError);
}

TEST_CASE("adam step examples") {
  const std::vector<Tensor> p{Tensor::scalar(1.0, true)};
  const AdamState s0 = AdamState::zeros_like(p);

  const AdamResult one = adam_step(p, std::vector<Tensor>{Tensor::scalar(1.0)}, s0, 0.1);
  CHECK(one.state.step == 1);
  CHECK(one.params[0].item() == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));

  AdamState warm = s0;
  warm.m[0] = {0.4};
  warm.v[0] = {0.09};
  warm.step = 3;
  const AdamResult zero = adam_step(p, std::vector<Tensor>{Tensor::scalar(0.0)}, warm, 0.1);
  CHECK(zero.state.m[0][0] == doctest::Approx(0.36));
  CHECK(zero.state.v[0][0] == doctest::Approx(0.09 * 0.999));
  CHECK(std::fabs(zero.state.m[0][0]) < std::fabs(warm.m[0][0]));

  const AdamResult still = adam_step(p, std::vector<Tensor>{Tensor::scalar(0.0)}, s0, 0.1);
  CHECK(still.params[0].item() == 1.0);

  const std::vector<std::string> names{"embedding"};
  const std::vector<Tensor> nan_grad{Tensor::scalar(std::numeric_limits<double>::quiet_NaN())};
  try {
    adam_step(p, nan_grad, s0, 0.1, names);
    FAIL("expected a numeric error");
  } catch (const eapcr::NumericError& e) {
    CHECK(std::string(e.what()).find("embedding") != std::string::npos);
  }

  const AdamResult again = adam_step(p, std::vector<Tensor>{Tensor::scalar(1.0)}, s0, 0.1);
  CHECK(again.params[0].item() == one.params[0].item());
}

TEST_CASE("property: adam update magnitude is bounded by the learning rate") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::vector<Tensor> p{oracle::random_tensor(rng, {5, 3})};
    const std::vector<Tensor> g{oracle::random_tensor(rng, {5, 3}, -100, 100, false)};
    const double lr = std::pow(10.0, -std::uniform_real_distribution<double>(3, 9)(rng));
    const AdamResult r = adam_step(p, g, AdamState::zeros_like(p), lr);
    for (std::size_t i = 0; i < p[0].numel(); ++i) CHECK(std::fabs(r.params[0][i] - p[0][i]) <= lr * (1.0 + 1e-6));
  }
}

TEST_CASE("target scaler") {
  const std::vector<double> y{1.0, 2.0, 4.0, 9.0};
  const TargetScaler s = TargetScaler::fit(y);
  CHECK(s.mean == doctest::Approx(4.0));
  const auto back = s.inverse(s.transform(y));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::fabs(back[i] - y[i]) <= 1e-12);
  CHECK(TargetScaler::fit(std::vector<double>{3.0, 3.0}).stddev == 1.0);
  CHECK_THROWS_AS(TargetScaler::fit(std::vector<double>{}), eapcr::FitError);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(50, 20);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(30);
    for (auto& x : v) x = n(rng);
    const TargetScaler f = TargetScaler::fit(v);
    for (double x : v) CHECK(std::fabs(f.inverse(f.transform(x)) - x) <= 1e-12);
  }
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), eapcr::ConfigError);
  c = TrainConfig{};
  c.validation_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), eapcr::ConfigError);
  c.early_stopping = false;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("one small step descends on a fixed batch") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Encoded e = encode(synthetic::mixed_dataset(16, seed));
    const auto params = eapcr::model::init_params(e.config, seed);
    const auto spec = eapcr::model::build_permutation(e.config.n());
    TrainConfig c;
    c.learning_rate = 1e-4;
    c.max_epochs = 1;
    c.batch_size = 16;
    c.early_stopping = false;
    c.scale_targets = false;
    c.seed = seed;
    const TrainResult r = train_from(params, e.x, e.y, c);
    CAPTURE(seed);
    CHECK(oracle::batch_mse(r.params, e.x, e.y, spec) < oracle::batch_mse(params, e.x, e.y, spec));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Encoded e = encode(synthetic::mixed_dataset(40, 2));
  TrainConfig c;
  c.max_epochs = 15;
  c.seed = 3;
  const TrainResult a = train(e.x, e.y, e.config, c);
  const TrainResult b = train(e.x, e.y, e.config, c);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].train_mse == b.curve[i].train_mse);
    CHECK(a.curve[i].val_mse == b.curve[i].val_mse);
  }
  const auto ta = a.params.tensors(), tb = b.params.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(std::equal(ta[i].data().begin(), ta[i].data().end(), tb[i].data().begin()));
  CHECK(a.scaler == b.scaler);
}

TEST_CASE("early stopping halts on a plateau and keeps the best epoch") {
  // pure-noise targets: validation error cannot keep improving
  auto d = synthetic::xor_dataset(60, 3, 5, 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  for (auto& r : d.rows) r.targets[0] = n(rng);
  const Encoded e = encode(d);
  TrainConfig c;
  c.patience = 5;
  c.max_epochs = 400;
  c.learning_rate = 1e-2;
  const TrainResult r = train(e.x, e.y, e.config, c);
  CHECK(r.stopped_early);
  CHECK(r.curve.size() < c.max_epochs);
  CHECK(r.curve.size() == r.best_epoch + c.patience);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : r.curve) best = std::min(best, *rec.val_mse);
  CHECK(*r.curve[r.best_epoch - 1].val_mse == best);
}

TEST_CASE("non-finite loss aborts and retains the last good parameters") {
  const Encoded e = encode(synthetic::mixed_dataset(20, 4));
  std::vector<double> huge = e.y;
  for (auto& y : huge) y *= 1e200;
  TrainConfig c;
  c.scale_targets = false;
  c.early_stopping = false;
  c.max_epochs = 3;
  const TrainResult r = train(e.x, huge, e.config, c);
  REQUIRE(r.aborted.has_value());
  CHECK(r.curve.empty());
  for (const auto& t : r.params.tensors()) CHECK(t.all_finite());
}

TEST_CASE("predictions come back on the target scale") {
  const Encoded e = encode(synthetic::mixed_dataset(30, 6));
  const auto params = eapcr::model::init_params(e.config, 0);
  const TargetScaler s{10.0, 4.0};
  const auto spec = eapcr::model::build_permutation(e.config.n());
  const auto raw = eapcr::model::predict(e.x, params, spec);
  const auto out = predict_targets(e.x, params, s);
  for (std::size_t i = 0; i < raw.size(); ++i) CHECK(out[i] == raw[i] * 4.0 + 10.0);
}
