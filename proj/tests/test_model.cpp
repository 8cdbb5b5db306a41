#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "eapcr/error.hpp"
#include "eapcr/model.hpp"
#include "support/gradcheck.hpp"

using namespace eapcr::model;
using eapcr::autodiff::GraphMode;
using eapcr::autodiff::Shape;
using eapcr::features::EncodedRow;

namespace {

ModelConfig small_config(std::size_t n, std::size_t d, std::size_t card = 3) {
  ModelConfig c;
  c.cardinalities.assign(n, card);
  c.embed_size = d;
  return c;
}

Tensor matrix_from(std::size_t n, const std::function<double(std::size_t, std::size_t)>& f) {
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = f(i, j);
  return Tensor(Shape{n, n}, std::move(v));
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t.at({i, j});
  return m;
}

// Every parameter tensor set to zero except those named by `keep`.
EapcrParams zero_except(const EapcrParams& p, const std::function<bool(const std::string&)>& keep) {
  const auto names = p.names();
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!keep(names[i])) ts[i] = Tensor::zeros(ts[i].shape(), true);
  }
  return p.with_tensors(ts);
}

}  // namespace

TEST_CASE("permutation worked examples") {
  CHECK(build_permutation(9).sequence == std::vector<std::size_t>{1, 4, 7, 2, 5, 8, 3, 6, 9});
  const auto p7 = build_permutation(7);
  CHECK(p7.rows == 3);
  CHECK(p7.cols == 3);
  CHECK(p7.sequence == std::vector<std::size_t>{1, 4, 7, 2, 5, 3, 6});
  const auto p2 = build_permutation(2);
  CHECK(p2.rows == 1);
  CHECK(p2.cols == 2);
  CHECK(p2.sequence == std::vector<std::size_t>{1, 2});
  CHECK(p2.degenerate());
  CHECK_FALSE(build_permutation(9).degenerate());
  CHECK_THROWS_AS(build_permutation(1), eapcr::ConfigError);
  CHECK_THROWS_AS(permutation_from_sequence({1, 1, 2}), eapcr::ConfigError);
}

TEST_CASE("property: permutation matrices are orthogonal and spread neighbours") {
  for (std::size_t n = 2; n <= 64; ++n) {
    const auto p = build_permutation(n);
    CAPTURE(n);
    std::vector<std::size_t> sorted = p.sequence;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) REQUIRE(sorted[i] == i + 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        int dot = 0;
        for (std::size_t k = 0; k < n; ++k) dot += p.matrix[i][k] * p.matrix[j][k];
        REQUIRE(dot == (i == j ? 1 : 0));
      }
    }
    // each step either walks down a grid column (stride = row width) or
    // starts the next column at the top row
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const bool down = p.sequence[i + 1] == p.sequence[i] + p.cols;
      const bool new_column = p.sequence[i + 1] <= p.cols;
      CHECK((down || new_column));
    }
  }
  const auto s9 = build_permutation(9).sequence;
  std::size_t min_gap = 100;
  for (std::size_t i = 0; i + 1 < s9.size(); ++i) {
    min_gap = std::min<std::size_t>(min_gap, s9[i] > s9[i + 1] ? s9[i] - s9[i + 1] : s9[i + 1] - s9[i]);
  }
  CHECK(min_gap == 3);
}

TEST_CASE("embedding lookup") {
  const ModelConfig c = small_config(3, 1, 4);
  CHECK(c.offsets() == std::vector<std::size_t>{0, 4, 8});
  EapcrParams p = init_params(c, 0);
  std::vector<double> ramp(c.vocab_size());
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  auto ts = p.tensors();
  ts[0] = Tensor(Shape{c.vocab_size(), 1}, ramp, true);
  p = p.with_tensors(ts);

  Graph g;
  const Tensor e = embed(g, EncodedRow{{2, 0, 3}}, p);
  CHECK(e.shape() == Shape{3, 1});
  CHECK(std::vector<double>(e.data().begin(), e.data().end()) == std::vector<double>{2, 4, 11});

  const EapcrParams q = init_params(small_config(3, 5), 2);
  const Tensor same = embed(g, EncodedRow{{1, 1, 1}}, q);
  CHECK(same.at({0, 0}) != same.at({1, 0}));  // distinct blocks per column
  CHECK_THROWS_AS(embed(g, EncodedRow{{3, 0, 0}}, q), eapcr::LookupError);
  CHECK_THROWS_AS(embed(g, EncodedRow{{0, 0}}, q), eapcr::DimensionError);
}

TEST_CASE("embedding rows for repeated indices are identical") {
  EapcrParams p = init_params(ModelConfig{{1, 1, 1, 1}, 6}, 3);
  auto ts = p.tensors();
  std::vector<double> v(4 * 6);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 6; ++j) v[r * 6 + j] = 0.5 * static_cast<double>(j) - 1.0;
  ts[0] = Tensor(Shape{4, 6}, v, true);
  p = p.with_tensors(ts);
  Graph g;
  const Tensor e = embed(g, EncodedRow{{0, 0, 0, 0}}, p);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t j = 0; j < 6; ++j) CHECK(e.at({r, j}) == e.at({0, j}));
}

TEST_CASE("correlation matrix") {
  Graph g;
  const Tensor id = bilinear_attention(g, Tensor::matrix({{1, 0}, {0, 1}}));
  CHECK(std::vector<double>(id.data().begin(), id.data().end()) == std::vector<double>{1, 0, 0, 1});
  const Tensor a = bilinear_attention(g, Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(std::vector<double>(a.data().begin(), a.data().end()) == std::vector<double>{5, 11, 11, 25});
}

TEST_CASE("property: correlation matrix is symmetric positive semidefinite") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    Graph g(GraphMode::Inference);
    const Tensor a = bilinear_attention(g, oracle::random_tensor(rng, {n, d}, -2, 2, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) REQUIRE(a.at({i, j}) == a.at({j, i}));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(to_eigen(a));
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("permuted matrix") {
  Graph g;
  const auto spec = build_permutation(9);
  const Tensor id = matrix_from(9, [](auto i, auto j) { return i == j ? 1.0 : 0.0; });
  const Tensor pid = permute_matrix(g, id, spec);
  for (std::size_t i = 0; i < 81; ++i) CHECK(pid[i] == id[i]);

  const Tensor a = matrix_from(9, [](auto i, auto j) { return 10.0 * i + j; });
  const Tensor p = permute_matrix(g, a, spec);
  CHECK(p.at({0, 1}) == a.at({0, 3}));

  // explicit triple product with Eigen as the reference
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(9, 9);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) m(i, j) = spec.matrix[i][j];
  const Eigen::MatrixXd ref = m * to_eigen(a) * m.transpose();
  CHECK((to_eigen(p) - ref).cwiseAbs().maxCoeff() == 0.0);

  const auto inv = permutation_from_sequence(spec.inverse_sequence());
  const Tensor back = permute_matrix(g, p, inv);
  for (std::size_t i = 0; i < 81; ++i) CHECK(back[i] == a[i]);

  std::vector<double> before(a.data().begin(), a.data().end()), after(p.data().begin(), p.data().end());
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  CHECK(before == after);

  CHECK_THROWS_AS(permute_matrix(g, Tensor::zeros({3, 3}), spec), eapcr::DimensionError);
}

TEST_CASE("cnn branch shapes and zero cases") {
  const EapcrParams p = init_params(small_config(8, 2), 1);
  CHECK(p.config.branch_features() == 64);
  Graph g;
  CHECK(cnn_branch(g, Tensor::full({8, 8}, 0.3), p.a_branch).shape() == Shape{64});
  CHECK(small_config(5, 2).branch_features() == 16 * 2 * 2);
  CHECK(small_config(2, 2).branch_features() == 16);

  const Tensor zero = cnn_branch(g, Tensor::zeros({8, 8}), p.a_branch);
  for (double v : zero.data()) CHECK(v == 0.0);
}

TEST_CASE("cnn branch gradient at N=5") {
  std::mt19937_64 rng(21);
  const EapcrParams p = init_params(small_config(5, 2), 4);
  const Tensor m = oracle::random_tensor(rng, {5, 5});
  const auto& b = p.a_branch;
  const std::vector<Tensor> xs{m, b.conv1_w, b.conv1_b, b.conv2_w, b.conv2_b};
  const Tensor w = oracle::random_tensor(rng, {64}, -1, 1, false);
  auto f = [&](Graph& g, const std::vector<Tensor>& v) {
    return sum(g, mul(g, cnn_branch(g, v[0], BranchParams{v[1], v[2], v[3], v[4]}), w));
  };
  Graph g;
  g.backward(f(g, xs));
  const auto numeric = oracle::numeric_gradients(
      [&](const std::vector<Tensor>& v) {
        Graph h(GraphMode::Inference);
        return f(h, v).item();
      },
      xs);
  for (std::size_t k = 0; k < xs.size(); ++k) CHECK(oracle::relative_error(g.grad(xs[k]).data(), numeric[k]) <= 1e-4);
}

TEST_CASE("residual mlp") {
  Graph g;
  const std::vector<DenseParams> zeroed{
      {Tensor::zeros({3, 2}, true), Tensor::zeros({2}, true)},
      {Tensor::zeros({2, 1}, true), Tensor::vector({0.75}, true)}};
  CHECK(residual_mlp(g, Tensor::vector({1, 2, 3}), zeroed).item() == 0.75);

  // hidden width 1: relu(2*1 + 1*(-1) + 0.5*4 + 0.5) * 3 - 1 = 9.5
  const std::vector<DenseParams> hand{
      {Tensor({3, 1}, {2, -1, 0.5}, true), Tensor::vector({0.5}, true)},
      {Tensor({1, 1}, {3}, true), Tensor::vector({-1}, true)}};
  CHECK(residual_mlp(g, Tensor::vector({1, 1, 4}), hand).item() == doctest::Approx(9.5).epsilon(1e-15));

  std::mt19937_64 rng(8);
  std::vector<Tensor> xs{oracle::random_tensor(rng, {6}), oracle::random_tensor(rng, {6, 4}),
                         oracle::random_tensor(rng, {4}), oracle::random_tensor(rng, {4, 1}),
                         oracle::random_tensor(rng, {1})};
  auto f = [](Graph& gr, const std::vector<Tensor>& v) {
    const std::vector<DenseParams> layers{{v[1], v[2]}, {v[3], v[4]}};
    return residual_mlp(gr, v[0], layers);
  };
  Graph gb;
  gb.backward(sum(gb, f(gb, xs)));
  const auto numeric = oracle::numeric_gradients(
      [&](const std::vector<Tensor>& v) {
        Graph h(GraphMode::Inference);
        return f(h, v).item();
      },
      xs);
  for (std::size_t k = 0; k < xs.size(); ++k) CHECK(oracle::relative_error(gb.grad(xs[k]).data(), numeric[k]) <= 1e-4);
}

TEST_CASE("forward decomposes into head plus residual mlp") {
  const EapcrParams p = init_params(small_config(6, 4), 5);
  const auto spec = build_permutation(6);
  const EncodedRow x{{0, 1, 2, 1, 0, 2}};
  const EapcrParams no_cnn = zero_except(p, [](const std::string& n) {
    return n == "embedding" || n.rfind("mlp.", 0) == 0;
  });
  Graph g(GraphMode::Inference);
  const ForwardTrace t = forward(g, x, no_cnn, spec);
  CHECK(t.head_out.item() == 0.0);
  CHECK(t.prediction.item() == t.mlp_out.item());
  CHECK(t.A.shape() == Shape{6, 6});
  CHECK(t.z.shape() == Shape{24});
  CHECK(t.a_features.shape() == Shape{p.config.branch_features()});

  const ForwardTrace full = forward(g, x, p, spec);
  CHECK(full.prediction.item() == full.head_out.item() + full.mlp_out.item());
  CHECK_THROWS_AS(forward(g, x, p, build_permutation(5)), eapcr::ConfigError);
}

TEST_CASE("end-to-end gradient check N=5 d=4") {
  const std::vector<EncodedRow> rows{{{0, 1, 2, 1, 0}}, {{2, 2, 1, 0, 1}}};
  std::uint64_t seed = 17;
  EapcrParams p = init_params(small_config(5, 4), seed);
  while (oracle::kink_margin(p, rows) < 1e-4) {
    REQUIRE(seed < 17 + 200);
    p = init_params(small_config(5, 4), ++seed);
  }
  for (const auto& e : oracle::model_gradient_errors(p, rows, {0.7, -1.2})) {
    CAPTURE(e.name);
    CHECK(e.relative_error <= 1e-4);
  }
}

TEST_CASE("initialisation") {
  const ModelConfig c = small_config(4, 8, 5);
  const EapcrParams a = init_params(c, 42), b = init_params(c, 42), other = init_params(c, 43);
  const auto ta = a.tensors(), tb = b.tensors(), to = other.tensors();
  bool any_diff = false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(std::equal(ta[i].data().begin(), ta[i].data().end(), tb[i].data().begin()));
    any_diff = any_diff || !std::equal(ta[i].data().begin(), ta[i].data().end(), to[i].data().begin());
    CHECK(ta[i].requires_grad());
  }
  CHECK(any_diff);

  const double emb_bound = std::sqrt(6.0 / (20.0 + 8.0));
  for (double v : a.embedding.data()) CHECK(std::fabs(v) <= emb_bound);
  const double c1 = std::sqrt(6.0 / (9.0 + 72.0));
  for (double v : a.a_branch.conv1_w.data()) CHECK(std::fabs(v) <= c1);
  for (double v : a.a_branch.conv1_b.data()) CHECK(v == 0.0);
  CHECK(a.names().size() == ta.size());
  CHECK(a.mlp.size() == 2);
  CHECK(a.mlp[0].weight.shape() == Shape{32, 64});

  ModelConfig bad = c;
  bad.cardinalities = {3};
  CHECK_THROWS_AS(init_params(bad, 0), eapcr::ConfigError);
}

TEST_CASE("forward is pure") {
  const EapcrParams p = init_params(small_config(7, 3), 9);
  const auto spec = build_permutation(7);
  const EncodedRow x{{2, 1, 0, 2, 1, 1, 0}};
  Graph g1(GraphMode::Inference), g2(GraphMode::Inference);
  const ForwardTrace a = forward(g1, x, p, spec), b = forward(g2, x, p, spec);
  for (const auto& [l, r] : {std::pair{a.A, b.A}, {a.P, b.P}, {a.prediction, b.prediction}}) {
    CHECK(std::equal(l.data().begin(), l.data().end(), r.data().begin()));
  }
  CHECK(predict({x, x}, p, spec) == std::vector<double>{a.prediction.item(), a.prediction.item()});
}
