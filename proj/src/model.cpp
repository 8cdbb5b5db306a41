#include "eapcr/model.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "eapcr/error.hpp"

namespace eapcr::model {

namespace ad = eapcr::autodiff;
using ad::Shape;

std::size_t ModelConfig::vocab_size() const {
  return std::accumulate(cardinalities.begin(), cardinalities.end(), std::size_t{0});
}

std::vector<std::size_t> ModelConfig::offsets() const {
  std::vector<std::size_t> out(cardinalities.size(), 0);
  for (std::size_t i = 1; i < cardinalities.size(); ++i) out[i] = out[i - 1] + cardinalities[i - 1];
  return out;
}

std::size_t ModelConfig::branch_features() const {
  const std::size_t after_two_pools = ((n() + 1) / 2 + 1) / 2;
  return conv2_channels * after_two_pools * after_two_pools;
}

void ModelConfig::validate() const {
  if (n() < 2) throw ConfigError("model needs N >= 2 feature columns, got " + std::to_string(n()));
  if (embed_size < 1) throw ConfigError("embed_size must be >= 1");
  if (conv1_channels < 1 || conv2_channels < 1) throw ConfigError("conv channels must be >= 1");
  if (output_dim < 1) throw ConfigError("output_dim must be >= 1");
  for (std::size_t c : cardinalities)
    if (c < 1) throw ConfigError("every column needs at least one embedding slot");
  for (std::size_t h : mlp_hidden)
    if (h < 1) throw ConfigError("mlp hidden widths must be >= 1");
}

// ---------------------------------------------------------------------------

std::vector<std::string> EapcrParams::names() const {
  std::vector<std::string> out{"embedding"};
  for (const char* b : {"a_branch", "p_branch"}) {
    for (const char* t : {"conv1_w", "conv1_b", "conv2_w", "conv2_b"}) out.push_back(std::string(b) + "." + t);
  }
  out.emplace_back("head.weight");
  out.emplace_back("head.bias");
  for (std::size_t i = 0; i < mlp.size(); ++i) {
    out.push_back("mlp." + std::to_string(i) + ".weight");
    out.push_back("mlp." + std::to_string(i) + ".bias");
  }
  return out;
}

std::vector<Tensor> EapcrParams::tensors() const {
  std::vector<Tensor> out{embedding};
  for (const BranchParams* b : {&a_branch, &p_branch}) {
    out.insert(out.end(), {b->conv1_w, b->conv1_b, b->conv2_w, b->conv2_b});
  }
  out.push_back(head.weight);
  out.push_back(head.bias);
  for (const auto& layer : mlp) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

EapcrParams EapcrParams::with_tensors(std::span<const Tensor> values) const {
  const std::vector<Tensor> current = tensors();
  if (values.size() != current.size()) {
    throw DimensionError("expected " + std::to_string(current.size()) + " parameter tensors, got " +
                         std::to_string(values.size()));
  }
  const std::vector<std::string> labels = names();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != current[i].shape()) {
      throw DimensionError(labels[i] + ": shape " + ad::shape_str(values[i].shape()) + " does not match " +
                           ad::shape_str(current[i].shape()));
    }
  }
  EapcrParams out = *this;
  std::size_t k = 0;
  out.embedding = values[k++];
  for (BranchParams* b : {&out.a_branch, &out.p_branch}) {
    b->conv1_w = values[k++];
    b->conv1_b = values[k++];
    b->conv2_w = values[k++];
    b->conv2_b = values[k++];
  }
  out.head.weight = values[k++];
  out.head.bias = values[k++];
  for (auto& layer : out.mlp) {
    layer.weight = values[k++];
    layer.bias = values[k++];
  }
  return out;
}

std::size_t EapcrParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.numel();
  return n;
}

// ---------------------------------------------------------------------------

namespace {

Tensor glorot(std::mt19937_64& rng, Shape shape, std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(ad::numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), true);
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros(Shape{n}, true); }

BranchParams init_branch(std::mt19937_64& rng, const ModelConfig& c) {
  BranchParams b;
  b.conv1_w = glorot(rng, Shape{c.conv1_channels, 1, 3, 3}, 9, c.conv1_channels * 9);
  b.conv1_b = zero_bias(c.conv1_channels);
  b.conv2_w = glorot(rng, Shape{c.conv2_channels, c.conv1_channels, 3, 3}, c.conv1_channels * 9,
                     c.conv2_channels * 9);
  b.conv2_b = zero_bias(c.conv2_channels);
  return b;
}

DenseParams init_dense(std::mt19937_64& rng, std::size_t in, std::size_t out) {
  return DenseParams{glorot(rng, Shape{in, out}, in, out), zero_bias(out)};
}

}  // namespace

EapcrParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  EapcrParams p;
  p.config = config;
  p.embedding = glorot(rng, Shape{config.vocab_size(), config.embed_size}, config.vocab_size(), config.embed_size);
  p.a_branch = init_branch(rng, config);
  p.p_branch = init_branch(rng, config);
  p.head = init_dense(rng, 2 * config.branch_features(), config.output_dim);
  std::size_t width = config.n() * config.embed_size;
  for (std::size_t h : config.mlp_hidden) {
    p.mlp.push_back(init_dense(rng, width, h));
    width = h;
  }
  p.mlp.push_back(init_dense(rng, width, config.output_dim));
  return p;
}

// ---------------------------------------------------------------------------

Tensor embed(Graph& g, const features::EncodedRow& x, const EapcrParams& params) {
  const ModelConfig& c = params.config;
  if (x.indices.size() != c.n()) {
    throw DimensionError("encoded row has " + std::to_string(x.indices.size()) + " indices, model expects " +
                         std::to_string(c.n()));
  }
  const std::vector<std::size_t> offsets = c.offsets();
  std::vector<std::size_t> rows(c.n());
  for (std::size_t i = 0; i < c.n(); ++i) {
    if (x.indices[i] >= c.cardinalities[i]) {
      throw LookupError("column " + std::to_string(i) + ": index " + std::to_string(x.indices[i]) +
                        " out of range for " + std::to_string(c.cardinalities[i]) + " slots");
    }
    rows[i] = offsets[i] + x.indices[i];
  }
  return ad::gather_rows(g, params.embedding, rows);
}

Tensor bilinear_attention(Graph& g, const Tensor& E) { return ad::matmul(g, E, ad::transpose(g, E)); }

Tensor permute_matrix(Graph& g, const Tensor& A, const PermutationSpec& spec) {
  const std::size_t n = spec.n;
  if (A.rank() != 2 || A.dim(0) != n || A.dim(1) != n) {
    throw DimensionError("permute_matrix: expected [" + std::to_string(n) + "," + std::to_string(n) + "], got " +
                         ad::shape_str(A.shape()));
  }
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] = spec.matrix[i][j];
  const Tensor M(Shape{n, n}, std::move(m));
  return ad::matmul(g, ad::matmul(g, M, A), ad::transpose(g, M));
}

Tensor cnn_branch(Graph& g, const Tensor& m, const BranchParams& branch) {
  if (m.rank() != 2) throw DimensionError("cnn_branch expects a matrix, got " + ad::shape_str(m.shape()));
  Tensor x = ad::reshape(g, m, Shape{1, m.dim(0), m.dim(1)});
  x = ad::maxpool2(g, ad::relu(g, ad::conv2d(g, x, branch.conv1_w, branch.conv1_b)));
  x = ad::maxpool2(g, ad::relu(g, ad::conv2d(g, x, branch.conv2_w, branch.conv2_b)));
  return ad::flatten(g, x);
}

Tensor dense(Graph& g, const Tensor& x, const DenseParams& layer) {
  const std::size_t in = layer.weight.dim(0), out = layer.weight.dim(1);
  Tensor row = ad::reshape(g, x, Shape{1, in});
  Tensor y = ad::add(g, ad::matmul(g, row, layer.weight), ad::reshape(g, layer.bias, Shape{1, out}));
  return ad::reshape(g, y, Shape{out});
}

Tensor residual_mlp(Graph& g, const Tensor& z, std::span<const DenseParams> layers) {
  if (layers.empty()) throw ConfigError("residual MLP needs at least an output layer");
  Tensor h = z;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) h = ad::relu(g, dense(g, h, layers[i]));
  return dense(g, h, layers.back());
}

ForwardTrace forward(Graph& g, const features::EncodedRow& x, const EapcrParams& params, const PermutationSpec& spec) {
  if (spec.n != params.config.n()) {
    throw ConfigError("permutation built for N=" + std::to_string(spec.n) + ", model has N=" +
                      std::to_string(params.config.n()));
  }
  ForwardTrace t;
  t.E = embed(g, x, params);
  t.A = bilinear_attention(g, t.E);
  t.P = permute_matrix(g, t.A, spec);
  t.z = ad::flatten(g, t.E);
  t.a_features = cnn_branch(g, t.A, params.a_branch);
  t.p_features = cnn_branch(g, t.P, params.p_branch);
  t.head_out = dense(g, ad::concat(g, {t.a_features, t.p_features}, 0), params.head);
  t.mlp_out = residual_mlp(g, t.z, params.mlp);
  t.prediction = ad::add(g, t.head_out, t.mlp_out);
  return t;
}

std::vector<double> predict(const std::vector<features::EncodedRow>& rows, const EapcrParams& params,
                            const PermutationSpec& spec) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    Graph g(autodiff::GraphMode::Inference);
    out.push_back(forward(g, row, params, spec).prediction[0]);
  }
  return out;
}

}  // namespace eapcr::model
