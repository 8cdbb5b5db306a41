#pragma once

// The EAPCR regressor.
//
//   E = Embedding(x)                       [N, d]
//   A = E E^T                              [N, N]  feature correlation
//   P = M A M^T                            [N, N]  permuted correlation
//   head = FC(concat(cnn_a(A), cnn_p(P)))          two unshared CNN branches
//   pred = head + mlp(flatten(E))                  residual MLP
//
// Each CNN branch is conv3x3(1->c1) relu maxpool2 conv3x3(c1->c2) relu
// maxpool2 flatten.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eapcr/features.hpp"
#include "eapcr/permutation.hpp"
#include "eapcr/tensor.hpp"

namespace eapcr::model {

using autodiff::Graph;
using autodiff::Tensor;

struct ModelConfig {
  std::vector<std::size_t> cardinalities;  // embedding slots per feature column
  std::size_t embed_size = 128;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::vector<std::size_t> mlp_hidden{64};
  std::size_t output_dim = 1;

  std::size_t n() const { return cardinalities.size(); }
  std::size_t vocab_size() const;
  // Start row of each column's block in the shared embedding table.
  std::vector<std::size_t> offsets() const;
  // Length of one branch's flattened feature vector.
  std::size_t branch_features() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct BranchParams {
  Tensor conv1_w, conv1_b, conv2_w, conv2_b;
};

struct DenseParams {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct EapcrParams {
  ModelConfig config;
  Tensor embedding;  // [V, d]
  BranchParams a_branch;
  BranchParams p_branch;
  DenseParams head;
  std::vector<DenseParams> mlp;  // hidden layers then the output layer

  // Stable ordering shared by names(), tensors() and with_tensors().
  std::vector<std::string> names() const;
  std::vector<Tensor> tensors() const;
  EapcrParams with_tensors(std::span<const Tensor> values) const;
  std::size_t parameter_count() const;
};

struct ForwardTrace {
  Tensor E, A, P, z;
  Tensor a_features, p_features;
  Tensor head_out, mlp_out;
  Tensor prediction;  // [output_dim]
};

// Glorot-uniform weights, zero biases.
EapcrParams init_params(const ModelConfig& config, std::uint64_t seed);

Tensor embed(Graph& g, const features::EncodedRow& x, const EapcrParams& params);
Tensor bilinear_attention(Graph& g, const Tensor& E);
Tensor permute_matrix(Graph& g, const Tensor& A, const PermutationSpec& spec);
Tensor cnn_branch(Graph& g, const Tensor& m, const BranchParams& branch);
Tensor dense(Graph& g, const Tensor& x, const DenseParams& layer);
Tensor residual_mlp(Graph& g, const Tensor& z, std::span<const DenseParams> layers);

ForwardTrace forward(Graph& g, const features::EncodedRow& x, const EapcrParams& params, const PermutationSpec& spec);

// Inference without recording; one prediction per row (first output).
std::vector<double> predict(const std::vector<features::EncodedRow>& rows, const EapcrParams& params,
                            const PermutationSpec& spec);

}  // namespace eapcr::model
