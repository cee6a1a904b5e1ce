#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cstalign/matrix.hpp"
#include "cstalign/vocab.hpp"

namespace cstalign {

enum class Activation { tanh, identity };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view text);

struct EncoderConfig {
  std::size_t feature_dim = 16;
  std::vector<std::size_t> image_hidden = {128};
  std::size_t vocab_size = 4096;
  std::size_t text_embed_dim = 64;
  std::vector<std::size_t> text_hidden = {128};
  std::size_t embed_dim = 64;
  Activation activation = Activation::tanh;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out

  bool operator==(const DenseLayer&) const = default;
};

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

struct ConstNamedTensor {
  std::string name;
  const Matrix* tensor;
};

/// Weights of both towers. The image tower maps features through dense tanh
/// layers and a bias-free projection to `embed_dim`; the text tower mean-pools
/// token embeddings and then does the same. Also used as the gradient container.
struct EncoderParams {
  std::vector<DenseLayer> image_layers;
  Matrix image_projection;  // d x last image width
  Matrix text_embedding;    // vocab_size x text_embed_dim
  std::vector<DenseLayer> text_layers;
  Matrix text_projection;   // d x last text width
  Activation activation = Activation::tanh;

  std::size_t embed_dim() const { return image_projection.rows(); }
  std::size_t feature_dim() const;
  std::size_t vocab_size() const { return text_embedding.rows(); }

  // Every trainable tensor, in checkpoint order.
  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;
  std::size_t parameter_count() const;

  EncoderParams zeros_like() const;
  bool all_finite() const;

  bool operator==(const EncoderParams&) const = default;
};

/// Scaled-Gaussian init (std 1/sqrt(fan_in); std 1 for the token table), zero
/// biases. Deterministic per seed.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Activations retained between a forward call and its backward call.
struct ActivationCache {
  Matrix input;                              // features, or pooled token means
  std::vector<std::vector<int>> token_rows;  // text only: non-padding ids per row
  std::vector<Matrix> pre;                   // per hidden layer
  std::vector<Matrix> post;
  Matrix projected;                          // before l2 normalization
  std::vector<double> norms;
  Matrix output;                             // l2-normalized rows
};

struct Encoded {
  Matrix embeddings;
  ActivationCache cache;
};

Encoded forward_image(const EncoderParams& params, const Matrix& features);
Encoded forward_text(const EncoderParams& params, std::span<const TokenSequence> tokens);

/// Exact gradients of a scalar loss w.r.t. every parameter, given the
/// upstream gradients for the image and text embeddings.
EncoderParams backward(const EncoderParams& params, const ActivationCache& image_cache,
                       const ActivationCache& text_cache, const Matrix& d_image,
                       const Matrix& d_text);

// Single-tower pieces of backward(); each accumulates into `grads`.
void backward_image(const EncoderParams& params, const ActivationCache& cache,
                    const Matrix& d_embeddings, EncoderParams& grads);
void backward_text(const EncoderParams& params, const ActivationCache& cache,
                   const Matrix& d_embeddings, EncoderParams& grads);

// Row-wise l2 normalization; throws NormalizationDegenerate on a zero row.
Matrix normalize_rows(const Matrix& m, std::vector<double>* norms = nullptr);

}  // namespace cstalign
