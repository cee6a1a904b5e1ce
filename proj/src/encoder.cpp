#include "cstalign/encoder.hpp"

#include <cmath>

#include "cstalign/error.hpp"
#include "cstalign/rng.hpp"

namespace cstalign {

std::string_view to_string(Activation activation) {
  return activation == Activation::tanh ? "tanh" : "identity";
}

Activation parse_activation(std::string_view text) {
  if (text == "tanh") return Activation::tanh;
  if (text == "identity") return Activation::identity;
  throw Error(ErrorKind::ConfigError, "encoder-core/parse_activation",
              "activation must be tanh or identity, got '" + std::string(text) + "'");
}

std::size_t EncoderParams::feature_dim() const {
  return image_layers.empty() ? image_projection.cols() : image_layers.front().weight.cols();
}

std::vector<NamedTensor> EncoderParams::tensors() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < image_layers.size(); ++i) {
    out.push_back({"image.layer" + std::to_string(i) + ".weight", &image_layers[i].weight});
    out.push_back({"image.layer" + std::to_string(i) + ".bias", &image_layers[i].bias});
  }
  out.push_back({"image.projection", &image_projection});
  out.push_back({"text.embedding", &text_embedding});
  for (std::size_t i = 0; i < text_layers.size(); ++i) {
    out.push_back({"text.layer" + std::to_string(i) + ".weight", &text_layers[i].weight});
    out.push_back({"text.layer" + std::to_string(i) + ".bias", &text_layers[i].bias});
  }
  out.push_back({"text.projection", &text_projection});
  return out;
}

std::vector<ConstNamedTensor> EncoderParams::tensors() const {
  std::vector<ConstNamedTensor> out;
  for (auto& t : const_cast<EncoderParams*>(this)->tensors()) out.push_back({t.name, t.tensor});
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor->size();
  return n;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  for (auto& t : z.tensors()) t.tensor->fill(0.0);
  return z;
}

bool EncoderParams::all_finite() const {
  for (const auto& t : tensors())
    if (!t.tensor->all_finite()) return false;
  return true;
}

namespace {

Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (auto& x : m.values()) x = stddev * rng.normal();
  return m;
}

std::vector<DenseLayer> make_tower(Rng& rng, std::size_t in, const std::vector<std::size_t>& widths,
                                   std::size_t& last) {
  std::vector<DenseLayer> layers;
  last = in;
  for (std::size_t w : widths) {
    layers.push_back({gaussian(rng, w, last, 1.0 / std::sqrt(static_cast<double>(last))),
                      Matrix(1, w)});
    last = w;
  }
  return layers;
}

}  // namespace

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  constexpr const char* kOp = "encoder-core/init_params";
  auto positive = [&](std::size_t v, const char* what) {
    if (v == 0) throw Error(ErrorKind::InvalidConfig, kOp, std::string(what) + " must be >= 1");
  };
  positive(config.feature_dim, "feature_dim");
  positive(config.text_embed_dim, "text_embed_dim");
  positive(config.embed_dim, "embed_dim");
  if (config.vocab_size < 2) throw Error(ErrorKind::InvalidConfig, kOp, "vocab_size must be >= 2");
  for (auto w : config.image_hidden) positive(w, "image layer width");
  for (auto w : config.text_hidden) positive(w, "text layer width");

  Rng image_rng(derive_seed(seed, 1));
  Rng text_rng(derive_seed(seed, 2));
  EncoderParams p;
  p.activation = config.activation;
  std::size_t last = 0;
  p.image_layers = make_tower(image_rng, config.feature_dim, config.image_hidden, last);
  p.image_projection =
      gaussian(image_rng, config.embed_dim, last, 1.0 / std::sqrt(static_cast<double>(last)));
  p.text_embedding = gaussian(text_rng, config.vocab_size, config.text_embed_dim, 1.0);
  p.text_layers = make_tower(text_rng, config.text_embed_dim, config.text_hidden, last);
  p.text_projection =
      gaussian(text_rng, config.embed_dim, last, 1.0 / std::sqrt(static_cast<double>(last)));
  return p;
}

Matrix normalize_rows(const Matrix& m, std::vector<double>* norms) {
  Matrix out = m;
  if (norms) norms->assign(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double norm = std::sqrt(dot(m.row(r), m.row(r)));
    if (!(norm > 1e-12))
      throw Error(ErrorKind::NormalizationDegenerate, "encoder-core/normalize",
                  "row " + std::to_string(r) + " has zero norm");
    scale(1.0 / norm, out.row(r));
    if (norms) (*norms)[r] = norm;
  }
  return out;
}

namespace {

// Dense layers + projection + normalization, shared by both towers.
void run_tower(const std::vector<DenseLayer>& layers, const Matrix& projection,
               Activation activation, ActivationCache& cache) {
  const Matrix* h = &cache.input;
  for (const auto& layer : layers) {
    if (h->cols() != layer.weight.cols())
      throw Error(ErrorKind::ShapeError, "encoder-core/forward", "input width mismatch");
    Matrix a = matmul_nt(*h, layer.weight);
    for (std::size_t r = 0; r < a.rows(); ++r) axpy(1.0, layer.bias.row(0), a.row(r));
    Matrix out = a;
    if (activation == Activation::tanh)
      for (auto& x : out.values()) x = std::tanh(x);
    cache.pre.push_back(std::move(a));
    cache.post.push_back(std::move(out));
    h = &cache.post.back();
  }
  if (h->cols() != projection.cols())
    throw Error(ErrorKind::ShapeError, "encoder-core/forward", "projection width mismatch");
  cache.projected = matmul_nt(*h, projection);
  cache.output = normalize_rows(cache.projected, &cache.norms);
}

void tower_backward(const std::vector<DenseLayer>& layers, const Matrix& projection,
                    Activation activation, const ActivationCache& cache, const Matrix& d_out,
                    std::vector<DenseLayer>& layer_grads, Matrix& projection_grad, Matrix* d_input) {
  if (!same_shape(d_out, cache.output))
    throw Error(ErrorKind::ShapeError, "encoder-core/backward",
                "upstream gradient shape does not match the cached embeddings");
  // d projected = (g - e (e.g)) / ||p||, row-wise.
  Matrix d_proj(d_out.rows(), d_out.cols());
  for (std::size_t r = 0; r < d_out.rows(); ++r) {
    const auto e = cache.output.row(r);
    const auto g = d_out.row(r);
    const double eg = dot(e, g);
    auto dst = d_proj.row(r);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (g[j] - e[j] * eg) / cache.norms[r];
  }
  const Matrix& last_h = layers.empty() ? cache.input : cache.post.back();
  Matrix pg = matmul_tn(d_proj, last_h);
  axpy(1.0, pg.values(), projection_grad.values());
  Matrix dh = matmul_nn(d_proj, projection);

  for (std::size_t li = layers.size(); li-- > 0;) {
    Matrix da = std::move(dh);
    if (activation == Activation::tanh) {
      const auto& post = cache.post[li];
      for (std::size_t i = 0; i < da.size(); ++i) {
        const double t = post.data()[i];
        da.data()[i] *= 1.0 - t * t;
      }
    }
    const Matrix& h_prev = li == 0 ? cache.input : cache.post[li - 1];
    Matrix wg = matmul_tn(da, h_prev);
    axpy(1.0, wg.values(), layer_grads[li].weight.values());
    for (std::size_t r = 0; r < da.rows(); ++r) axpy(1.0, da.row(r), layer_grads[li].bias.row(0));
    if (li > 0 || d_input) dh = matmul_nn(da, layers[li].weight);
  }
  if (d_input) *d_input = std::move(dh);
}

}  // namespace

Encoded forward_image(const EncoderParams& params, const Matrix& features) {
  if (!features.all_finite())
    throw Error(ErrorKind::NonFiniteInput, "encoder-core/forward_image", "features contain NaN/Inf");
  if (features.cols() != params.feature_dim())
    throw Error(ErrorKind::ShapeError, "encoder-core/forward_image",
                "feature width " + std::to_string(features.cols()) + " != " +
                    std::to_string(params.feature_dim()));
  Encoded enc;
  enc.cache.input = features;
  run_tower(params.image_layers, params.image_projection, params.activation, enc.cache);
  enc.embeddings = enc.cache.output;
  return enc;
}

Encoded forward_text(const EncoderParams& params, std::span<const TokenSequence> tokens) {
  constexpr const char* kOp = "encoder-core/forward_text";
  const std::size_t width = params.text_embedding.cols();
  Encoded enc;
  enc.cache.input = Matrix(tokens.size(), width);
  enc.cache.token_rows.resize(tokens.size());
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    auto& ids = enc.cache.token_rows[r];
    for (int id : tokens[r].ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= params.vocab_size())
        throw Error(ErrorKind::ShapeError, kOp, "token id outside the embedding table");
      if (id != 0) ids.push_back(id);
    }
    if (ids.empty())
      throw Error(ErrorKind::MeanOfEmptySet, kOp, "row " + std::to_string(r) + " is all padding");
    auto dst = enc.cache.input.row(r);
    for (int id : ids) axpy(1.0, params.text_embedding.row(static_cast<std::size_t>(id)), dst);
    scale(1.0 / static_cast<double>(ids.size()), dst);
  }
  run_tower(params.text_layers, params.text_projection, params.activation, enc.cache);
  enc.embeddings = enc.cache.output;
  return enc;
}

void backward_image(const EncoderParams& params, const ActivationCache& cache,
                    const Matrix& d_embeddings, EncoderParams& grads) {
  tower_backward(params.image_layers, params.image_projection, params.activation, cache,
                 d_embeddings, grads.image_layers, grads.image_projection, nullptr);
}

void backward_text(const EncoderParams& params, const ActivationCache& cache,
                   const Matrix& d_embeddings, EncoderParams& grads) {
  Matrix d_pooled;
  tower_backward(params.text_layers, params.text_projection, params.activation, cache,
                 d_embeddings, grads.text_layers, grads.text_projection, &d_pooled);
  for (std::size_t r = 0; r < cache.token_rows.size(); ++r) {
    const auto& ids = cache.token_rows[r];
    const double w = 1.0 / static_cast<double>(ids.size());
    for (int id : ids) axpy(w, d_pooled.row(r), grads.text_embedding.row(static_cast<std::size_t>(id)));
  }
}

EncoderParams backward(const EncoderParams& params, const ActivationCache& image_cache,
                       const ActivationCache& text_cache, const Matrix& d_image,
                       const Matrix& d_text) {
  EncoderParams grads = params.zeros_like();
  backward_image(params, image_cache, d_image, grads);
  backward_text(params, text_cache, d_text, grads);
  return grads;
}

}  // namespace cstalign
