#include "csckit/encoder.hpp"

#include <string>

#include "csckit/error.hpp"
#include "csckit/rng.hpp"

namespace csc {

namespace {

void check_indices(std::span<const int> indices, int vocab_size, int max_len) {
  if (indices.empty()) throw LengthError("cannot encode an empty sentence");
  if (static_cast<int>(indices.size()) > max_len)
    throw LengthError("sentence length " + std::to_string(indices.size()) +
                      " exceeds the configured maximum " + std::to_string(max_len));
  for (std::size_t i = 0; i < indices.size(); ++i)
    if (indices[i] < 0 || indices[i] >= vocab_size)
      throw VocabError("character index " + std::to_string(indices[i]) + " at position " +
                       std::to_string(i) + " out of range [0, " + std::to_string(vocab_size) +
                       ")");
}

}  // namespace

void EncoderConfig::validate() const {
  if (embedding_dim <= 0) throw ConfigError("embedding_dim must be positive");
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
  if (window < 0) throw ConfigError("window must be nonnegative");
  if (max_len <= 0) throw ConfigError("max_len must be positive");
}

EncoderParams init_encoder_params(const EncoderConfig& config, int vocab_size,
                                  std::uint64_t seed) {
  config.validate();
  if (vocab_size <= 0) throw ConfigError("vocab size must be positive");
  Rng rng(seed);
  auto fill = [&rng](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-0.05, 0.05);
  };
  EncoderParams p;
  p.embedding.resize(vocab_size, config.embedding_dim);
  p.proj.resize(config.hidden_dim, config.concat_dim());
  p.bias.resize(config.hidden_dim);
  fill(p.embedding);
  fill(p.proj);
  fill(p.bias);
  return p;
}

Matrix encode(const EncoderParams& params, const EncoderConfig& config,
              std::span<const int> indices) {
  config.validate();
  check_indices(indices, static_cast<int>(params.embedding.rows()), config.max_len);
  const int T = static_cast<int>(indices.size());
  const int d = config.embedding_dim;
  const int w = config.window;
  Matrix hidden(T, config.hidden_dim);
  Vector concat(config.concat_dim());
  for (int i = 0; i < T; ++i) {
    for (int k = -w; k <= w; ++k) {
      const int pos = i + k;
      auto slot = concat.segment((k + w) * d, d);
      if (pos < 0 || pos >= T)
        slot.setZero();
      else
        slot = params.embedding.row(indices[static_cast<std::size_t>(pos)]).transpose();
    }
    hidden.row(i) = (params.proj * concat + params.bias).array().tanh().transpose();
  }
  return hidden;
}

EncoderGrads encode_backward(const EncoderParams& params, const EncoderConfig& config,
                             std::span<const int> indices, const Matrix& upstream) {
  config.validate();
  check_indices(indices, static_cast<int>(params.embedding.rows()), config.max_len);
  const int T = static_cast<int>(indices.size());
  if (upstream.rows() != T || upstream.cols() != config.hidden_dim)
    throw ShapeError("upstream gradient must be T x hidden_dim");
  const int d = config.embedding_dim;
  const int w = config.window;

  EncoderGrads g;
  g.embedding = Matrix::Zero(params.embedding.rows(), params.embedding.cols());
  g.proj = Matrix::Zero(params.proj.rows(), params.proj.cols());
  g.bias = Vector::Zero(params.bias.size());

  Vector concat(config.concat_dim());
  for (int i = 0; i < T; ++i) {
    for (int k = -w; k <= w; ++k) {
      const int pos = i + k;
      auto slot = concat.segment((k + w) * d, d);
      if (pos < 0 || pos >= T)
        slot.setZero();
      else
        slot = params.embedding.row(indices[static_cast<std::size_t>(pos)]).transpose();
    }
    const Vector h = (params.proj * concat + params.bias).array().tanh();
    // d tanh(z) = 1 - tanh(z)^2, expressed through the forward activation.
    const Vector dz =
        upstream.row(i).transpose().array() * (1.0 - h.array() * h.array());
    g.bias += dz;
    g.proj += dz * concat.transpose();
    const Vector dconcat = params.proj.transpose() * dz;
    for (int k = -w; k <= w; ++k) {
      const int pos = i + k;
      if (pos < 0 || pos >= T) continue;
      g.embedding.row(indices[static_cast<std::size_t>(pos)]) +=
          dconcat.segment((k + w) * d, d).transpose();
    }
  }
  return g;
}

}  // namespace csc
