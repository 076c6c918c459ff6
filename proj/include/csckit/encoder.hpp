#pragma once

#include <cstdint>
#include <span>

#include "csckit/types.hpp"

namespace csc {

// Windowed tanh encoder: each position's hidden state is a nonlinear
// projection of the concatenated embeddings of a fixed symmetric window,
// with zero vectors standing in for positions past either sentence edge.
struct EncoderConfig {
  int embedding_dim = 32;
  int hidden_dim = 64;
  int window = 2;
  int max_len = 192;

  int concat_dim() const { return (2 * window + 1) * embedding_dim; }
  void validate() const;
};

struct EncoderParams {
  Matrix embedding;  // vocab x embedding_dim
  Matrix proj;       // hidden_dim x concat_dim
  Vector bias;       // hidden_dim
};

struct EncoderGrads {
  Matrix embedding;
  Matrix proj;
  Vector bias;
};

EncoderParams init_encoder_params(const EncoderConfig& config, int vocab_size,
                                  std::uint64_t seed);

// Rows are per-position hidden states, shape T x hidden_dim.
Matrix encode(const EncoderParams& params, const EncoderConfig& config,
              std::span<const int> indices);

// Gradients of sum(upstream .* encode(...)) with respect to every parameter.
EncoderGrads encode_backward(const EncoderParams& params, const EncoderConfig& config,
                             std::span<const int> indices, const Matrix& upstream);

}  // namespace csc
