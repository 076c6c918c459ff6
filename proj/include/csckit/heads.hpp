#pragma once

#include <cstdint>
#include <vector>

#include "csckit/types.hpp"

namespace csc {

struct LinearLayer {
  Matrix weight;  // out_dim x in_dim
  Vector bias;    // out_dim
};

// Three classifiers over the shared per-position hidden states: a binary
// wrong/right head, a binary phonological/visual head, and a full-vocabulary
// candidate head. Classes 0/1 of the binary heads mean negative/positive.
struct HeadParams {
  LinearLayer detection;  // 2 x hidden
  LinearLayer reasoning;  // 2 x hidden
  LinearLayer searching;  // vocab x hidden
};

struct LinearGrads {
  Matrix weight;
  Vector bias;
};

struct HeadGrads {
  LinearGrads detection;
  LinearGrads reasoning;
  LinearGrads searching;
};

HeadParams init_head_params(int hidden_dim, int vocab_size, std::uint64_t seed);

// logits = H * W^T + bias (broadcast over rows).
Matrix linear_rows(const LinearLayer& layer, const Matrix& hidden);

// Numerically stable row-wise softmax (max subtraction per row).
Matrix softmax_rows(const Matrix& logits);

inline Matrix head_probs(const LinearLayer& layer, const Matrix& hidden) {
  return softmax_rows(linear_rows(layer, hidden));
}

// Per-row argmax, ties broken toward the lower index.
std::vector<int> argmax_rows(const Matrix& m);

// Gradient through the softmax given upstream on the probabilities:
// dlogit = p .* (up - dot(up, p)) per row.
Matrix softmax_backward_rows(const Matrix& probs, const Matrix& upstream);

// Accumulates weight/bias gradients into `grads` and returns the gradient
// with respect to the hidden states.
Matrix linear_backward(const LinearLayer& layer, const Matrix& hidden, const Matrix& dlogits,
                       LinearGrads& grads);

}  // namespace csc
