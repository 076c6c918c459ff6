#include "csckit/heads.hpp"

#include <string>

#include "csckit/error.hpp"
#include "csckit/rng.hpp"
#include "csckit/searchmask.hpp"

namespace csc {

HeadParams init_head_params(int hidden_dim, int vocab_size, std::uint64_t seed) {
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
  if (vocab_size <= 0) throw ConfigError("vocab size must be positive");
  Rng rng(seed);
  auto layer = [&rng, hidden_dim](int out_dim) {
    LinearLayer l;
    l.weight.resize(out_dim, hidden_dim);
    l.bias.resize(out_dim);
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = rng.uniform(-0.05, 0.05);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.05, 0.05);
    return l;
  };
  HeadParams p;
  p.detection = layer(2);
  p.reasoning = layer(2);
  p.searching = layer(vocab_size);
  return p;
}

Matrix linear_rows(const LinearLayer& layer, const Matrix& hidden) {
  if (hidden.cols() != layer.weight.cols())
    throw ShapeError("hidden width " + std::to_string(hidden.cols()) +
                     " does not match layer input " + std::to_string(layer.weight.cols()));
  Matrix logits = hidden * layer.weight.transpose();
  logits.rowwise() += layer.bias.transpose();
  return logits;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out[static_cast<std::size_t>(i)] = argmax_row(m, static_cast<int>(i));
  return out;
}

Matrix softmax_backward_rows(const Matrix& probs, const Matrix& upstream) {
  if (probs.rows() != upstream.rows() || probs.cols() != upstream.cols())
    throw ShapeError("softmax gradient shape mismatch");
  Matrix dlogits(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const Scalar dot = upstream.row(i).dot(probs.row(i));
    dlogits.row(i) = probs.row(i).array() * (upstream.row(i).array() - dot);
  }
  return dlogits;
}

Matrix linear_backward(const LinearLayer& layer, const Matrix& hidden, const Matrix& dlogits,
                       LinearGrads& grads) {
  if (dlogits.rows() != hidden.rows() || dlogits.cols() != layer.weight.rows())
    throw ShapeError("logit gradient shape mismatch");
  if (grads.weight.rows() != layer.weight.rows() || grads.weight.cols() != layer.weight.cols()) {
    grads.weight = Matrix::Zero(layer.weight.rows(), layer.weight.cols());
    grads.bias = Vector::Zero(layer.bias.size());
  }
  grads.weight += dlogits.transpose() * hidden;
  grads.bias += dlogits.colwise().sum().transpose();
  return dlogits * layer.weight;
}

}  // namespace csc
