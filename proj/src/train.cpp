#include "csckit/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "csckit/error.hpp"
#include "csckit/rng.hpp"

namespace csc {

namespace {

Scalar floored_log(Scalar p) { return std::log(std::max(p, static_cast<Scalar>(kProbFloor))); }

// d/dp of log(max(p, floor)): zero on the clamped branch.
Scalar floored_inv(Scalar p) {
  return p > static_cast<Scalar>(kProbFloor) ? 1.0 / p : 0.0;
}

void check_binary_labels(const Matrix& probs, std::span<const int> labels, const char* what) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size())
    throw ShapeError(std::string(what) + " labels length " + std::to_string(labels.size()) +
                     " does not match " + std::to_string(probs.rows()) + " rows");
  for (int v : labels)
    if (v < 0 || v >= probs.cols())
      throw ShapeError(std::string(what) + " label " + std::to_string(v) + " out of range");
}

}  // namespace

void TrainConfig::validate() const {
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0)
    throw ConfigError("loss weights must be nonnegative");
  if (learning_rate <= 0) throw ConfigError("learning rate must be positive");
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (epochs < 0) throw ConfigError("epoch count must be nonnegative");
}

Scalar loss_detection(const Matrix& p_d, std::span<const int> g_d) {
  check_binary_labels(p_d, g_d, "detection");
  Scalar loss = 0.0;
  for (Eigen::Index i = 0; i < p_d.rows(); ++i)
    loss -= floored_log(p_d(i, g_d[static_cast<std::size_t>(i)]));
  return loss;
}

Scalar loss_reasoning(const Matrix& p_r, std::span<const int> g_r, std::span<const int> gate) {
  check_binary_labels(p_r, g_r, "reasoning");
  if (gate.size() != g_r.size())
    throw ShapeError("reasoning gate length " + std::to_string(gate.size()) +
                     " does not match " + std::to_string(g_r.size()) + " labels");
  Scalar loss = 0.0;
  for (Eigen::Index i = 0; i < p_r.rows(); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    if (gate[k]) loss -= floored_log(p_r(i, g_r[k]));
  }
  return loss;
}

Scalar loss_searching(const Matrix& p_masked, std::span<const int> gold) {
  if (static_cast<std::size_t>(p_masked.rows()) != gold.size())
    throw ShapeError("gold length " + std::to_string(gold.size()) + " does not match " +
                     std::to_string(p_masked.rows()) + " rows");
  Scalar loss = 0.0;
  for (Eigen::Index i = 0; i < p_masked.rows(); ++i) {
    const int g = gold[static_cast<std::size_t>(i)];
    if (g < 0 || g >= p_masked.cols())
      throw ShapeError("gold index " + std::to_string(g) + " out of range");
    loss -= floored_log(p_masked(i, g));
  }
  return loss;
}

Scalar total_loss(Scalar l_d, Scalar l_r, Scalar l_s, const LossWeights& weights) {
  return weights.alpha * l_d + weights.beta * l_r + weights.gamma * l_s;
}

ModelGrads zero_grads(const ModelState& model) {
  ModelGrads g;
  g.encoder.embedding = Matrix::Zero(model.encoder.embedding.rows(), model.encoder.embedding.cols());
  g.encoder.proj = Matrix::Zero(model.encoder.proj.rows(), model.encoder.proj.cols());
  g.encoder.bias = Vector::Zero(model.encoder.bias.size());
  auto zero_layer = [](const LinearLayer& l) {
    return LinearGrads{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                       Vector::Zero(l.bias.size())};
  };
  g.heads.detection = zero_layer(model.heads.detection);
  g.heads.reasoning = zero_layer(model.heads.reasoning);
  g.heads.searching = zero_layer(model.heads.searching);
  return g;
}

SentenceLosses sentence_loss_and_grads(const ModelState& model, const ConfusionIndex& index,
                                       std::span<const int> x, const LabelSet& labels,
                                       const TrainConfig& config, ModelGrads* grads,
                                       SubtaskTally* tally) {
  if (labels.detection.size() != x.size() || labels.gold.size() != x.size())
    throw ShapeError("label set length does not match sentence length");
  ForwardOptions opts;
  opts.renormalize = true;
  const ForwardResult fwd = forward_sentence(model, index, x, opts);
  const std::span<const int> gate = config.gate == GateMode::kPredicted
                                        ? std::span<const int>(fwd.y_d)
                                        : std::span<const int>(labels.detection);

  SentenceLosses losses;
  losses.detection = loss_detection(fwd.p_d, labels.detection);
  losses.reasoning = loss_reasoning(fwd.p_r, labels.reasoning, gate);
  losses.searching = loss_searching(fwd.p_masked, labels.gold);
  losses.total = total_loss(losses.detection, losses.reasoning, losses.searching, config.weights);

  if (tally) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      tally->det_total += 1;
      if (fwd.y_d[i] == labels.detection[i]) tally->det_correct += 1;
      if (labels.detection[i] == 1) {
        tally->rea_total += 1;
        if (fwd.y_r[i] == labels.reasoning[i]) tally->rea_correct += 1;
      }
      tally->sea_total += 1;
      if (argmax_row(fwd.p_masked, static_cast<int>(i)) == labels.gold[i]) tally->sea_correct += 1;
    }
  }

  if (!grads) return losses;

  const Eigen::Index T = fwd.p_d.rows();
  Matrix d_pd = Matrix::Zero(T, 2);
  Matrix d_pr = Matrix::Zero(T, 2);
  Matrix d_pmasked = Matrix::Zero(T, fwd.p_masked.cols());
  for (Eigen::Index i = 0; i < T; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    d_pd(i, labels.detection[k]) =
        -config.weights.alpha * floored_inv(fwd.p_d(i, labels.detection[k]));
    if (gate[k])
      d_pr(i, labels.reasoning[k]) =
          -config.weights.beta * floored_inv(fwd.p_r(i, labels.reasoning[k]));
    d_pmasked(i, labels.gold[k]) =
        -config.weights.gamma * floored_inv(fwd.p_masked(i, labels.gold[k]));
  }
  const Matrix d_ps = apply_mask_backward(fwd.p_s, fwd.mask, /*renormalize=*/true, d_pmasked);

  Matrix d_hidden =
      linear_backward(model.heads.detection, fwd.hidden,
                      softmax_backward_rows(fwd.p_d, d_pd), grads->heads.detection);
  d_hidden += linear_backward(model.heads.reasoning, fwd.hidden,
                              softmax_backward_rows(fwd.p_r, d_pr), grads->heads.reasoning);
  d_hidden += linear_backward(model.heads.searching, fwd.hidden,
                              softmax_backward_rows(fwd.p_s, d_ps), grads->heads.searching);

  if (config.train_encoder) {
    const EncoderGrads eg = encode_backward(model.encoder, model.config, x, d_hidden);
    grads->encoder.embedding += eg.embedding;
    grads->encoder.proj += eg.proj;
    grads->encoder.bias += eg.bias;
  }
  return losses;
}

namespace {

void sgd_update(Matrix& param, Matrix& velocity, const Matrix& grad, Scalar scale, Scalar lr,
                Scalar momentum) {
  velocity = momentum * velocity + scale * grad;
  param -= lr * velocity;
}

void sgd_update(Vector& param, Vector& velocity, const Vector& grad, Scalar scale, Scalar lr,
                Scalar momentum) {
  velocity = momentum * velocity + scale * grad;
  param -= lr * velocity;
}

}  // namespace

std::vector<EpochRecord> fit(const std::vector<SentencePair>& corpus, ModelState& model,
                             const TrainConfig& config, const Vocab& vocab,
                             const ConfusionIndex& index) {
  config.validate();
  check_model_compat(model, vocab, index);
  if (corpus.empty()) throw ConfigError("training corpus is empty");

  std::vector<IndexSeq> xs;
  std::vector<LabelSet> labels;
  xs.reserve(corpus.size());
  labels.reserve(corpus.size());
  for (const SentencePair& pair : corpus) {
    validate_pair(pair, model.config.max_len);
    xs.push_back(to_indices(vocab, pair.src));
    labels.push_back(derive_labels(pair, vocab, index));
  }

  Rng rng(config.seed);
  ModelGrads velocity = zero_grads(model);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochRecord> log;
  log.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    SubtaskTally tally;
    Scalar sum_d = 0.0, sum_r = 0.0, sum_s = 0.0, sum_total = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      ModelGrads grads = zero_grads(model);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t s = order[k];
        const SentenceLosses l =
            sentence_loss_and_grads(model, index, xs[s], labels[s], config, &grads, &tally);
        if (!std::isfinite(l.total))
          throw DivergenceError("loss diverged at epoch " + std::to_string(epoch) +
                                ", sentence " + std::to_string(s));
        sum_d += l.detection;
        sum_r += l.reasoning;
        sum_s += l.searching;
        sum_total += l.total;
      }
      const Scalar scale = 1.0 / static_cast<Scalar>(stop - start);
      const Scalar lr = config.learning_rate;
      const Scalar mu = config.momentum;
      if (config.train_encoder) {
        sgd_update(model.encoder.embedding, velocity.encoder.embedding, grads.encoder.embedding,
                   scale, lr, mu);
        sgd_update(model.encoder.proj, velocity.encoder.proj, grads.encoder.proj, scale, lr, mu);
        sgd_update(model.encoder.bias, velocity.encoder.bias, grads.encoder.bias, scale, lr, mu);
      }
      auto update_layer = [&](LinearLayer& layer, LinearGrads& vel, const LinearGrads& g) {
        sgd_update(layer.weight, vel.weight, g.weight, scale, lr, mu);
        sgd_update(layer.bias, vel.bias, g.bias, scale, lr, mu);
      };
      update_layer(model.heads.detection, velocity.heads.detection, grads.heads.detection);
      update_layer(model.heads.reasoning, velocity.heads.reasoning, grads.heads.reasoning);
      update_layer(model.heads.searching, velocity.heads.searching, grads.heads.searching);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    const Scalar n = static_cast<Scalar>(corpus.size());
    rec.loss_detection = sum_d / n;
    rec.loss_reasoning = sum_r / n;
    rec.loss_searching = sum_s / n;
    rec.loss_total = sum_total / n;
    rec.acc_detection =
        tally.det_total ? static_cast<Scalar>(tally.det_correct) / tally.det_total : 0.0;
    rec.acc_reasoning =
        tally.rea_total ? static_cast<Scalar>(tally.rea_correct) / tally.rea_total : 0.0;
    rec.acc_searching =
        tally.sea_total ? static_cast<Scalar>(tally.sea_correct) / tally.sea_total : 0.0;
    log.push_back(rec);
  }
  model.epochs_trained += config.epochs;
  return log;
}

void write_epoch_log(const std::vector<EpochRecord>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const EpochRecord& rec : log) {
    nlohmann::ordered_json j;
    j["epoch"] = rec.epoch;
    j["loss_detection"] = rec.loss_detection;
    j["loss_reasoning"] = rec.loss_reasoning;
    j["loss_searching"] = rec.loss_searching;
    j["loss_total"] = rec.loss_total;
    j["acc_detection"] = rec.acc_detection;
    j["acc_reasoning"] = rec.acc_reasoning;
    j["acc_searching"] = rec.acc_searching;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace csc
