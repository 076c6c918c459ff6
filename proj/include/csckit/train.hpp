#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csckit/labels.hpp"
#include "csckit/model.hpp"
#include "csckit/types.hpp"

namespace csc {

// Probabilities are floored here before the log so every loss is finite.
inline constexpr double kProbFloor = 1e-12;

struct LossWeights {
  Scalar alpha = 1.0;  // detection
  Scalar beta = 1.0;   // reasoning
  Scalar gamma = 1.0;  // searching
};

// The reasoning loss is gated: either by the model's own detection argmax
// (the faithful default) or by the gold detection labels.
enum class GateMode { kPredicted, kGold };

struct TrainConfig {
  LossWeights weights;
  Scalar learning_rate = 1e-2;
  Scalar momentum = 0.0;
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;
  GateMode gate = GateMode::kPredicted;
  // Off = fixed-feature mode: the encoder is frozen and only heads train.
  bool train_encoder = true;

  void validate() const;
};

Scalar loss_detection(const Matrix& p_d, std::span<const int> g_d);
Scalar loss_reasoning(const Matrix& p_r, std::span<const int> g_r, std::span<const int> gate);
Scalar loss_searching(const Matrix& p_masked, std::span<const int> gold);
Scalar total_loss(Scalar l_d, Scalar l_r, Scalar l_s, const LossWeights& weights);

struct ModelGrads {
  EncoderGrads encoder;
  HeadGrads heads;
};

ModelGrads zero_grads(const ModelState& model);

struct SentenceLosses {
  Scalar detection = 0.0;
  Scalar reasoning = 0.0;
  Scalar searching = 0.0;
  Scalar total = 0.0;
};

// Position-level running counts for the per-epoch log. Reasoning counts only
// gold-error positions; searching scores the masked argmax at every position.
struct SubtaskTally {
  long long det_correct = 0, det_total = 0;
  long long rea_correct = 0, rea_total = 0;
  long long sea_correct = 0, sea_total = 0;
};

// One sentence's losses, with gradients accumulated into `grads` when given.
// The forward pass renormalizes masked rows; the mask and the gate are held
// constant for the backward pass (both are argmax-valued, hence piecewise
// constant in the parameters).
SentenceLosses sentence_loss_and_grads(const ModelState& model, const ConfusionIndex& index,
                                       std::span<const int> x, const LabelSet& labels,
                                       const TrainConfig& config, ModelGrads* grads,
                                       SubtaskTally* tally = nullptr);

struct EpochRecord {
  int epoch = 0;
  Scalar loss_detection = 0.0;
  Scalar loss_reasoning = 0.0;
  Scalar loss_searching = 0.0;
  Scalar loss_total = 0.0;
  Scalar acc_detection = 0.0;
  Scalar acc_reasoning = 0.0;
  Scalar acc_searching = 0.0;
};

// Mini-batch gradient descent with optional momentum. Deterministic under
// the config seed: the only randomness is the per-epoch shuffle.
std::vector<EpochRecord> fit(const std::vector<SentencePair>& corpus, ModelState& model,
                             const TrainConfig& config, const Vocab& vocab,
                             const ConfusionIndex& index);

// Line-delimited structured records, one per epoch.
void write_epoch_log(const std::vector<EpochRecord>& log, const std::string& path);

}  // namespace csc
