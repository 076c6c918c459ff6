#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csckit/charkb.hpp"
#include "csckit/encoder.hpp"
#include "csckit/heads.hpp"
#include "csckit/searchmask.hpp"
#include "csckit/types.hpp"

namespace csc {

// Complete trainable state plus the identity of the data it was built
// against. The vocab and confusion hashes pin checkpoint compatibility.
struct ModelState {
  EncoderConfig config;
  EncoderParams encoder;
  HeadParams heads;
  std::uint64_t vocab_hash = 0;
  std::uint64_t confusion_hash = 0;
  std::uint64_t seed = 0;
  int epochs_trained = 0;

  int vocab_size() const { return static_cast<int>(encoder.embedding.rows()); }
};

ModelState init_model(const EncoderConfig& config, const Vocab& vocab,
                      const ConfusionIndex& index, std::uint64_t seed);

struct ForwardOptions {
  // Training renormalizes masked rows; inference keeps the raw product
  // (argmax is unaffected when the masked mass is nonzero).
  bool renormalize = false;
  bool disable_mask = false;
  // Oracle spans, when set, replace the predicted labels in the mask.
  std::span<const int> oracle_d;
  std::span<const int> oracle_r;
};

struct ForwardResult {
  Matrix hidden;       // T x hidden_dim
  Matrix p_d;          // T x 2
  Matrix p_r;          // T x 2
  Matrix p_s;          // T x vocab, pre-mask
  std::vector<int> y_d;
  std::vector<int> y_r;
  SearchMatrix mask;
  Matrix p_masked;     // T x vocab

  IndexSeq corrected() const;
};

ForwardResult forward_sentence(const ModelState& model, const ConfusionIndex& index,
                               std::span<const int> x, const ForwardOptions& opts = {});

void save_model(const ModelState& model, const std::string& path);
ModelState load_model(const std::string& path);

// Loading against live data verifies both hashes.
void check_model_compat(const ModelState& model, const Vocab& vocab,
                        const ConfusionIndex& index);

}  // namespace csc
