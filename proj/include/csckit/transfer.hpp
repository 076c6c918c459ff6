#pragma once

#include <span>
#include <string>
#include <vector>

#include "csckit/model.hpp"
#include "csckit/types.hpp"

namespace csc {

// The detachable detection-and-reasoning module: an encoder plus the two
// binary heads trained on top of it, pinned to the data it was built with.
struct DRModule {
  EncoderConfig config;
  EncoderParams encoder;
  LinearLayer detection;
  LinearLayer reasoning;
  std::uint64_t vocab_hash = 0;
  std::uint64_t confusion_hash = 0;
};

// A bare corrector: an encoder plus a vocabulary-sized output layer.
struct CorrectionModel {
  EncoderConfig config;
  EncoderParams encoder;
  LinearLayer output;
  std::uint64_t vocab_hash = 0;
};

DRModule extract_dr(const ModelState& model);
CorrectionModel extract_correction(const ModelState& model);

struct DRInference {
  std::vector<int> y_d;
  std::vector<int> y_r;
  SearchMatrix mask;
};

// Pure function of (sentence, module): encode, classify, build the mask.
DRInference dr_infer(std::span<const int> x, const DRModule& dr, const ConfusionIndex& index);

struct TransferOptions {
  // Oracle spans substitute gold labels into the mask construction.
  std::span<const int> oracle_d;
  std::span<const int> oracle_r;
  bool disable_mask = false;
};

struct CombinedResult {
  IndexSeq corrected;
  // The labels the mask was actually built from (oracle where supplied).
  std::vector<int> y_d;
  std::vector<int> y_r;
};

// Constrains the correction model's distribution with the donor module's
// search matrix: P = P' .* C, argmax per row. No renormalization: the raw
// product preserves the argmax.
CombinedResult combined_predict(std::span<const int> x, const DRModule& dr,
                                const CorrectionModel& model, const ConfusionIndex& index,
                                const TransferOptions& opts = {});

}  // namespace csc
