#pragma once

#include <string>
#include <vector>

#include "csckit/charkb.hpp"
#include "csckit/types.hpp"

namespace csc {

// Aligned source/reference sentences. Correction is positional: the two
// sides always have equal length.
struct SentencePair {
  std::u32string src;
  std::u32string tgt;
};

// Per-position supervision derived from a pair and a confusion index.
// reasoning[i] is meaningful only where detection[i] = 1 and is 0 elsewhere.
// `uncoverable` lists error positions whose gold character sits outside both
// confusion sets of the source character; such positions keep reasoning = 1.
struct LabelSet {
  std::vector<int> detection;
  std::vector<int> reasoning;
  IndexSeq gold;
  std::vector<int> uncoverable;
};

void validate_pair(const SentencePair& pair, int max_len);

// Maps characters to vocab indices, rejecting out-of-vocabulary characters.
IndexSeq to_indices(const Vocab& vocab, const std::u32string& chars);

// Detection by positional inequality; where detected, the error type is
// phonological whenever the gold character is in the phonological set of the
// source (priority rule: membership in both sets counts as phonological).
LabelSet derive_labels(const SentencePair& pair, const Vocab& vocab,
                       const ConfusionIndex& index);

}  // namespace csc
