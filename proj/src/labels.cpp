#include "csckit/labels.hpp"

#include <algorithm>

#include "csckit/error.hpp"

namespace csc {

void validate_pair(const SentencePair& pair, int max_len) {
  if (pair.src.empty() || pair.tgt.empty())
    throw LengthError("sentence pair has an empty side");
  if (pair.src.size() != pair.tgt.size())
    throw LengthError("source length " + std::to_string(pair.src.size()) +
                      " does not match target length " + std::to_string(pair.tgt.size()));
  if (static_cast<int>(pair.src.size()) > max_len)
    throw LengthError("pair length " + std::to_string(pair.src.size()) +
                      " exceeds the configured maximum " + std::to_string(max_len));
}

IndexSeq to_indices(const Vocab& vocab, const std::u32string& chars) {
  IndexSeq out;
  out.reserve(chars.size());
  for (char32_t c : chars) out.push_back(vocab.index_of(c));
  return out;
}

LabelSet derive_labels(const SentencePair& pair, const Vocab& vocab,
                       const ConfusionIndex& index) {
  if (pair.src.size() != pair.tgt.size())
    throw LengthError("source length " + std::to_string(pair.src.size()) +
                      " does not match target length " + std::to_string(pair.tgt.size()));
  const IndexSeq src = to_indices(vocab, pair.src);
  const IndexSeq tgt = to_indices(vocab, pair.tgt);
  LabelSet labels;
  const std::size_t T = src.size();
  labels.detection.assign(T, 0);
  labels.reasoning.assign(T, 0);
  labels.gold = tgt;
  for (std::size_t i = 0; i < T; ++i) {
    if (src[i] == tgt[i]) continue;
    labels.detection[i] = 1;
    const std::vector<int>& pc = index.pc(src[i]);
    const std::vector<int>& vc = index.vc(src[i]);
    if (std::binary_search(pc.begin(), pc.end(), tgt[i])) {
      labels.reasoning[i] = 1;
    } else if (std::binary_search(vc.begin(), vc.end(), tgt[i])) {
      labels.reasoning[i] = 0;
    } else {
      // Gold outside both sets: keep the majority-class label and flag it.
      labels.reasoning[i] = 1;
      labels.uncoverable.push_back(static_cast<int>(i));
    }
  }
  return labels;
}

}  // namespace csc
