#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csckit/charkb.hpp"
#include "csckit/labels.hpp"
#include "csckit/types.hpp"

namespace csc {

// Reference-text generator family. Uniform draws every character
// independently; the chain model gives each character a small set of likely
// successors (derived from the seed) so context carries signal.
enum class TextModel { kUniform, kChain };

struct CorpusSpec {
  int sentences = 0;
  int min_len = 1;
  int max_len = 1;
  Scalar error_rate = 0.0;
  Scalar phonological_ratio = 0.83;
  std::uint64_t seed = 0;
  TextModel text_model = TextModel::kUniform;

  void validate() const;
};

struct SynthStats {
  long long positions = 0;
  long long corrupted = 0;
  long long phonological = 0;
  long long visual = 0;
  // Positions whose target had no partner in either confusion set.
  long long skipped_uncorruptable = 0;
};

// Draws reference sentences, then corrupts each position independently with
// the error rate, sampling the wrong character from the target's
// phonological set (with probability ratio) or visual set (otherwise); under
// a symmetric similarity policy the gold character is then guaranteed to be
// inside the source character's same-type set.
std::vector<SentencePair> synthesize(const CorpusSpec& spec, const Vocab& vocab,
                                     const ConfusionIndex& index, SynthStats* stats = nullptr);

// Tab-separated parallel file: `src<TAB>tgt` per line, UTF-8, blank lines
// skipped. Returns pairs in file order.
std::vector<SentencePair> load_parallel(const std::string& path);

void save_parallel(const std::vector<SentencePair>& pairs, const std::string& path);

// Provenance record written next to a synthesized corpus.
void write_corpus_sidecar(const CorpusSpec& spec, const SynthStats& stats,
                          const std::string& path);

}  // namespace csc
