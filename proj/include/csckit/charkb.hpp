#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "csckit/types.hpp"

namespace csc {

// One character with the raw knowledge its similarity judgments are built
// from: a romanization with a trailing tone digit ("shi4") and an ordered
// stroke-type sequence over the 5-class code (1 横, 2 竖, 3 撇, 4 捺/点, 5 折).
struct CharRecord {
  char32_t ch = 0;
  std::string pinyin;        // matches [a-z]+[1-5]
  std::vector<int> strokes;  // nonempty
};

// Ordered character inventory. Indices 0 and 1 are reserved special tokens
// (padding / unknown, stored as Unicode noncharacters so they can never
// collide with real text).
class Vocab {
 public:
  static constexpr char32_t kPadChar = 0xfdd0;
  static constexpr char32_t kUnkChar = 0xfdd1;
  static constexpr int kPadIndex = 0;
  static constexpr int kUnkIndex = 1;
  static constexpr int kNumSpecials = 2;

  // Builds the vocabulary: specials first, then `chars` in the given order.
  // Throws DuplicateError on repeated characters.
  static Vocab from_chars(const std::vector<char32_t>& chars);

  int size() const { return static_cast<int>(chars_.size()); }
  bool is_special(int index) const { return index < kNumSpecials; }
  char32_t at(int index) const;

  // Index for a character, or kUnkIndex if absent.
  int index_or_unk(char32_t ch) const;
  // Index for a character; throws VocabError if absent.
  int index_of(char32_t ch) const;
  bool contains(char32_t ch) const { return index_.count(ch) > 0; }

  std::uint64_t hash() const { return hash_; }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, int> index_;
  std::uint64_t hash_ = 0;
};

enum class PinyinMode {
  kToneInsensitiveExact,  // tone-stripped pinyins compare equal
  kEditDistance,          // Levenshtein over tone-stripped pinyins <= k
};

struct SimilarityPolicy {
  PinyinMode pinyin_mode = PinyinMode::kToneInsensitiveExact;
  int pinyin_k = 1;
  double stroke_tau = 0.25;  // normalized stroke edit distance threshold, in [0,1]
};

// Per vocab index, the phonologically and visually similar index sets.
// Both sets always contain the owning index itself; members are sorted.
struct ConfusionIndex {
  std::vector<std::vector<int>> phonological;  // pc
  std::vector<std::vector<int>> visual;        // vc
  std::uint64_t vocab_hash = 0;

  int size() const { return static_cast<int>(phonological.size()); }
  const std::vector<int>& pc(int i) const { return phonological.at(i); }
  const std::vector<int>& vc(int i) const { return visual.at(i); }

  // Content fingerprint over both adjacency lists plus the vocab hash;
  // persisted in model checkpoints for compatibility checks.
  std::uint64_t content_hash() const;
};

// Levenshtein distance between two code sequences. Exposed for policy math
// and reused by the pinyin edit-distance mode over byte strings.
int edit_distance(const std::vector<int>& a, const std::vector<int>& b);
int edit_distance(std::string_view a, std::string_view b);

// Validates `[a-z]+[1-5]` and returns the tone-stripped syllable.
std::string strip_tone(const std::string& pinyin);

// File format: UTF-8, one record per line, `char<TAB>pinyin<TAB>stroke-digits`;
// `#`-prefixed comment lines and blank lines are ignored. Parse failures name
// the offending line; repeated characters raise DuplicateError.
std::vector<CharRecord> load_char_table(const std::string& path);

// Vocabulary induced by a character table: specials, then table order.
Vocab vocab_from_table(const std::vector<CharRecord>& table);

bool pinyin_similar(const CharRecord& a, const CharRecord& b, const SimilarityPolicy& policy);
bool stroke_similar(const CharRecord& a, const CharRecord& b, const SimilarityPolicy& policy);

// All-pairs construction of the confusion index under the policy. Every
// non-special vocab character must have a record (CoverageError lists the
// missing ones); specials get singleton self-sets.
ConfusionIndex build_confusion_index(const Vocab& vocab, const std::vector<CharRecord>& table,
                                     const SimilarityPolicy& policy);

enum class ConfusionKind { kPhonological, kVisual };

struct MergeStats {
  int pairs_added = 0;
  int chars_skipped = 0;  // file characters not in the vocab
};

// Unions SIGHAN-style external pairs (`char<TAB>candidates`, candidates as a
// contiguous character run) into one side of the index. Characters outside
// the vocab are skipped and counted. Idempotent.
ConfusionIndex merge_external_sets(const ConfusionIndex& index, const Vocab& vocab,
                                   const std::string& path, ConfusionKind kind,
                                   MergeStats* stats = nullptr);

void save_confusion_index(const ConfusionIndex& index, const std::string& path);
// Loads and verifies the stored vocab hash against `vocab`.
ConfusionIndex load_confusion_index(const std::string& path, const Vocab& vocab);

}  // namespace csc
