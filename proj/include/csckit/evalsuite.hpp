#pragma once

#include <string>
#include <vector>

#include "csckit/charkb.hpp"
#include "csckit/labels.hpp"
#include "csckit/types.hpp"

namespace csc {

// Per-sentence pipeline output as seen by the scorer.
struct SentenceEval {
  std::vector<int> y_d;
  std::vector<int> y_r;
  IndexSeq corrected;
};

struct Prf {
  Scalar precision = 0.0;
  Scalar recall = 0.0;
  Scalar f1 = 0.0;
};

// P = tp/pred_pos, R = tp/gold_pos, F = 2PR/(P+R). When both denominators
// are zero (nothing predicted, nothing to find) all three read 1; any other
// empty denominator gives 0.
Prf make_prf(long long tp, long long pred_pos, long long gold_pos);

enum class MetricLevel { kDetection, kCorrection };

// Sentence-level scoring. A sentence is predicted-positive when the model
// flags or changes at least one position. A detection true-positive requires
// an errorful sentence whose flagged-or-changed position set equals the gold
// error set; a correction true-positive additionally requires the corrected
// sentence to equal the reference.
Prf sentence_metrics(const std::vector<SentenceEval>& outputs,
                     const std::vector<SentencePair>& pairs, const Vocab& vocab,
                     MetricLevel level);

struct SubtaskPrf {
  Prf detection;
  Prf reasoning;
  Prf searching;
};

// Progressive subtask scores: detection from the flag head alone, reasoning
// conditioned on fully correct detection plus matching error types, and
// searching as the correction-level metric.
SubtaskPrf subtask_metrics(const std::vector<SentenceEval>& outputs,
                           const std::vector<SentencePair>& pairs, const Vocab& vocab,
                           const ConfusionIndex& index);

// Interpretability counters over flagged positions. The two predicted-type
// counts partition the flagged positions; the not-in counts mark flags whose
// selected confusion set is the trivial self-singleton; the filtered-out
// counts mark flags whose gold character fell outside the selected set.
struct AuditCounts {
  long long predicted_phonological = 0;
  long long predicted_morphological = 0;
  long long not_in_pc = 0;
  long long not_in_vc = 0;
  long long gold_filtered_out_pc = 0;
  long long gold_filtered_out_vc = 0;
};

AuditCounts audit(const std::vector<SentenceEval>& outputs,
                  const std::vector<SentencePair>& pairs, const Vocab& vocab,
                  const ConfusionIndex& index);

struct EvalReport {
  Prf detection;
  Prf correction;
  SubtaskPrf subtasks;
  AuditCounts counts;
};

EvalReport evaluate(const std::vector<SentenceEval>& outputs,
                    const std::vector<SentencePair>& pairs, const Vocab& vocab,
                    const ConfusionIndex& index);

// Stable key order so reports can be diffed byte-for-byte.
std::string report_to_json(const EvalReport& report);
void save_report(const EvalReport& report, const std::string& path);

}  // namespace csc
