#include "csckit/evalsuite.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "csckit/error.hpp"

namespace csc {

namespace {

void check_aligned(const std::vector<SentenceEval>& outputs,
                   const std::vector<SentencePair>& pairs) {
  if (outputs.size() != pairs.size())
    throw ShapeError("output count " + std::to_string(outputs.size()) +
                     " does not match pair count " + std::to_string(pairs.size()));
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const std::size_t T = pairs[s].src.size();
    if (pairs[s].tgt.size() != T)
      throw ShapeError("pair " + std::to_string(s) + " has unequal sides");
    if (outputs[s].y_d.size() != T || outputs[s].y_r.size() != T ||
        outputs[s].corrected.size() != T)
      throw ShapeError("output " + std::to_string(s) + " does not match pair length " +
                       std::to_string(T));
  }
}

// Positions the model asserts are wrong: explicit flags plus silent edits.
std::vector<int> flagged_or_changed(const SentenceEval& out, const IndexSeq& src) {
  std::vector<int> set;
  for (std::size_t i = 0; i < src.size(); ++i)
    if (out.y_d[i] == 1 || out.corrected[i] != src[i]) set.push_back(static_cast<int>(i));
  return set;
}

std::vector<int> gold_error_set(const SentencePair& pair) {
  std::vector<int> set;
  for (std::size_t i = 0; i < pair.src.size(); ++i)
    if (pair.src[i] != pair.tgt[i]) set.push_back(static_cast<int>(i));
  return set;
}

}  // namespace

Prf make_prf(long long tp, long long pred_pos, long long gold_pos) {
  Prf m;
  if (pred_pos == 0 && gold_pos == 0) {
    // Nothing predicted and nothing to find: vacuously perfect, so a clean
    // corpus scored by an abstaining model reads as 1 rather than 0.
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = pred_pos > 0 ? static_cast<Scalar>(tp) / pred_pos : 0.0;
  m.recall = gold_pos > 0 ? static_cast<Scalar>(tp) / gold_pos : 0.0;
  m.f1 = (m.precision + m.recall) > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

Prf sentence_metrics(const std::vector<SentenceEval>& outputs,
                     const std::vector<SentencePair>& pairs, const Vocab& vocab,
                     MetricLevel level) {
  check_aligned(outputs, pairs);
  long long tp = 0, pred_pos = 0, gold_pos = 0;
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const IndexSeq src = to_indices(vocab, pairs[s].src);
    const IndexSeq tgt = to_indices(vocab, pairs[s].tgt);
    const std::vector<int> flagged = flagged_or_changed(outputs[s], src);
    const std::vector<int> gold = gold_error_set(pairs[s]);
    if (!flagged.empty()) pred_pos += 1;
    if (!gold.empty()) gold_pos += 1;
    if (gold.empty() || flagged != gold) continue;
    if (level == MetricLevel::kDetection || outputs[s].corrected == tgt) tp += 1;
  }
  return make_prf(tp, pred_pos, gold_pos);
}

SubtaskPrf subtask_metrics(const std::vector<SentenceEval>& outputs,
                           const std::vector<SentencePair>& pairs, const Vocab& vocab,
                           const ConfusionIndex& index) {
  check_aligned(outputs, pairs);
  long long det_tp = 0, det_pred = 0, det_gold = 0;
  long long rea_tp = 0, rea_pred = 0, rea_gold = 0;
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const SentenceEval& out = outputs[s];
    const LabelSet labels = derive_labels(pairs[s], vocab, index);
    std::vector<int> pred_set, gold_set;
    for (std::size_t i = 0; i < out.y_d.size(); ++i) {
      if (out.y_d[i] == 1) pred_set.push_back(static_cast<int>(i));
      if (labels.detection[i] == 1) gold_set.push_back(static_cast<int>(i));
    }
    if (!pred_set.empty()) {
      det_pred += 1;
      rea_pred += 1;
    }
    if (!gold_set.empty()) {
      det_gold += 1;
      rea_gold += 1;
    }
    if (gold_set.empty() || pred_set != gold_set) continue;
    det_tp += 1;
    bool types_match = true;
    for (int i : gold_set)
      if (out.y_r[static_cast<std::size_t>(i)] != labels.reasoning[static_cast<std::size_t>(i)])
        types_match = false;
    if (types_match) rea_tp += 1;
  }
  SubtaskPrf result;
  result.detection = make_prf(det_tp, det_pred, det_gold);
  result.reasoning = make_prf(rea_tp, rea_pred, rea_gold);
  result.searching = sentence_metrics(outputs, pairs, vocab, MetricLevel::kCorrection);
  return result;
}

AuditCounts audit(const std::vector<SentenceEval>& outputs,
                  const std::vector<SentencePair>& pairs, const Vocab& vocab,
                  const ConfusionIndex& index) {
  check_aligned(outputs, pairs);
  AuditCounts counts;
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const SentenceEval& out = outputs[s];
    const IndexSeq src = to_indices(vocab, pairs[s].src);
    const IndexSeq tgt = to_indices(vocab, pairs[s].tgt);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (out.y_d[i] != 1) continue;
      const bool phon = out.y_r[i] == 1;
      const std::vector<int>& set = phon ? index.pc(src[i]) : index.vc(src[i]);
      if (phon)
        counts.predicted_phonological += 1;
      else
        counts.predicted_morphological += 1;
      if (set.size() <= 1) {
        (phon ? counts.not_in_pc : counts.not_in_vc) += 1;
      }
      if (!std::binary_search(set.begin(), set.end(), tgt[i])) {
        (phon ? counts.gold_filtered_out_pc : counts.gold_filtered_out_vc) += 1;
      }
    }
  }
  return counts;
}

EvalReport evaluate(const std::vector<SentenceEval>& outputs,
                    const std::vector<SentencePair>& pairs, const Vocab& vocab,
                    const ConfusionIndex& index) {
  EvalReport report;
  report.detection = sentence_metrics(outputs, pairs, vocab, MetricLevel::kDetection);
  report.correction = sentence_metrics(outputs, pairs, vocab, MetricLevel::kCorrection);
  report.subtasks = subtask_metrics(outputs, pairs, vocab, index);
  report.counts = audit(outputs, pairs, vocab, index);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  using json = nlohmann::ordered_json;
  auto prf = [](const Prf& m) {
    return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  };
  json j;
  j["format"] = "csckit-report";
  j["version"] = 1;
  j["detection"] = prf(report.detection);
  j["correction"] = prf(report.correction);
  j["subtasks"] = {{"detection", prf(report.subtasks.detection)},
                   {"reasoning", prf(report.subtasks.reasoning)},
                   {"searching", prf(report.subtasks.searching)}};
  j["counts"] = {{"predicted_phonological", report.counts.predicted_phonological},
                 {"predicted_morphological", report.counts.predicted_morphological},
                 {"not_in_pc", report.counts.not_in_pc},
                 {"not_in_vc", report.counts.not_in_vc},
                 {"gold_filtered_out_pc", report.counts.gold_filtered_out_pc},
                 {"gold_filtered_out_vc", report.counts.gold_filtered_out_vc}};
  return j.dump(1, '\t') + "\n";
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << report_to_json(report);
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace csc
