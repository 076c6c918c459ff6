#include "csckit/transfer.hpp"

#include "csckit/error.hpp"

namespace csc {

DRModule extract_dr(const ModelState& model) {
  DRModule dr;
  dr.config = model.config;
  dr.encoder = model.encoder;
  dr.detection = model.heads.detection;
  dr.reasoning = model.heads.reasoning;
  dr.vocab_hash = model.vocab_hash;
  dr.confusion_hash = model.confusion_hash;
  return dr;
}

CorrectionModel extract_correction(const ModelState& model) {
  CorrectionModel cm;
  cm.config = model.config;
  cm.encoder = model.encoder;
  cm.output = model.heads.searching;
  cm.vocab_hash = model.vocab_hash;
  return cm;
}

DRInference dr_infer(std::span<const int> x, const DRModule& dr, const ConfusionIndex& index) {
  if (dr.confusion_hash != index.content_hash())
    throw CompatError("module expects confusion index " + std::to_string(dr.confusion_hash) +
                      " but data hashes to " + std::to_string(index.content_hash()));
  if (static_cast<int>(index.phonological.size()) != static_cast<int>(dr.encoder.embedding.rows()))
    throw CompatError("confusion index size does not match module vocab");
  DRInference out;
  const Matrix hidden = encode(dr.encoder, dr.config, x);
  out.y_d = argmax_rows(head_probs(dr.detection, hidden));
  out.y_r = argmax_rows(head_probs(dr.reasoning, hidden));
  out.mask = build_search_matrix(x, out.y_d, out.y_r, index);
  return out;
}

CombinedResult combined_predict(std::span<const int> x, const DRModule& dr,
                                const CorrectionModel& model, const ConfusionIndex& index,
                                const TransferOptions& opts) {
  if (dr.vocab_hash != model.vocab_hash)
    throw CompatError("module vocab " + std::to_string(dr.vocab_hash) +
                      " does not match corrector vocab " + std::to_string(model.vocab_hash));
  if (dr.confusion_hash != index.content_hash())
    throw CompatError("module expects confusion index " + std::to_string(dr.confusion_hash) +
                      " but data hashes to " + std::to_string(index.content_hash()));
  if (!opts.oracle_d.empty() && opts.oracle_d.size() != x.size())
    throw ShapeError("oracle detection labels length mismatch");
  if (!opts.oracle_r.empty() && opts.oracle_r.size() != x.size())
    throw ShapeError("oracle reasoning labels length mismatch");

  CombinedResult result;
  {
    const Matrix hidden = encode(dr.encoder, dr.config, x);
    result.y_d = argmax_rows(head_probs(dr.detection, hidden));
    result.y_r = argmax_rows(head_probs(dr.reasoning, hidden));
  }
  if (!opts.oracle_d.empty())
    result.y_d.assign(opts.oracle_d.begin(), opts.oracle_d.end());
  if (!opts.oracle_r.empty())
    result.y_r.assign(opts.oracle_r.begin(), opts.oracle_r.end());

  const int vocab = static_cast<int>(model.encoder.embedding.rows());
  SearchMatrix mask = opts.disable_mask
                          ? SearchMatrix::all_ones(static_cast<int>(x.size()), vocab)
                          : build_search_matrix(x, result.y_d, result.y_r, index);

  const Matrix hidden_prime = encode(model.encoder, model.config, x);
  const Matrix p_prime = head_probs(model.output, hidden_prime);
  const Matrix p = apply_mask(p_prime, mask, /*renormalize=*/false);
  result.corrected.reserve(x.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    result.corrected.push_back(argmax_row(p, static_cast<int>(i)));
  return result;
}

}  // namespace csc
