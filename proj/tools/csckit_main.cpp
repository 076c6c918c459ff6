#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csckit/charkb.hpp"
#include "csckit/corpus.hpp"
#include "csckit/error.hpp"
#include "csckit/evalsuite.hpp"
#include "csckit/labels.hpp"
#include "csckit/model.hpp"
#include "csckit/train.hpp"
#include "csckit/transfer.hpp"
#include "csckit/utf8.hpp"

namespace {

using csc::ConfusionIndex;
using csc::ModelState;
using csc::SentencePair;
using csc::Vocab;
using json = nlohmann::ordered_json;

// Every artifact-writing subcommand drops a sidecar with the values that
// produced the artifact, so outputs are self-describing.
void write_run_sidecar(const std::string& artifact_path, const std::string& command,
                       const json& config) {
  json j;
  j["format"] = "csckit-run";
  j["version"] = 1;
  j["command"] = command;
  j["config"] = config;
  const std::string path = artifact_path + ".meta.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw csc::IoError("cannot open " + path + " for writing");
  out << j.dump(1, '\t') << '\n';
  if (!out) throw csc::IoError("failed while writing " + path);
}

struct KnowledgeArgs {
  std::string table_path;
  std::string confusion_path;

  void attach(CLI::App& cmd) {
    cmd.add_option("--table", table_path, "character table (char<TAB>pinyin<TAB>strokes)")
        ->required();
    cmd.add_option("--confusion", confusion_path, "confusion index file")->required();
  }

  std::pair<Vocab, ConfusionIndex> load() const {
    const std::vector<csc::CharRecord> table = csc::load_char_table(table_path);
    Vocab vocab = csc::vocab_from_table(table);
    ConfusionIndex index = csc::load_confusion_index(confusion_path, vocab);
    return {std::move(vocab), std::move(index)};
  }
};

struct OracleArgs {
  bool use_gold_d = false;
  bool use_gold_r = false;
  bool disable_mask = false;

  void attach(CLI::App& cmd) {
    cmd.add_flag("--use-gold-d", use_gold_d, "build masks from gold detection labels");
    cmd.add_flag("--use-gold-r", use_gold_r, "build masks from gold reasoning labels");
    cmd.add_flag("--disable-mask", disable_mask, "skip masking (all-ones constraint)");
  }

  json to_json() const {
    return json{{"use_gold_d", use_gold_d},
                {"use_gold_r", use_gold_r},
                {"disable_mask", disable_mask}};
  }
};

// Shared inference loop: native model path or a donor/corrector split.
std::vector<csc::SentenceEval> run_pipeline(const csc::DRModule& dr,
                                            const csc::CorrectionModel& corrector,
                                            const ConfusionIndex& index, const Vocab& vocab,
                                            const std::vector<SentencePair>& pairs,
                                            const OracleArgs& oracle) {
  std::vector<csc::SentenceEval> outputs;
  outputs.reserve(pairs.size());
  for (const SentencePair& pair : pairs) {
    const csc::IndexSeq x = csc::to_indices(vocab, pair.src);
    csc::TransferOptions opts;
    opts.disable_mask = oracle.disable_mask;
    csc::LabelSet labels;
    if (oracle.use_gold_d || oracle.use_gold_r) {
      labels = csc::derive_labels(pair, vocab, index);
      if (oracle.use_gold_d) opts.oracle_d = labels.detection;
      if (oracle.use_gold_r) opts.oracle_r = labels.reasoning;
    }
    const csc::CombinedResult result = csc::combined_predict(x, dr, corrector, index, opts);
    outputs.push_back({result.y_d, result.y_r, result.corrected});
  }
  return outputs;
}

void write_predictions(const std::vector<SentencePair>& pairs,
                       const std::vector<csc::SentenceEval>& outputs, const Vocab& vocab,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw csc::IoError("cannot open " + path + " for writing");
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    std::u32string corrected;
    corrected.reserve(outputs[s].corrected.size());
    for (int idx : outputs[s].corrected) corrected.push_back(vocab.at(idx));
    out << csc::utf8_encode(pairs[s].src) << '\t' << csc::utf8_encode(corrected) << '\n';
  }
  if (!out) throw csc::IoError("failed while writing " + path);
}

// Prediction inputs may be parallel (src<TAB>tgt) or bare source lines; a
// bare line gets its source as the stand-in reference.
std::vector<SentencePair> load_prediction_input(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw csc::IoError("cannot open " + path);
  bool has_tab = false;
  bool has_content = false;
  std::string line;
  while (std::getline(probe, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    has_content = true;
    if (line.find('\t') != std::string::npos) has_tab = true;
  }
  if (!has_content) return {};
  if (has_tab) return csc::load_parallel(path);
  std::ifstream in(path, std::ios::binary);
  std::vector<SentencePair> pairs;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<char32_t> chars =
        csc::utf8_decode(line, path + ":" + std::to_string(lineno));
    SentencePair pair;
    pair.src.assign(chars.begin(), chars.end());
    pair.tgt = pair.src;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

int run(int argc, char** argv) {
  CLI::App app{"Decomposed Chinese spelling correction toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read defaults from a TOML/INI file");
  app.get_config_ptr()->configurable(false);

  // build-confusion ---------------------------------------------------------
  auto* build_cmd = app.add_subcommand("build-confusion", "build a confusion index from a table");
  std::string bc_table, bc_output, bc_pinyin_mode = "exact";
  std::string bc_merge_phon, bc_merge_vis;
  int bc_pinyin_k = 1;
  double bc_stroke_tau = 0.25;
  build_cmd->add_option("--table", bc_table, "character table")->required();
  build_cmd->add_option("--output", bc_output, "output confusion index path")->required();
  build_cmd->add_option("--pinyin-mode", bc_pinyin_mode, "exact|edit")
      ->check(CLI::IsMember({"exact", "edit"}));
  build_cmd->add_option("--pinyin-k", bc_pinyin_k, "edit-distance bound for --pinyin-mode edit");
  build_cmd->add_option("--stroke-tau", bc_stroke_tau, "normalized stroke distance threshold");
  build_cmd->add_option("--merge-phonological", bc_merge_phon, "external pair file to union in");
  build_cmd->add_option("--merge-visual", bc_merge_vis, "external pair file to union in");

  // synth -------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "synthesize a parallel corpus");
  KnowledgeArgs synth_kb;
  synth_kb.attach(*synth_cmd);
  std::string sy_output, sy_text_model = "uniform";
  csc::CorpusSpec sy_spec;
  sy_spec.sentences = 1000;
  sy_spec.min_len = 4;
  sy_spec.max_len = 12;
  sy_spec.error_rate = 0.15;
  synth_cmd->add_option("--output", sy_output, "output corpus path")->required();
  synth_cmd->add_option("--sentences", sy_spec.sentences, "sentence count");
  synth_cmd->add_option("--min-len", sy_spec.min_len, "minimum sentence length");
  synth_cmd->add_option("--max-len", sy_spec.max_len, "maximum sentence length");
  synth_cmd->add_option("--error-rate", sy_spec.error_rate, "per-position corruption rate");
  synth_cmd->add_option("--phonological-ratio", sy_spec.phonological_ratio,
                        "fraction of corruptions drawn from the phonological set");
  synth_cmd->add_option("--seed", sy_spec.seed, "generator seed");
  synth_cmd->add_option("--text-model", sy_text_model, "uniform|chain")
      ->check(CLI::IsMember({"uniform", "chain"}));

  // train -------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model on a parallel corpus");
  KnowledgeArgs train_kb;
  train_kb.attach(*train_cmd);
  std::string tr_corpus, tr_output, tr_log, tr_init, tr_gate = "predicted";
  csc::TrainConfig tr_config;
  csc::EncoderConfig tr_encoder;
  bool tr_freeze_encoder = false;
  std::uint64_t tr_init_seed = 0;
  train_cmd->add_option("--corpus", tr_corpus, "training corpus (src<TAB>tgt)")->required();
  train_cmd->add_option("--output", tr_output, "output checkpoint path")->required();
  train_cmd->add_option("--log", tr_log, "per-epoch log path (line-delimited records)");
  train_cmd->add_option("--init-model", tr_init, "checkpoint to continue from");
  train_cmd->add_option("--epochs", tr_config.epochs, "training epochs");
  train_cmd->add_option("--lr", tr_config.learning_rate, "learning rate");
  train_cmd->add_option("--momentum", tr_config.momentum, "momentum coefficient");
  train_cmd->add_option("--batch-size", tr_config.batch_size, "mini-batch size");
  train_cmd->add_option("--seed", tr_config.seed, "shuffle seed");
  train_cmd->add_option("--alpha", tr_config.weights.alpha, "detection loss weight");
  train_cmd->add_option("--beta", tr_config.weights.beta, "reasoning loss weight");
  train_cmd->add_option("--gamma", tr_config.weights.gamma, "searching loss weight");
  train_cmd->add_option("--gate", tr_gate, "reasoning-loss gate: predicted|gold")
      ->check(CLI::IsMember({"predicted", "gold"}));
  train_cmd->add_flag("--freeze-encoder", tr_freeze_encoder,
                      "train heads only (fixed-feature encoder)");
  train_cmd->add_option("--init-seed", tr_init_seed, "parameter init seed for a fresh model");
  train_cmd->add_option("--embedding-dim", tr_encoder.embedding_dim, "fresh-model embedding dim");
  train_cmd->add_option("--hidden-dim", tr_encoder.hidden_dim, "fresh-model hidden dim");
  train_cmd->add_option("--window", tr_encoder.window, "fresh-model context window");
  train_cmd->add_option("--max-len", tr_encoder.max_len, "fresh-model max sentence length");

  // predict -----------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "correct sentences with a checkpoint");
  KnowledgeArgs predict_kb;
  predict_kb.attach(*predict_cmd);
  OracleArgs predict_oracle;
  predict_oracle.attach(*predict_cmd);
  std::string pr_model, pr_input, pr_output;
  predict_cmd->add_option("--model", pr_model, "model checkpoint")->required();
  predict_cmd->add_option("--input", pr_input, "input sentences (bare or src<TAB>tgt)")
      ->required();
  predict_cmd->add_option("--output", pr_output, "output predictions (src<TAB>prediction)")
      ->required();

  // evaluate ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a parallel corpus");
  KnowledgeArgs eval_kb;
  eval_kb.attach(*eval_cmd);
  OracleArgs eval_oracle;
  eval_oracle.attach(*eval_cmd);
  std::string ev_model, ev_corpus, ev_report;
  eval_cmd->add_option("--model", ev_model, "model checkpoint")->required();
  eval_cmd->add_option("--corpus", ev_corpus, "evaluation corpus (src<TAB>tgt)")->required();
  eval_cmd->add_option("--report", ev_report, "report output path");

  // audit -------------------------------------------------------------------
  auto* audit_cmd = app.add_subcommand("audit", "confusion-set audit counts for a checkpoint");
  KnowledgeArgs audit_kb;
  audit_kb.attach(*audit_cmd);
  OracleArgs audit_oracle;
  audit_oracle.attach(*audit_cmd);
  std::string au_model, au_corpus;
  audit_cmd->add_option("--model", au_model, "model checkpoint")->required();
  audit_cmd->add_option("--corpus", au_corpus, "corpus (src<TAB>tgt)")->required();

  // transfer ----------------------------------------------------------------
  auto* transfer_cmd =
      app.add_subcommand("transfer", "drive one model's corrector with another's D-R module");
  KnowledgeArgs transfer_kb;
  transfer_kb.attach(*transfer_cmd);
  OracleArgs transfer_oracle;
  transfer_oracle.attach(*transfer_cmd);
  std::string xf_dr, xf_corrector, xf_input, xf_output;
  transfer_cmd->add_option("--dr-model", xf_dr, "checkpoint donating the D-R module")
      ->required();
  transfer_cmd->add_option("--correction-model", xf_corrector,
                           "checkpoint donating the corrector")
      ->required();
  transfer_cmd->add_option("--input", xf_input, "input sentences (bare or src<TAB>tgt)")
      ->required();
  transfer_cmd->add_option("--output", xf_output, "output predictions (src<TAB>prediction)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (build_cmd->parsed()) {
    const std::vector<csc::CharRecord> table = csc::load_char_table(bc_table);
    const Vocab vocab = csc::vocab_from_table(table);
    csc::SimilarityPolicy policy;
    policy.pinyin_mode = bc_pinyin_mode == "edit" ? csc::PinyinMode::kEditDistance
                                                  : csc::PinyinMode::kToneInsensitiveExact;
    policy.pinyin_k = bc_pinyin_k;
    policy.stroke_tau = bc_stroke_tau;
    ConfusionIndex index = csc::build_confusion_index(vocab, table, policy);
    csc::MergeStats merge_stats;
    if (!bc_merge_phon.empty())
      index = csc::merge_external_sets(index, vocab, bc_merge_phon,
                                       csc::ConfusionKind::kPhonological, &merge_stats);
    if (!bc_merge_vis.empty())
      index = csc::merge_external_sets(index, vocab, bc_merge_vis, csc::ConfusionKind::kVisual,
                                       &merge_stats);
    csc::save_confusion_index(index, bc_output);
    write_run_sidecar(bc_output, "build-confusion",
                      json{{"table", bc_table},
                           {"pinyin_mode", bc_pinyin_mode},
                           {"pinyin_k", bc_pinyin_k},
                           {"stroke_tau", bc_stroke_tau},
                           {"merge_phonological", bc_merge_phon},
                           {"merge_visual", bc_merge_vis},
                           {"pairs_merged", merge_stats.pairs_added},
                           {"merge_chars_skipped", merge_stats.chars_skipped}});
    std::cout << "wrote " << bc_output << " (vocab " << vocab.size() << ")\n";
    return 0;
  }

  if (synth_cmd->parsed()) {
    auto [vocab, index] = synth_kb.load();
    sy_spec.text_model =
        sy_text_model == "chain" ? csc::TextModel::kChain : csc::TextModel::kUniform;
    csc::SynthStats stats;
    const std::vector<SentencePair> pairs = csc::synthesize(sy_spec, vocab, index, &stats);
    csc::save_parallel(pairs, sy_output);
    csc::write_corpus_sidecar(sy_spec, stats, sy_output + ".meta.json");
    std::cout << "wrote " << sy_output << " (" << pairs.size() << " sentences, "
              << stats.corrupted << " corruptions)\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    auto [vocab, index] = train_kb.load();
    tr_config.gate = tr_gate == "gold" ? csc::GateMode::kGold : csc::GateMode::kPredicted;
    tr_config.train_encoder = !tr_freeze_encoder;
    const std::vector<SentencePair> corpus = csc::load_parallel(tr_corpus);
    if (corpus.empty()) std::cerr << "warning: training corpus " << tr_corpus << " is empty\n";
    ModelState model = tr_init.empty() ? csc::init_model(tr_encoder, vocab, index, tr_init_seed)
                                       : csc::load_model(tr_init);
    csc::check_model_compat(model, vocab, index);
    const std::vector<csc::EpochRecord> log = csc::fit(corpus, model, tr_config, vocab, index);
    csc::save_model(model, tr_output);
    if (!tr_log.empty()) csc::write_epoch_log(log, tr_log);
    write_run_sidecar(
        tr_output, "train",
        json{{"table", train_kb.table_path},
             {"confusion", train_kb.confusion_path},
             {"corpus", tr_corpus},
             {"init_model", tr_init},
             {"init_seed", tr_init_seed},
             {"epochs", tr_config.epochs},
             {"lr", tr_config.learning_rate},
             {"momentum", tr_config.momentum},
             {"batch_size", tr_config.batch_size},
             {"seed", tr_config.seed},
             {"alpha", tr_config.weights.alpha},
             {"beta", tr_config.weights.beta},
             {"gamma", tr_config.weights.gamma},
             {"gate", tr_gate},
             {"train_encoder", tr_config.train_encoder},
             {"encoder",
              json{{"embedding_dim", model.config.embedding_dim},
                   {"hidden_dim", model.config.hidden_dim},
                   {"window", model.config.window},
                   {"max_len", model.config.max_len}}}});
    if (!log.empty())
      std::cout << "trained " << tr_config.epochs << " epochs, final loss "
                << log.back().loss_total << "\n";
    else
      std::cout << "trained 0 epochs\n";
    return 0;
  }

  if (predict_cmd->parsed()) {
    auto [vocab, index] = predict_kb.load();
    const ModelState model = csc::load_model(pr_model);
    csc::check_model_compat(model, vocab, index);
    const std::vector<SentencePair> pairs = load_prediction_input(pr_input);
    if (pairs.empty()) std::cerr << "warning: input " << pr_input << " is empty\n";
    const auto outputs = run_pipeline(csc::extract_dr(model), csc::extract_correction(model),
                                      index, vocab, pairs, predict_oracle);
    write_predictions(pairs, outputs, vocab, pr_output);
    json cfg = predict_oracle.to_json();
    cfg["model"] = pr_model;
    cfg["input"] = pr_input;
    write_run_sidecar(pr_output, "predict", cfg);
    std::cout << "wrote " << pr_output << " (" << pairs.size() << " sentences)\n";
    return 0;
  }

  if (eval_cmd->parsed() || audit_cmd->parsed()) {
    const bool full = eval_cmd->parsed();
    KnowledgeArgs& kb = full ? eval_kb : audit_kb;
    OracleArgs& oracle = full ? eval_oracle : audit_oracle;
    const std::string model_path = full ? ev_model : au_model;
    const std::string corpus_path = full ? ev_corpus : au_corpus;
    auto [vocab, index] = kb.load();
    const ModelState model = csc::load_model(model_path);
    csc::check_model_compat(model, vocab, index);
    const std::vector<SentencePair> pairs = csc::load_parallel(corpus_path);
    if (pairs.empty()) std::cerr << "warning: corpus " << corpus_path << " is empty\n";
    const auto outputs = run_pipeline(csc::extract_dr(model), csc::extract_correction(model),
                                      index, vocab, pairs, oracle);
    if (full) {
      const csc::EvalReport report = csc::evaluate(outputs, pairs, vocab, index);
      const std::string text = csc::report_to_json(report);
      std::cout << text;
      if (!ev_report.empty()) {
        csc::save_report(report, ev_report);
        json cfg = oracle.to_json();
        cfg["model"] = ev_model;
        cfg["corpus"] = ev_corpus;
        write_run_sidecar(ev_report, "evaluate", cfg);
      }
    } else {
      const csc::AuditCounts counts = csc::audit(outputs, pairs, vocab, index);
      json j{{"predicted_phonological", counts.predicted_phonological},
             {"predicted_morphological", counts.predicted_morphological},
             {"not_in_pc", counts.not_in_pc},
             {"not_in_vc", counts.not_in_vc},
             {"gold_filtered_out_pc", counts.gold_filtered_out_pc},
             {"gold_filtered_out_vc", counts.gold_filtered_out_vc}};
      std::cout << j.dump(1, '\t') << "\n";
    }
    return 0;
  }

  if (transfer_cmd->parsed()) {
    auto [vocab, index] = transfer_kb.load();
    const ModelState dr_model = csc::load_model(xf_dr);
    const ModelState corr_model = csc::load_model(xf_corrector);
    csc::check_model_compat(dr_model, vocab, index);
    csc::check_model_compat(corr_model, vocab, index);
    const std::vector<SentencePair> pairs = load_prediction_input(xf_input);
    if (pairs.empty()) std::cerr << "warning: input " << xf_input << " is empty\n";
    const auto outputs = run_pipeline(csc::extract_dr(dr_model),
                                      csc::extract_correction(corr_model), index, vocab, pairs,
                                      transfer_oracle);
    write_predictions(pairs, outputs, vocab, xf_output);
    json cfg = transfer_oracle.to_json();
    cfg["dr_model"] = xf_dr;
    cfg["correction_model"] = xf_corrector;
    cfg["input"] = xf_input;
    write_run_sidecar(xf_output, "transfer", cfg);
    std::cout << "wrote " << xf_output << " (" << pairs.size() << " sentences)\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const csc::Error& e) {
    std::cerr << e.what() << "\n";  // already formatted as "<class>: <message>"
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal: " << e.what() << "\n";
    return 64;
  }
}
