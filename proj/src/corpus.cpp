#include "csckit/corpus.hpp"

#include <array>
#include <fstream>

#include <json.hpp>

#include "csckit/error.hpp"
#include "csckit/rng.hpp"
#include "csckit/utf8.hpp"

namespace csc {

namespace {

constexpr int kChainFanout = 3;       // likely successors per character
constexpr double kChainFollow = 0.9;  // probability of taking a likely successor

// Deterministic successor table, a pure function of the corpus seed.
std::vector<std::array<int, kChainFanout>> chain_table(std::uint64_t seed, int vocab_size) {
  Rng rng(seed ^ fnv1a("chain-table"));
  const int regular = vocab_size - Vocab::kNumSpecials;
  std::vector<std::array<int, kChainFanout>> table(static_cast<std::size_t>(vocab_size));
  for (int v = 0; v < vocab_size; ++v) {
    for (int k = 0; k < kChainFanout; ++k)
      table[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)] =
          Vocab::kNumSpecials + rng.index(regular);
  }
  return table;
}

}  // namespace

void CorpusSpec::validate() const {
  if (sentences < 0) throw ConfigError("sentence count must be nonnegative");
  if (min_len < 1) throw ConfigError("minimum length must be at least 1");
  if (max_len < min_len) throw ConfigError("length range is empty");
  if (error_rate < 0 || error_rate > 1) throw ConfigError("error rate must be in [0, 1]");
  if (phonological_ratio < 0 || phonological_ratio > 1)
    throw ConfigError("phonological ratio must be in [0, 1]");
}

std::vector<SentencePair> synthesize(const CorpusSpec& spec, const Vocab& vocab,
                                     const ConfusionIndex& index, SynthStats* stats) {
  spec.validate();
  if (index.vocab_hash != vocab.hash())
    throw CompatError("confusion index was built for vocab " + std::to_string(index.vocab_hash) +
                      " but the supplied vocab hashes to " + std::to_string(vocab.hash()));
  const int regular = vocab.size() - Vocab::kNumSpecials;
  if (regular <= 0) throw ConfigError("vocabulary has no regular characters");

  const std::vector<std::array<int, kChainFanout>> chain =
      spec.text_model == TextModel::kChain ? chain_table(spec.seed, vocab.size())
                                           : std::vector<std::array<int, kChainFanout>>{};
  Rng rng(spec.seed);
  SynthStats local;
  std::vector<SentencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(spec.sentences));

  for (int s = 0; s < spec.sentences; ++s) {
    const int len = spec.min_len + rng.index(spec.max_len - spec.min_len + 1);
    IndexSeq tgt(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
      if (spec.text_model == TextModel::kChain && i > 0 && rng.bernoulli(kChainFollow)) {
        const auto& next = chain[static_cast<std::size_t>(tgt[static_cast<std::size_t>(i - 1)])];
        tgt[static_cast<std::size_t>(i)] = next[static_cast<std::size_t>(rng.index(kChainFanout))];
      } else {
        tgt[static_cast<std::size_t>(i)] = Vocab::kNumSpecials + rng.index(regular);
      }
    }
    IndexSeq src = tgt;
    for (int i = 0; i < len; ++i) {
      local.positions += 1;
      if (!rng.bernoulli(spec.error_rate)) continue;
      const int t = tgt[static_cast<std::size_t>(i)];
      bool phon = rng.bernoulli(spec.phonological_ratio);
      auto partners = [&](bool use_pc) {
        const std::vector<int>& set = use_pc ? index.pc(t) : index.vc(t);
        std::vector<int> out;
        out.reserve(set.size());
        for (int c : set)
          if (c != t) out.push_back(c);
        return out;
      };
      std::vector<int> cands = partners(phon);
      if (cands.empty()) {
        phon = !phon;
        cands = partners(phon);
      }
      if (cands.empty()) {
        local.skipped_uncorruptable += 1;
        continue;
      }
      src[static_cast<std::size_t>(i)] = cands[static_cast<std::size_t>(rng.index(
          static_cast<int>(cands.size())))];
      local.corrupted += 1;
      (phon ? local.phonological : local.visual) += 1;
    }
    SentencePair pair;
    pair.src.reserve(src.size());
    pair.tgt.reserve(tgt.size());
    for (int idx : src) pair.src.push_back(vocab.at(idx));
    for (int idx : tgt) pair.tgt.push_back(vocab.at(idx));
    pairs.push_back(std::move(pair));
  }
  if (stats) *stats = local;
  return pairs;
}

std::vector<SentencePair> load_parallel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<SentencePair> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string context = path + ":" + std::to_string(lineno);
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError(context + ": expected exactly one tab separating source and target");
    const std::vector<char32_t> src = utf8_decode(line.substr(0, tab), context);
    const std::vector<char32_t> tgt = utf8_decode(line.substr(tab + 1), context);
    if (src.empty() || tgt.empty()) throw LengthError(context + ": empty side");
    if (src.size() != tgt.size())
      throw LengthError(context + ": source has " + std::to_string(src.size()) +
                        " characters but target has " + std::to_string(tgt.size()));
    SentencePair pair;
    pair.src.assign(src.begin(), src.end());
    pair.tgt.assign(tgt.begin(), tgt.end());
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void save_parallel(const std::vector<SentencePair>& pairs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const SentencePair& pair : pairs)
    out << utf8_encode(pair.src) << '\t' << utf8_encode(pair.tgt) << '\n';
  if (!out) throw IoError("failed while writing " + path);
}

void write_corpus_sidecar(const CorpusSpec& spec, const SynthStats& stats,
                          const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "csckit-corpus-meta";
  j["version"] = 1;
  j["spec"] = {{"sentences", spec.sentences},
               {"min_len", spec.min_len},
               {"max_len", spec.max_len},
               {"error_rate", spec.error_rate},
               {"phonological_ratio", spec.phonological_ratio},
               {"seed", spec.seed},
               {"text_model", spec.text_model == TextModel::kChain ? "chain" : "uniform"}};
  j["stats"] = {{"positions", stats.positions},
                {"corrupted", stats.corrupted},
                {"phonological", stats.phonological},
                {"visual", stats.visual},
                {"skipped_uncorruptable", stats.skipped_uncorruptable}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(1, '\t') << '\n';
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace csc
