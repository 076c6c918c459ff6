#include "csckit/charkb.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "csckit/error.hpp"
#include "csckit/utf8.hpp"

#include <json.hpp>

namespace csc {

namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

void insert_sorted_unique(std::vector<int>& set, int value) {
  auto it = std::lower_bound(set.begin(), set.end(), value);
  if (it == set.end() || *it != value) set.insert(it, value);
}

}  // namespace

Vocab Vocab::from_chars(const std::vector<char32_t>& chars) {
  Vocab v;
  v.chars_ = {kPadChar, kUnkChar};
  for (char32_t c : chars) v.chars_.push_back(c);
  for (std::size_t i = 0; i < v.chars_.size(); ++i) {
    auto [it, inserted] = v.index_.emplace(v.chars_[i], static_cast<int>(i));
    if (!inserted) {
      throw DuplicateError("duplicate character '" + utf8_encode(v.chars_[i]) + "' in vocabulary");
    }
  }
  std::uint64_t h = fnv1a("csckit-vocab-v1");
  for (char32_t c : v.chars_) {
    h = fnv1a(utf8_encode(c), h);
    h = fnv1a("\x1f", h);
  }
  v.hash_ = h;
  return v;
}

char32_t Vocab::at(int index) const {
  if (index < 0 || index >= size()) {
    throw VocabError("vocab index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(size()) + ")");
  }
  return chars_[index];
}

int Vocab::index_or_unk(char32_t ch) const {
  auto it = index_.find(ch);
  return it == index_.end() ? kUnkIndex : it->second;
}

int Vocab::index_of(char32_t ch) const {
  auto it = index_.find(ch);
  if (it == index_.end()) {
    throw VocabError("character '" + utf8_encode(ch) + "' not in vocabulary");
  }
  return it->second;
}

std::uint64_t ConfusionIndex::content_hash() const {
  std::uint64_t h = fnv1a("csckit-confusion-v1");
  h = fnv1a_u64(vocab_hash, h);
  for (const auto* side : {&phonological, &visual}) {
    for (const auto& set : *side) {
      h = fnv1a_u64(set.size(), h);
      for (int m : set) h = fnv1a_u64(static_cast<std::uint64_t>(m), h);
    }
  }
  return h;
}

int edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = b.size();
  std::vector<int> row(n + 1);
  for (std::size_t j = 0; j <= n; ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      int sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({sub, row[j] + 1, row[j - 1] + 1});
    }
  }
  return row[n];
}

int edit_distance(std::string_view a, std::string_view b) {
  std::vector<int> va(a.begin(), a.end());
  std::vector<int> vb(b.begin(), b.end());
  return edit_distance(va, vb);
}

std::string strip_tone(const std::string& pinyin) {
  if (pinyin.size() < 2) throw ParseError("pinyin '" + pinyin + "' too short");
  char tone = pinyin.back();
  if (tone < '1' || tone > '5') {
    throw ParseError("pinyin '" + pinyin + "' missing tone digit 1-5");
  }
  std::string syllable = pinyin.substr(0, pinyin.size() - 1);
  for (char c : syllable) {
    if (c < 'a' || c > 'z') {
      throw ParseError("pinyin '" + pinyin + "' must match [a-z]+[1-5]");
    }
  }
  return syllable;
}

std::vector<CharRecord> load_char_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open character table '" + path + "'");

  std::vector<CharRecord> table;
  std::unordered_map<char32_t, int> seen;  // char -> first line
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);

    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(where + ": expected char<TAB>pinyin<TAB>strokes, got " +
                       std::to_string(fields.size()) + " fields");
    }
    auto chars = utf8_decode(fields[0], where);
    if (chars.size() != 1) {
      throw ParseError(where + ": character field must hold exactly one character");
    }
    CharRecord rec;
    rec.ch = chars[0];
    try {
      strip_tone(fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    rec.pinyin = fields[1];
    if (fields[2].empty()) throw ParseError(where + ": empty stroke sequence");
    for (char c : fields[2]) {
      if (c < '1' || c > '5') {
        throw ParseError(where + ": stroke codes must be digits 1-5, got '" +
                         std::string(1, c) + "'");
      }
      rec.strokes.push_back(c - '0');
    }
    auto [it, inserted] = seen.emplace(rec.ch, lineno);
    if (!inserted) {
      throw DuplicateError(where + ": character '" + fields[0] + "' already defined at line " +
                           std::to_string(it->second));
    }
    table.push_back(std::move(rec));
  }
  return table;
}

Vocab vocab_from_table(const std::vector<CharRecord>& table) {
  std::vector<char32_t> chars;
  chars.reserve(table.size());
  for (const auto& rec : table) chars.push_back(rec.ch);
  return Vocab::from_chars(chars);
}

bool pinyin_similar(const CharRecord& a, const CharRecord& b, const SimilarityPolicy& policy) {
  const std::string sa = strip_tone(a.pinyin);
  const std::string sb = strip_tone(b.pinyin);
  switch (policy.pinyin_mode) {
    case PinyinMode::kToneInsensitiveExact:
      return sa == sb;
    case PinyinMode::kEditDistance:
      return edit_distance(sa, sb) <= policy.pinyin_k;
  }
  return false;
}

bool stroke_similar(const CharRecord& a, const CharRecord& b, const SimilarityPolicy& policy) {
  const auto longer = std::max(a.strokes.size(), b.strokes.size());
  if (longer == 0) return true;
  const double normalized =
      static_cast<double>(edit_distance(a.strokes, b.strokes)) / static_cast<double>(longer);
  return normalized <= policy.stroke_tau;
}

ConfusionIndex build_confusion_index(const Vocab& vocab, const std::vector<CharRecord>& table,
                                     const SimilarityPolicy& policy) {
  if (policy.stroke_tau < 0.0 || policy.stroke_tau > 1.0) {
    throw ConfigError("stroke_tau must lie in [0,1]");
  }
  if (policy.pinyin_k < 0) throw ConfigError("pinyin_k must be nonnegative");

  // Records for vocab members only; extra table entries are ignored.
  std::vector<const CharRecord*> records(vocab.size(), nullptr);
  for (const auto& rec : table) {
    if (vocab.contains(rec.ch)) records[vocab.index_of(rec.ch)] = &rec;
  }
  std::string missing;
  for (int i = Vocab::kNumSpecials; i < vocab.size(); ++i) {
    if (records[i] == nullptr) {
      if (!missing.empty()) missing += ' ';
      missing += utf8_encode(vocab.at(i));
    }
  }
  if (!missing.empty()) {
    throw CoverageError("vocab characters missing from character table: " + missing);
  }

  ConfusionIndex index;
  index.vocab_hash = vocab.hash();
  index.phonological.assign(vocab.size(), {});
  index.visual.assign(vocab.size(), {});
  for (int i = 0; i < Vocab::kNumSpecials; ++i) {
    index.phonological[i] = {i};
    index.visual[i] = {i};
  }

  // Phonological side: exact mode groups by tone-stripped syllable, which is
  // equivalent to the all-pairs comparison but linear in vocab size. The edit
  // distance mode has no such factorization and stays quadratic.
  if (policy.pinyin_mode == PinyinMode::kToneInsensitiveExact) {
    std::unordered_map<std::string, std::vector<int>> buckets;
    for (int i = Vocab::kNumSpecials; i < vocab.size(); ++i) {
      buckets[strip_tone(records[i]->pinyin)].push_back(i);
    }
    for (auto& [syllable, members] : buckets) {
      std::sort(members.begin(), members.end());
      for (int i : members) index.phonological[i] = members;
    }
  } else {
    for (int i = Vocab::kNumSpecials; i < vocab.size(); ++i) {
      for (int j = Vocab::kNumSpecials; j < vocab.size(); ++j) {
        if (pinyin_similar(*records[i], *records[j], policy)) {
          index.phonological[i].push_back(j);
        }
      }
    }
  }

  for (int i = Vocab::kNumSpecials; i < vocab.size(); ++i) {
    for (int j = Vocab::kNumSpecials; j < vocab.size(); ++j) {
      if (stroke_similar(*records[i], *records[j], policy)) {
        index.visual[i].push_back(j);
      }
    }
  }

  // Self-membership regardless of policy quirks.
  for (int i = 0; i < vocab.size(); ++i) {
    insert_sorted_unique(index.phonological[i], i);
    insert_sorted_unique(index.visual[i], i);
  }
  return index;
}

ConfusionIndex merge_external_sets(const ConfusionIndex& index, const Vocab& vocab,
                                   const std::string& path, ConfusionKind kind,
                                   MergeStats* stats) {
  if (index.vocab_hash != vocab.hash()) {
    throw CompatError("confusion index was built for a different vocabulary");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open confusion file '" + path + "'");

  ConfusionIndex merged = index;
  auto& side = (kind == ConfusionKind::kPhonological) ? merged.phonological : merged.visual;
  MergeStats local;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw ParseError(where + ": expected char<TAB>candidates");
    }
    auto head = utf8_decode(fields[0], where);
    if (head.size() != 1) {
      throw ParseError(where + ": head field must hold exactly one character");
    }
    if (!vocab.contains(head[0])) {
      ++local.chars_skipped;
      continue;
    }
    const int head_index = vocab.index_of(head[0]);
    for (char32_t candidate : utf8_decode(fields[1], where)) {
      if (!vocab.contains(candidate)) {
        ++local.chars_skipped;
        continue;
      }
      const int cand_index = vocab.index_of(candidate);
      const auto before = side[head_index].size();
      insert_sorted_unique(side[head_index], cand_index);
      if (side[head_index].size() != before) ++local.pairs_added;
    }
  }
  if (stats != nullptr) *stats = local;
  return merged;
}

void save_confusion_index(const ConfusionIndex& index, const std::string& path) {
  json doc;
  doc["format"] = "csckit-confusion";
  doc["version"] = 1;
  doc["vocab_hash"] = hex64(index.vocab_hash);
  doc["vocab_size"] = index.size();
  doc["phonological"] = index.phonological;
  doc["visual"] = index.visual;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write confusion index '" + path + "'");
  out << doc.dump(1, '\t') << '\n';
  if (!out) throw IoError("error writing confusion index '" + path + "'");
}

ConfusionIndex load_confusion_index(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open confusion index '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (doc.at("format") != "csckit-confusion" || doc.at("version") != 1) {
      throw ParseError(path + ": not a version-1 confusion index");
    }
    ConfusionIndex index;
    index.vocab_hash = parse_hex64(doc.at("vocab_hash").get<std::string>());
    if (index.vocab_hash != vocab.hash()) {
      throw CompatError(path + ": confusion index vocab hash mismatch");
    }
    index.phonological = doc.at("phonological").get<std::vector<std::vector<int>>>();
    index.visual = doc.at("visual").get<std::vector<std::vector<int>>>();
    if (static_cast<int>(index.phonological.size()) != vocab.size() ||
        static_cast<int>(index.visual.size()) != vocab.size()) {
      throw ShapeError(path + ": adjacency list size does not match vocab");
    }
    return index;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace csc
