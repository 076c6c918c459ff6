#include "csckit/model.hpp"

#include <fstream>

#include <json.hpp>

#include "csckit/error.hpp"

namespace csc {

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json row = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v(i));
  return row;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ParseError(std::string("checkpoint field ") + what + " is not a nonempty array");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ParseError(std::string("checkpoint field ") + what + " has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(c)) = j[i][c].get<Scalar>();
  }
  return m;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ParseError(std::string("checkpoint field ") + what + " is not a nonempty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<Scalar>();
  return v;
}

json layer_to_json(const LinearLayer& l) {
  return json{{"weight", matrix_to_json(l.weight)}, {"bias", vector_to_json(l.bias)}};
}

LinearLayer layer_from_json(const json& j, const char* what) {
  LinearLayer l;
  l.weight = matrix_from_json(j.at("weight"), what);
  l.bias = vector_from_json(j.at("bias"), what);
  return l;
}

constexpr std::uint64_t kHeadSeedSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

ModelState init_model(const EncoderConfig& config, const Vocab& vocab,
                      const ConfusionIndex& index, std::uint64_t seed) {
  config.validate();
  if (index.vocab_hash != vocab.hash())
    throw CompatError("confusion index was built for vocab " + std::to_string(index.vocab_hash) +
                      " but the supplied vocab hashes to " + std::to_string(vocab.hash()));
  ModelState m;
  m.config = config;
  m.encoder = init_encoder_params(config, vocab.size(), seed);
  m.heads = init_head_params(config.hidden_dim, vocab.size(), seed ^ kHeadSeedSalt);
  m.vocab_hash = vocab.hash();
  m.confusion_hash = index.content_hash();
  m.seed = seed;
  return m;
}

IndexSeq ForwardResult::corrected() const {
  IndexSeq out;
  out.reserve(static_cast<std::size_t>(p_masked.rows()));
  for (Eigen::Index i = 0; i < p_masked.rows(); ++i)
    out.push_back(argmax_row(p_masked, static_cast<int>(i)));
  return out;
}

ForwardResult forward_sentence(const ModelState& model, const ConfusionIndex& index,
                               std::span<const int> x, const ForwardOptions& opts) {
  if (static_cast<int>(index.phonological.size()) != model.vocab_size())
    throw CompatError("confusion index size " + std::to_string(index.phonological.size()) +
                      " does not match model vocab " + std::to_string(model.vocab_size()));
  ForwardResult r;
  r.hidden = encode(model.encoder, model.config, x);
  r.p_d = head_probs(model.heads.detection, r.hidden);
  r.p_r = head_probs(model.heads.reasoning, r.hidden);
  r.p_s = head_probs(model.heads.searching, r.hidden);
  r.y_d = argmax_rows(r.p_d);
  r.y_r = argmax_rows(r.p_r);
  if (!opts.oracle_d.empty() && opts.oracle_d.size() != x.size())
    throw ShapeError("oracle detection labels length mismatch");
  if (!opts.oracle_r.empty() && opts.oracle_r.size() != x.size())
    throw ShapeError("oracle reasoning labels length mismatch");
  std::span<const int> d = opts.oracle_d.empty() ? std::span<const int>(r.y_d) : opts.oracle_d;
  std::span<const int> rr = opts.oracle_r.empty() ? std::span<const int>(r.y_r) : opts.oracle_r;
  if (opts.disable_mask)
    r.mask = SearchMatrix::all_ones(static_cast<int>(x.size()), model.vocab_size());
  else
    r.mask = build_search_matrix(x, d, rr, index);
  r.p_masked = apply_mask(r.p_s, r.mask, opts.renormalize);
  return r;
}

void save_model(const ModelState& model, const std::string& path) {
  json j;
  j["format"] = "csckit-model";
  j["version"] = 1;
  j["vocab_hash"] = model.vocab_hash;
  j["confusion_hash"] = model.confusion_hash;
  j["seed"] = model.seed;
  j["epochs_trained"] = model.epochs_trained;
  j["config"] = {{"embedding_dim", model.config.embedding_dim},
                 {"hidden_dim", model.config.hidden_dim},
                 {"window", model.config.window},
                 {"max_len", model.config.max_len}};
  j["encoder"] = {{"embedding", matrix_to_json(model.encoder.embedding)},
                  {"proj", matrix_to_json(model.encoder.proj)},
                  {"bias", vector_to_json(model.encoder.bias)}};
  j["heads"] = {{"detection", layer_to_json(model.heads.detection)},
                {"reasoning", layer_to_json(model.heads.reasoning)},
                {"searching", layer_to_json(model.heads.searching)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(1, '\t') << '\n';
  if (!out) throw IoError("failed while writing " + path);
}

ModelState load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("invalid checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "csckit-model")
      throw ParseError(path + " is not a model checkpoint");
    if (j.at("version").get<int>() != 1)
      throw ParseError("unsupported checkpoint version in " + path);
    ModelState m;
    m.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
    m.confusion_hash = j.at("confusion_hash").get<std::uint64_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epochs_trained = j.at("epochs_trained").get<int>();
    const json& c = j.at("config");
    m.config.embedding_dim = c.at("embedding_dim").get<int>();
    m.config.hidden_dim = c.at("hidden_dim").get<int>();
    m.config.window = c.at("window").get<int>();
    m.config.max_len = c.at("max_len").get<int>();
    m.config.validate();
    const json& e = j.at("encoder");
    m.encoder.embedding = matrix_from_json(e.at("embedding"), "encoder.embedding");
    m.encoder.proj = matrix_from_json(e.at("proj"), "encoder.proj");
    m.encoder.bias = vector_from_json(e.at("bias"), "encoder.bias");
    const json& h = j.at("heads");
    m.heads.detection = layer_from_json(h.at("detection"), "heads.detection");
    m.heads.reasoning = layer_from_json(h.at("reasoning"), "heads.reasoning");
    m.heads.searching = layer_from_json(h.at("searching"), "heads.searching");
    if (m.encoder.proj.rows() != m.config.hidden_dim ||
        m.encoder.proj.cols() != m.config.concat_dim() ||
        m.encoder.embedding.cols() != m.config.embedding_dim)
      throw ShapeError("checkpoint " + path + " has inconsistent encoder shapes");
    if (m.heads.detection.weight.rows() != 2 || m.heads.reasoning.weight.rows() != 2 ||
        m.heads.searching.weight.rows() != m.encoder.embedding.rows() ||
        m.heads.detection.weight.cols() != m.config.hidden_dim)
      throw ShapeError("checkpoint " + path + " has inconsistent head shapes");
    return m;
  } catch (const json::exception& e) {
    throw ParseError("malformed checkpoint " + path + ": " + e.what());
  }
}

void check_model_compat(const ModelState& model, const Vocab& vocab,
                        const ConfusionIndex& index) {
  if (model.vocab_hash != vocab.hash())
    throw CompatError("model expects vocab " + std::to_string(model.vocab_hash) +
                      " but data hashes to " + std::to_string(vocab.hash()));
  if (model.confusion_hash != index.content_hash())
    throw CompatError("model expects confusion index " + std::to_string(model.confusion_hash) +
                      " but data hashes to " + std::to_string(index.content_hash()));
}

}  // namespace csc
