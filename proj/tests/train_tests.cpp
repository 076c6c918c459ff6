#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csckit/charkb.hpp"
#include "csckit/error.hpp"
#include "csckit/model.hpp"
#include "csckit/rng.hpp"
#include "csckit/train.hpp"
#include "test_util.hpp"

using namespace csc;

namespace {

struct Fixture {
  std::vector<CharRecord> table = testutil::grouped_table(2);
  Vocab vocab = vocab_from_table(table);
  ConfusionIndex index = build_confusion_index(vocab, table, SimilarityPolicy{});
  EncoderConfig config;

  Fixture() {
    config.embedding_dim = 3;
    config.hidden_dim = 4;
    config.window = 1;
    config.max_len = 16;
  }

  char32_t ch(int k) const { return static_cast<char32_t>(0x4e00 + k); }
};

// Loss as a pure function of the parameters with the mask and gate frozen at
// the base point, mirroring the piecewise-constant treatment of both.
double frozen_loss(const ModelState& model, const ConfusionIndex& index,
                   const std::vector<int>& x, const LabelSet& labels, const TrainConfig& cfg,
                   const std::vector<int>& mask_d, const std::vector<int>& mask_r,
                   const std::vector<int>& gate) {
  ForwardOptions opts;
  opts.renormalize = true;
  opts.oracle_d = mask_d;
  opts.oracle_r = mask_r;
  const ForwardResult fwd = forward_sentence(model, index, x, opts);
  return total_loss(loss_detection(fwd.p_d, labels.detection),
                    loss_reasoning(fwd.p_r, labels.reasoning, gate),
                    loss_searching(fwd.p_masked, labels.gold), cfg.weights);
}

// Deterministic corpus where error status, error type, and the correction
// are all functions of the source character, hence learnable:
//   ch(1) only ever appears as a misspelling of ch(0)  (phonological)
//   ch(2) only ever appears as a misspelling of ch(3)  (visual)
//   ch(0), ch(3), ch(4), ch(5) are always clean.
std::vector<SentencePair> make_corpus(Rng& rng, const Fixture& f, int n, double error_rate) {
  const std::array<int, 4> clean = {0, 3, 4, 5};
  std::vector<SentencePair> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const int T = 3 + rng.index(4);
    std::u32string src, tgt;
    for (int i = 0; i < T; ++i) {
      const int g = clean[static_cast<std::size_t>(rng.index(4))];
      tgt.push_back(f.ch(g));
      if (g == 0 && rng.bernoulli(error_rate))
        src.push_back(f.ch(1));
      else if (g == 3 && rng.bernoulli(error_rate))
        src.push_back(f.ch(2));
      else
        src.push_back(f.ch(g));
    }
    corpus.push_back({src, tgt});
  }
  return corpus;
}

}  // namespace

TEST_CASE("loss functions against closed forms") {
  SUBCASE("uniform binary rows cost one log two each") {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.5, 0.5;
    const std::vector<int> g = {0, 1};
    CHECK(loss_detection(p, g) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("general rows sum the selected negative logs") {
    Matrix p(3, 2);
    p << 0.25, 0.75, 0.9, 0.1, 0.4, 0.6;
    const std::vector<int> g = {1, 0, 0};
    const double want = -(std::log(0.75) + std::log(0.9) + std::log(0.4));
    CHECK(loss_detection(p, g) == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("vanishing probability is floored, not infinite") {
    Matrix p(1, 2);
    p << 1e-13, 1.0 - 1e-13;
    const std::vector<int> g = {0};
    CHECK(loss_detection(p, g) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
    CHECK(std::isfinite(loss_detection(p, g)));
  }

  SUBCASE("the reasoning loss counts only gated rows") {
    Matrix p(3, 2);
    p << 0.3, 0.7, 0.8, 0.2, 0.6, 0.4;
    const std::vector<int> g = {1, 0, 0};
    const std::vector<int> gate_all = {1, 1, 1};
    const std::vector<int> gate_some = {1, 0, 1};
    const std::vector<int> gate_none = {0, 0, 0};
    CHECK(loss_reasoning(p, g, gate_all) ==
          doctest::Approx(-(std::log(0.7) + std::log(0.8) + std::log(0.6))).epsilon(1e-12));
    CHECK(loss_reasoning(p, g, gate_some) ==
          doctest::Approx(-(std::log(0.7) + std::log(0.6))).epsilon(1e-12));
    CHECK(loss_reasoning(p, g, gate_none) == 0.0);
    const std::vector<int> short_gate = {1, 1};
    CHECK_THROWS_AS(loss_reasoning(p, g, short_gate), ShapeError);
  }

  SUBCASE("the candidate loss reads the gold column per row") {
    Matrix p(2, 4);
    p << 0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25;
    const std::vector<int> gold = {2, 0};
    CHECK(loss_searching(p, gold) ==
          doctest::Approx(-(std::log(0.3) + std::log(0.25))).epsilon(1e-12));
    const std::vector<int> bad = {4, 0};
    CHECK_THROWS_AS(loss_searching(p, bad), ShapeError);
  }

  SUBCASE("labels out of range are rejected") {
    Matrix p(1, 2);
    p << 0.5, 0.5;
    const std::vector<int> bad = {2};
    CHECK_THROWS_AS(loss_detection(p, bad), ShapeError);
    const std::vector<int> gate = {1};
    CHECK_THROWS_AS(loss_reasoning(p, bad, gate), ShapeError);
  }

  SUBCASE("the total is the weighted sum of the three parts") {
    LossWeights w;
    w.alpha = 2.0;
    w.beta = 3.0;
    w.gamma = 5.0;
    CHECK(total_loss(0.25, 0.5, 0.125, w) == doctest::Approx(2.625).epsilon(1e-12));
    w.beta = 0.0;  // a zeroed weight removes that subtask entirely
    CHECK(total_loss(0.25, 0.5, 0.125, w) == doctest::Approx(1.125).epsilon(1e-12));
  }
}

TEST_CASE("training configuration validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.momentum = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.epochs = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.weights.beta = -0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("zeroed gradient accumulators match every parameter shape") {
  Fixture f;
  const ModelState m = init_model(f.config, f.vocab, f.index, 3);
  const ModelGrads g = zero_grads(m);
  CHECK(g.encoder.embedding.rows() == m.encoder.embedding.rows());
  CHECK(g.encoder.proj.cols() == m.encoder.proj.cols());
  CHECK(g.heads.searching.weight.rows() == m.heads.searching.weight.rows());
  CHECK(g.encoder.embedding.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.heads.detection.weight.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.heads.searching.bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sentence gradients match finite differences on all parameter blocks") {
  Fixture f;
  // Positions: phonological error, clean, visual error, clean, uncoverable
  // error (its gold sits outside both confusion sets of the source).
  const SentencePair pair{{f.ch(1), f.ch(4), f.ch(2), f.ch(3), f.ch(0)},
                          {f.ch(0), f.ch(4), f.ch(3), f.ch(3), f.ch(4)}};
  const LabelSet labels = derive_labels(pair, f.vocab, f.index);
  REQUIRE(labels.uncoverable == std::vector<int>{4});
  const IndexSeq xs = to_indices(f.vocab, pair.src);
  const std::vector<int> x(xs.begin(), xs.end());

  for (const GateMode gate_mode : {GateMode::kPredicted, GateMode::kGold}) {
    for (const bool train_encoder : {true, false}) {
      CAPTURE(static_cast<int>(gate_mode));
      CAPTURE(train_encoder);
      const ModelState model = init_model(f.config, f.vocab, f.index, 77);
      TrainConfig cfg;
      cfg.weights.alpha = 0.7;
      cfg.weights.beta = 1.3;
      cfg.weights.gamma = 1.9;
      cfg.gate = gate_mode;
      cfg.train_encoder = train_encoder;

      ModelGrads grads = zero_grads(model);
      const SentenceLosses losses =
          sentence_loss_and_grads(model, f.index, x, labels, cfg, &grads);

      // Freeze the mask and gate exactly as the analytic gradient does.
      ForwardOptions base_opts;
      base_opts.renormalize = true;
      const ForwardResult base = forward_sentence(model, f.index, x, base_opts);
      const std::vector<int> mask_d = base.y_d, mask_r = base.y_r;
      const std::vector<int> gate =
          cfg.gate == GateMode::kPredicted ? base.y_d : labels.detection;

      // The frozen objective agrees with the reported loss at the base point.
      CHECK(frozen_loss(model, f.index, x, labels, cfg, mask_d, mask_r, gate) ==
            doctest::Approx(losses.total).epsilon(1e-12));

      const double eps = 1e-5;
      const auto fd = [&](auto mutate) {
        ModelState plus = model, minus = model;
        mutate(plus, eps);
        mutate(minus, -eps);
        return (frozen_loss(plus, f.index, x, labels, cfg, mask_d, mask_r, gate) -
                frozen_loss(minus, f.index, x, labels, cfg, mask_d, mask_r, gate)) /
               (2.0 * eps);
      };

      if (train_encoder) {
        for (int i = 0; i < model.encoder.embedding.rows(); ++i)
          for (int j = 0; j < model.encoder.embedding.cols(); ++j) {
            const double numeric =
                fd([&](ModelState& s, double e) { s.encoder.embedding(i, j) += e; });
            CHECK(testutil::grad_error(grads.encoder.embedding(i, j), numeric) < 1e-4);
          }
        for (int i = 0; i < model.encoder.proj.rows(); ++i)
          for (int j = 0; j < model.encoder.proj.cols(); ++j) {
            const double numeric =
                fd([&](ModelState& s, double e) { s.encoder.proj(i, j) += e; });
            CHECK(testutil::grad_error(grads.encoder.proj(i, j), numeric) < 1e-4);
          }
        for (int i = 0; i < model.encoder.bias.size(); ++i) {
          const double numeric = fd([&](ModelState& s, double e) { s.encoder.bias(i) += e; });
          CHECK(testutil::grad_error(grads.encoder.bias(i), numeric) < 1e-4);
        }
      } else {
        CHECK(grads.encoder.embedding.cwiseAbs().maxCoeff() == 0.0);
        CHECK(grads.encoder.proj.cwiseAbs().maxCoeff() == 0.0);
        CHECK(grads.encoder.bias.cwiseAbs().maxCoeff() == 0.0);
      }

      const auto check_layer = [&](const LinearGrads& got, auto select) {
        for (int i = 0; i < got.weight.rows(); ++i)
          for (int j = 0; j < got.weight.cols(); ++j) {
            const double numeric =
                fd([&](ModelState& s, double e) { select(s).weight(i, j) += e; });
            CHECK(testutil::grad_error(got.weight(i, j), numeric) < 1e-4);
          }
        for (int i = 0; i < got.bias.size(); ++i) {
          const double numeric = fd([&](ModelState& s, double e) { select(s).bias(i) += e; });
          CHECK(testutil::grad_error(got.bias(i), numeric) < 1e-4);
        }
      };
      check_layer(grads.heads.detection,
                  [](ModelState& s) -> LinearLayer& { return s.heads.detection; });
      check_layer(grads.heads.reasoning,
                  [](ModelState& s) -> LinearLayer& { return s.heads.reasoning; });
      check_layer(grads.heads.searching,
                  [](ModelState& s) -> LinearLayer& { return s.heads.searching; });
    }
  }
}

TEST_CASE("the reasoning gate selects which rows contribute") {
  Fixture f;
  const SentencePair pair{{f.ch(1), f.ch(4), f.ch(2)}, {f.ch(0), f.ch(4), f.ch(3)}};
  const LabelSet labels = derive_labels(pair, f.vocab, f.index);
  const IndexSeq xs = to_indices(f.vocab, pair.src);
  const std::vector<int> x(xs.begin(), xs.end());
  const ModelState model = init_model(f.config, f.vocab, f.index, 55);

  ForwardOptions opts;
  opts.renormalize = true;
  const ForwardResult fwd = forward_sentence(model, f.index, x, opts);

  TrainConfig cfg;
  cfg.gate = GateMode::kGold;
  const SentenceLosses gold_gate = sentence_loss_and_grads(model, f.index, x, labels, cfg, nullptr);
  CHECK(gold_gate.reasoning ==
        doctest::Approx(loss_reasoning(fwd.p_r, labels.reasoning, labels.detection))
            .epsilon(1e-12));

  cfg.gate = GateMode::kPredicted;
  const SentenceLosses pred_gate = sentence_loss_and_grads(model, f.index, x, labels, cfg, nullptr);
  CHECK(pred_gate.reasoning ==
        doctest::Approx(loss_reasoning(fwd.p_r, labels.reasoning, fwd.y_d)).epsilon(1e-12));

  // Detection and searching are gate-independent.
  CHECK(pred_gate.detection == doctest::Approx(gold_gate.detection).epsilon(1e-12));
  CHECK(pred_gate.searching == doctest::Approx(gold_gate.searching).epsilon(1e-12));
}

TEST_CASE("position accuracy tallies") {
  Fixture f;
  const SentencePair pair{{f.ch(1), f.ch(4)}, {f.ch(0), f.ch(4)}};
  const LabelSet labels = derive_labels(pair, f.vocab, f.index);
  const IndexSeq xs = to_indices(f.vocab, pair.src);
  const std::vector<int> x(xs.begin(), xs.end());
  const ModelState model = init_model(f.config, f.vocab, f.index, 66);

  TrainConfig cfg;
  SubtaskTally tally;
  sentence_loss_and_grads(model, f.index, x, labels, cfg, nullptr, &tally);
  CHECK(tally.det_total == 2);
  CHECK(tally.sea_total == 2);
  // Only the single gold-error position enters the reasoning tally.
  CHECK(tally.rea_total == 1);
  CHECK(tally.det_correct <= tally.det_total);
  CHECK(tally.rea_correct <= tally.rea_total);
  CHECK(tally.sea_correct <= tally.sea_total);
}

TEST_CASE("fitting is deterministic and bookkeeping is exact") {
  Fixture f;
  Rng data_rng(1234);
  const std::vector<SentencePair> corpus = make_corpus(data_rng, f, 24, 0.4);

  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.3;
  cfg.batch_size = 7;
  cfg.epochs = 3;
  cfg.seed = 99;

  SUBCASE("identical runs produce identical checkpoints and logs") {
    testutil::TempDir dir;
    ModelState a = init_model(f.config, f.vocab, f.index, 11);
    ModelState b = init_model(f.config, f.vocab, f.index, 11);
    const std::vector<EpochRecord> log_a = fit(corpus, a, cfg, f.vocab, f.index);
    const std::vector<EpochRecord> log_b = fit(corpus, b, cfg, f.vocab, f.index);
    save_model(a, dir.file("a.json"));
    save_model(b, dir.file("b.json"));
    CHECK(testutil::read_file(dir.file("a.json")) == testutil::read_file(dir.file("b.json")));
    REQUIRE(log_a.size() == 3);
    for (std::size_t i = 0; i < log_a.size(); ++i) {
      CHECK(log_a[i].epoch == static_cast<int>(i) + 1);
      CHECK(log_a[i].loss_total == log_b[i].loss_total);
      CHECK(log_a[i].acc_detection == log_b[i].acc_detection);
      CHECK(log_a[i].acc_searching == log_b[i].acc_searching);
    }
    CHECK(a.epochs_trained == 3);
    fit(corpus, a, cfg, f.vocab, f.index);
    CHECK(a.epochs_trained == 6);
  }

  SUBCASE("zero epochs is a no-op") {
    testutil::TempDir dir;
    ModelState m = init_model(f.config, f.vocab, f.index, 11);
    save_model(m, dir.file("before.json"));
    TrainConfig none = cfg;
    none.epochs = 0;
    const std::vector<EpochRecord> log = fit(corpus, m, none, f.vocab, f.index);
    CHECK(log.empty());
    CHECK(m.epochs_trained == 0);
    save_model(m, dir.file("after.json"));
    CHECK(testutil::read_file(dir.file("before.json")) ==
          testutil::read_file(dir.file("after.json")));
  }

  SUBCASE("a whole-corpus batch reports the mean initial loss in epoch one") {
    ModelState m = init_model(f.config, f.vocab, f.index, 11);
    TrainConfig single = cfg;
    single.momentum = 0.0;
    single.batch_size = static_cast<int>(corpus.size());
    single.epochs = 1;

    double expected = 0.0;
    for (const SentencePair& pair : corpus) {
      const LabelSet labels = derive_labels(pair, f.vocab, f.index);
      const IndexSeq xs = to_indices(f.vocab, pair.src);
      const std::vector<int> x(xs.begin(), xs.end());
      expected += sentence_loss_and_grads(m, f.index, x, labels, single, nullptr).total;
    }
    expected /= static_cast<double>(corpus.size());

    const std::vector<EpochRecord> log = fit(corpus, m, single, f.vocab, f.index);
    REQUIRE(log.size() == 1);
    CHECK(log[0].loss_total == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("incompatible model or data is rejected up front") {
    ModelState m = init_model(f.config, f.vocab, f.index, 11);
    m.vocab_hash ^= 1;
    CHECK_THROWS_AS(fit(corpus, m, cfg, f.vocab, f.index), CompatError);
    ModelState ok = init_model(f.config, f.vocab, f.index, 11);
    CHECK_THROWS_AS(fit({}, ok, cfg, f.vocab, f.index), ConfigError);
    TrainConfig bad = cfg;
    bad.learning_rate = -1.0;
    CHECK_THROWS_AS(fit(corpus, ok, bad, f.vocab, f.index), ConfigError);
  }
}

TEST_CASE("non-finite losses stop training with a divergence error") {
  Fixture f;
  Rng data_rng(4321);
  const std::vector<SentencePair> corpus = make_corpus(data_rng, f, 4, 0.4);
  ModelState m = init_model(f.config, f.vocab, f.index, 11);
  m.encoder.bias(0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(fit(corpus, m, cfg, f.vocab, f.index), DivergenceError);
}

TEST_CASE("a clean corpus with a gold gate has zero reasoning loss") {
  Fixture f;
  Rng data_rng(777);
  const std::vector<SentencePair> corpus = make_corpus(data_rng, f, 10, 0.0);
  ModelState m = init_model(f.config, f.vocab, f.index, 11);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.gate = GateMode::kGold;
  const std::vector<EpochRecord> log = fit(corpus, m, cfg, f.vocab, f.index);
  REQUIRE(log.size() == 1);
  CHECK(log[0].loss_reasoning == 0.0);
  // No gold-error positions: the conditional accuracy reports zero support.
  CHECK(log[0].acc_reasoning == 0.0);
}

TEST_CASE("training learns a deterministic error pattern") {
  Fixture f;
  Rng data_rng(2026);
  const std::vector<SentencePair> corpus = make_corpus(data_rng, f, 60, 0.4);
  ModelState m = init_model(f.config, f.vocab, f.index, 8);
  TrainConfig cfg;
  cfg.learning_rate = 0.15;
  cfg.momentum = 0.5;
  cfg.batch_size = 8;
  cfg.epochs = 40;
  cfg.seed = 5;
  const std::vector<EpochRecord> log = fit(corpus, m, cfg, f.vocab, f.index);
  REQUIRE(log.size() == 40);
  CHECK(log.back().loss_total < 0.5 * log.front().loss_total);
  CHECK(log.back().acc_detection > 0.9);
  CHECK(log.back().acc_searching > 0.8);
  for (const EpochRecord& rec : log) {
    CHECK(std::isfinite(rec.loss_total));
    CHECK(rec.acc_detection >= 0.0);
    CHECK(rec.acc_detection <= 1.0);
  }
}

TEST_CASE("the epoch log serializes one parseable record per line") {
  Fixture f;
  Rng data_rng(31);
  const std::vector<SentencePair> corpus = make_corpus(data_rng, f, 8, 0.4);
  ModelState m = init_model(f.config, f.vocab, f.index, 11);
  TrainConfig cfg;
  cfg.epochs = 3;
  const std::vector<EpochRecord> log = fit(corpus, m, cfg, f.vocab, f.index);

  testutil::TempDir dir;
  const std::string path = dir.file("epochs.jsonl");
  write_epoch_log(log, path);

  std::istringstream lines(testutil::read_file(path));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    n += 1;
    CHECK(j.at("epoch").get<int>() == n);
    CHECK(std::isfinite(j.at("loss_total").get<double>()));
    CHECK(j.at("acc_searching").get<double>() >= 0.0);
    CHECK(j.count("loss_detection") == 1);
    CHECK(j.count("loss_reasoning") == 1);
    CHECK(j.count("acc_detection") == 1);
    CHECK(j.count("acc_reasoning") == 1);
  }
  CHECK(n == 3);
}
