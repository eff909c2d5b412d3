#include <doctest.h>

#include <cmath>
#include <functional>

#include <omp.h>

#include "ground/crf.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ground;
using namespace ground::ner;

using namespace oracles::crf;

namespace {

std::size_t L(const char* name) { return *kLabels.index(name); }

std::vector<std::size_t> labels_of(std::initializer_list<const char*> names) {
  std::vector<std::size_t> out;
  for (const auto* n : names) out.push_back(L(n));
  return out;
}

}  // namespace

TEST_CASE("label set") {
  CHECK(kLabels.names() == std::vector<std::string>{"O", "B-LOC", "I-LOC", "B-LMK", "I-LMK"});
  CHECK(kLabels.outside() == 0);
  CHECK(kLabels.allowed(std::nullopt, L("B-LOC")));
  CHECK_FALSE(kLabels.allowed(std::nullopt, L("I-LOC")));
  CHECK(kLabels.allowed(L("B-LOC"), L("I-LOC")));
  CHECK_FALSE(kLabels.allowed(L("B-LMK"), L("I-LOC")));
  CHECK_FALSE(kLabels.allowed(L("O"), L("I-LMK")));
  CHECK_THROWS_AS(LabelSet({"B-LOC", "I-LOC"}), ConfigError);
  CHECK_THROWS_AS(LabelSet({"O", "B-LOC"}), ConfigError);
  CHECK_THROWS_AS(LabelSet({"O", "O"}), ConfigError);
  CHECK(bio_consistent(labels_of({"O", "B-LOC", "I-LOC"}), kLabels));
  CHECK_FALSE(bio_consistent(labels_of({"O", "I-LOC"}), kLabels));
}

TEST_CASE("feature extraction") {
  const gaz::Gazetteer g({{"Corniche", {}, gaz::EntityKind::Location, std::nullopt, "m"},
                          {"Souq Waqif", {}, gaz::EntityKind::Landmark, std::nullopt, "m"}});
  const auto toks = text::tokenize("Crash on Corniche near Souq Waqif");
  const text::PosLexicon lex{{"on", text::PosTag::Adp}};
  const auto tags = text::coarse_pos_tag(toks, lex);
  const auto f = extract_sequence_features(toks, tags, g);
  const auto has = [&](std::size_t t, const std::string& feat) {
    return std::find(f[t].begin(), f[t].end(), feat) != f[t].end();
  };
  CHECK(has(2, "in-gazetteer-LOC"));
  CHECK_FALSE(has(1, "in-gazetteer-LOC"));
  CHECK_FALSE(has(1, "in-gazetteer-LMK"));
  CHECK(has(4, "in-gazetteer-LMK"));
  CHECK(has(5, "in-gazetteer-LMK"));
  CHECK(has(1, "pos=ADP"));
  CHECK(has(2, "w=corniche"));
  CHECK(has(2, "w-1=on"));
  CHECK(has(2, "w+1=near"));
  CHECK(has(0, "shape=Xx"));
  CHECK_FALSE(std::any_of(f[0].begin(), f[0].end(), [](const auto& s) { return s.starts_with("w-1="); }));
  CHECK_FALSE(std::any_of(f[5].begin(), f[5].end(), [](const auto& s) { return s.starts_with("w+1="); }));

  const auto single = extract_sequence_features(text::tokenize("Corniche"), text::coarse_pos_tag(text::tokenize("Corniche"), lex), g);
  REQUIRE(single.size() == 1);
  for (const auto& s : single[0]) {
    CHECK_FALSE(s.starts_with("w-1="));
    CHECK_FALSE(s.starts_with("w+1="));
  }

  const auto nopos = default_templates(false);
  const auto fn = extract_sequence_features(toks, {}, g, nopos);
  for (const auto& pos : fn) {
    for (const auto& s : pos) CHECK_FALSE(s.starts_with("pos="));
  }
  CHECK(word_shape("Corniche") == "Xx");
  CHECK(word_shape("C-Ring") == "X-Xx");
  CHECK(word_shape("22") == "d");
}

TEST_CASE("zero weights give uniform marginals and all-O decoding") {
  const CrfModel m(kLabels, default_templates(false), {"a", "b"}, 0.0);
  for (std::size_t len = 1; len <= 5; ++len) {
    PositionFeatures x(len, std::vector<std::string>{"a"});
    const auto mg = forward_backward(m, x);
    CHECK(mg.log_partition == doctest::Approx(len * std::log(5.0)).epsilon(1e-12));
    for (double p : mg.node) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(viterbi_decode(m, x).labels == std::vector<std::size_t>(len, 0));
    CHECK(viterbi_decode(m, x, false).labels == std::vector<std::size_t>(len, 0));
  }
}

TEST_CASE("forward-backward and viterbi match brute-force enumeration") {
  std::mt19937_64 rng(2024);
  for (int seed = 0; seed < 150; ++seed) {
    const std::size_t len = 1 + testing::pick(rng, 4);
    const auto m = random_model(rng, 3, 2.0);
    const auto x = random_features(rng, len, 3);
    const std::size_t k = m.num_labels();

    std::vector<double> scores;
    std::vector<std::vector<std::size_t>> seqs;
    enumerate(len, k, [&](const auto& y) {
      seqs.push_back(y);
      scores.push_back(oracle_score(m, x, y));
    });
    const double log_z = log_sum_exp(scores);

    const auto mg = forward_backward(m, x);
    CHECK(std::abs(mg.log_partition - log_z) <= 1e-9);
    for (std::size_t t = 0; t < len; ++t) {
      double row = 0.0;
      for (std::size_t y = 0; y < k; ++y) {
        double p = 0.0;
        for (std::size_t s = 0; s < seqs.size(); ++s) {
          if (seqs[s][t] == y) p += std::exp(scores[s] - log_z);
        }
        CHECK(std::abs(mg.node_at(t, y) - p) <= 1e-9);
        row += mg.node_at(t, y);
      }
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }
    for (std::size_t t = 1; t < len; ++t) {
      for (std::size_t a = 0; a < k; ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < k; ++b) {
          double p = 0.0;
          for (std::size_t s = 0; s < seqs.size(); ++s) {
            if (seqs[s][t - 1] == a && seqs[s][t] == b) p += std::exp(scores[s] - log_z);
          }
          CHECK(std::abs(mg.edge_at(t, a, b) - p) <= 1e-9);
          row += mg.edge_at(t, a, b);
        }
        CHECK(std::abs(row - mg.node_at(t - 1, a)) <= 1e-9);
      }
    }

    double best_any = -INFINITY, best_legal = -INFINITY;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      best_any = std::max(best_any, scores[s]);
      if (oracle_legal(seqs[s])) best_legal = std::max(best_legal, scores[s]);
    }
    const auto free = viterbi_decode(m, x, false);
    CHECK(std::abs(free.score - best_any) <= 1e-9);
    CHECK(std::abs(oracle_score(m, x, free.labels) - best_any) <= 1e-9);
    const auto masked = viterbi_decode(m, x, true);
    CHECK(oracle_legal(masked.labels));
    CHECK(std::abs(masked.score - best_legal) <= 1e-9);
    CHECK(std::abs(oracle_score(m, x, masked.labels) - best_legal) <= 1e-9);
    CHECK(std::abs(sequence_score(m, x, masked.labels) - best_legal) <= 1e-9);
  }
}

TEST_CASE("strong gazetteer emission forces B-LOC") {
  CrfModel m(kLabels, default_templates(false), {"in-gazetteer-LOC", "w=on"}, 0.0);
  m.set_emission("in-gazetteer-LOC", L("B-LOC"), 50.0);
  const PositionFeatures x{{"w=on"}, {"in-gazetteer-LOC"}, {"w=on"}};
  CHECK(viterbi_decode(m, x).labels == labels_of({"O", "B-LOC", "O"}));
}

TEST_CASE("decoded sequences are always BIO legal") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    auto m = random_model(rng, 4, 5.0);
    m.transition(L("O"), L("I-LOC")) = 20.0;
    const auto x = random_features(rng, 1 + testing::pick(rng, 10), 4);
    CHECK(oracle_legal(viterbi_decode(m, x).labels));
  }
}

TEST_CASE("objective matches enumeration and gradient matches finite differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const double lambda = trial % 2 ? 0.3 : 0.0;
    const auto m = random_model(rng, 3, 1.0, lambda);
    std::vector<FeatureSequence> data;
    for (int s = 0; s < 2; ++s) {
      const std::size_t len = 1 + testing::pick(rng, 3);
      std::vector<std::size_t> y(len);
      for (auto& l : y) l = testing::pick(rng, kLabels.size());
      data.push_back({random_features(rng, len, 3), y});
    }
    const auto g = neg_loglik_and_gradient(m, data);
    CHECK(std::abs(g.value - oracle_objective(m, data)) <= 1e-9 * std::max(1.0, std::abs(g.value)));

    const auto x0 = m.parameters();
    const double h = 1e-4;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      auto plus = m, minus = m;
      auto xp = x0, xm = x0;
      xp[i] += h;
      xm[i] -= h;
      plus.set_parameters(xp);
      minus.set_parameters(xm);
      const double fd = (oracle_objective(plus, data) - oracle_objective(minus, data)) / (2 * h);
      CHECK(testing::rel_close(g.grad[i], fd, 1e-4, 1e-3));
    }
  }
}

TEST_CASE("parallel kernels agree with the serial references") {
  std::mt19937_64 rng(17);
  const auto m = random_model(rng, 6, 1.0, 0.1);
  std::vector<FeatureSequence> data;
  std::vector<PositionFeatures> batch;
  for (int s = 0; s < 100; ++s) {
    const std::size_t len = 1 + testing::pick(rng, 12);
    std::vector<std::size_t> y(len);
    for (auto& l : y) l = testing::pick(rng, kLabels.size());
    auto x = random_features(rng, len, 6);
    batch.push_back(x);
    data.push_back({std::move(x), y});
  }
  const auto s = serial::neg_loglik_and_gradient(m, data);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto p1 = neg_loglik_and_gradient(m, data);
  const auto d1 = decode_batch(m, batch);
  omp_set_num_threads(4);
  const auto p4 = neg_loglik_and_gradient(m, data);
  const auto d4 = decode_batch(m, batch);
  omp_set_num_threads(saved);
  CHECK(p1.value == p4.value);
  CHECK(p1.grad == p4.grad);
  CHECK(p1.value == doctest::Approx(s.value).epsilon(1e-12));
  for (std::size_t i = 0; i < s.grad.size(); ++i) CHECK(p1.grad[i] == doctest::Approx(s.grad[i]).epsilon(1e-10));
  CHECK(d1 == d4);
  CHECK(d1 == serial::decode_batch(m, batch));
}

namespace {

std::vector<AnnotatedSequence> x_always_loc() {
  const std::vector<std::pair<std::string, std::vector<const char*>>> rows{
      {"crash on Xville now", {"O", "O", "B-LOC", "O"}},
      {"jam near Xville", {"O", "O", "B-LOC"}},
      {"Xville is blocked", {"B-LOC", "O", "O"}},
      {"avoid Xville today", {"O", "B-LOC", "O"}},
      {"police at Xville again", {"O", "O", "B-LOC", "O"}}};
  std::vector<AnnotatedSequence> out;
  for (int rep = 0; rep < 4; ++rep) {
    for (const auto& [text, labels] : rows) {
      AnnotatedSequence s;
      s.id = "s" + std::to_string(out.size());
      s.tokens = text::tokenize(text);
      for (const auto* l : labels) s.labels.push_back(L(l));
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("training learns a consistently labeled token") {
  const auto data = x_always_loc();
  const gaz::Gazetteer empty;
  TrainConfig cfg;
  cfg.use_pos = false;
  TrainStats st;
  const auto m = train_crf(data, empty, {}, cfg, &st);
  for (std::size_t i = 1; i < st.optimizer.history.size(); ++i) CHECK(st.optimizer.history[i] <= st.optimizer.history[i - 1]);
  const auto y = tag(m, text::tokenize("heavy traffic towards Xville tonight"), empty, {});
  CHECK(y[3] == L("B-LOC"));
  CHECK(y[0] == L("O"));
  CHECK(train_crf(data, empty, {}, cfg).parameters() == m.parameters());
}

// Viterbi's argmax is invariant to weight scale, so tiny weights can still
// prefer a non-O path; what vanishes is the margin over the all-O labeling.
TEST_CASE("overwhelming regularization leaves the model nearly indifferent") {
  const auto data = x_always_loc();
  const gaz::Gazetteer empty;
  TrainConfig cfg;
  cfg.use_pos = false;
  cfg.l2_lambda = 1e6;
  const auto m = train_crf(data, empty, {}, cfg);
  for (double w : m.parameters()) CHECK(std::abs(w) < 1e-3);
  for (const auto& s : data) {
    const auto x = extract_sequence_features(s.tokens, {}, empty, m.templates());
    const auto best = viterbi_decode(m, x);
    CHECK(best.score - sequence_score(m, x, std::vector<std::size_t>(s.tokens.size(), 0)) < 1e-3);
  }
}

TEST_CASE("inconsistent gold labels are rejected with the sequence id") {
  auto data = x_always_loc();
  data[3].labels[0] = L("I-LOC");
  try {
    train_crf(data, gaz::Gazetteer{}, {}, TrainConfig{});
    FAIL("expected Error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(data[3].id) != std::string::npos);
  }
}

TEST_CASE("model save load round trip and version check") {
  std::mt19937_64 rng(3);
  const auto m = random_model(rng, 4, 1.0, 0.2);
  testing::TempDir dir;
  save_model(m, dir / "crf.json");
  const auto back = load_model(dir / "crf.json");
  CHECK(back.parameters() == m.parameters());
  CHECK(back.templates() == m.templates());
  CHECK(back.l2_lambda() == m.l2_lambda());
  auto j = nlohmann::json::parse(read_file(dir / "crf.json"));
  j["version"] = 99;
  testing::write_text(dir / "bad.json", j.dump());
  CHECK_THROWS_AS(load_model(dir / "bad.json"), ConfigError);
}

TEST_CASE("gazetteer baseline tagging") {
  const gaz::Gazetteer g({{"Khalifa Street", {}, gaz::EntityKind::Location, std::nullopt, "m"},
                          {"Khalifa", {}, gaz::EntityKind::Landmark, std::nullopt, "m"}});
  CHECK(gazetteer_tag(text::tokenize("on Khalifa Street now"), g) == labels_of({"O", "B-LOC", "I-LOC", "O"}));
  CHECK(gazetteer_tag(text::tokenize("near Khalifa today"), g) == labels_of({"O", "B-LMK", "O"}));
  CHECK(gazetteer_tag(text::tokenize("nothing here"), g) == labels_of({"O", "O"}));
  CHECK(gazetteer_tag(text::tokenize("#Khalifa"), g) == labels_of({"B-LMK"}));

  const auto full = gaz::load_gazetteer(testing::kData / "gazetteer_doha.txt").gazetteer;
  std::mt19937_64 rng(8);
  std::vector<std::string> words{"on", "near", "and", "the", "street", "road", "mall", "al"};
  for (const auto& a : full.aliases()) words.push_back(a.folded);
  for (int i = 0; i < 500; ++i) {
    std::string text;
    for (std::size_t n = testing::pick(rng, 10); n > 0; --n) text += words[testing::pick(rng, words.size())] + " ";
    CHECK(bio_consistent(gazetteer_tag(text::tokenize(text), full), kLabels));
  }
}

TEST_CASE("location expression assembly") {
  const auto toks = text::tokenize("on Khalifa Street now");
  auto ex = assemble_location_expressions(toks, labels_of({"O", "B-LOC", "I-LOC", "O"}));
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].surface == "Khalifa Street");
  CHECK(ex[0].start == 1);
  CHECK(ex[0].end == 3);
  CHECK_FALSE(ex[0].compound());

  const auto t2 = text::tokenize("on Salwa between Corniche and Sadd");
  ex = assemble_location_expressions(t2, labels_of({"O", "B-LOC", "O", "B-LOC", "O", "B-LOC"}));
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].names() == std::vector<std::string>{"Salwa", "Corniche", "Sadd"});
  CHECK(ex[0].surface == "Salwa between Corniche and Sadd");

  CHECK(assemble_location_expressions(toks, labels_of({"O", "O", "O", "O"})).empty());

  const auto t3 = text::tokenize("Corniche is far from Sadd");
  CHECK(assemble_location_expressions(t3, labels_of({"B-LOC", "O", "O", "O", "B-LOC"})).size() == 2);
}

TEST_CASE("assembly round trip reproduces the maximal runs") {
  std::mt19937_64 rng(41);
  const std::vector<std::string> words{"on", "and", "to", "near", "x", "y", "between", "z"};
  for (int i = 0; i < 500; ++i) {
    const std::size_t len = 1 + testing::pick(rng, 12);
    std::vector<std::string> surf;
    for (std::size_t t = 0; t < len; ++t) surf.push_back(words[testing::pick(rng, words.size())]);
    const auto toks = text::tokens_from_surfaces(surf);
    std::vector<std::size_t> y(len);
    for (std::size_t t = 0; t < len; ++t) {
      do {
        y[t] = testing::pick(rng, kLabels.size());
      } while (!kLabels.allowed(t ? std::optional<std::size_t>(y[t - 1]) : std::nullopt, y[t]));
    }
    std::vector<std::size_t> rebuilt(len, kLabels.outside());
    for (const auto& e : assemble_location_expressions(toks, y)) {
      for (const auto& c : e.constituents) {
        const auto type = std::string(entity_type(c.kind));
        rebuilt[c.start] = *kLabels.begin_of(type);
        for (std::size_t t = c.start + 1; t < c.end; ++t) rebuilt[t] = *kLabels.inside_of(type);
        CHECK(c.name == text::join_surfaces(std::span(toks).subspan(c.start, c.end - c.start)));
      }
      CHECK(e.surface == text::join_surfaces(std::span(toks).subspan(e.start, e.end - e.start)));
    }
    CHECK(rebuilt == y);
  }
}

TEST_CASE("column corpus round trip") {
  AnnotatedSequence s;
  s.id = "a";
  s.tokens = text::tokens_from_surfaces({"crash", "on", "Corniche"});
  s.labels = labels_of({"O", "O", "B-LOC"});
  const std::vector<AnnotatedSequence> corpus{s, s};
  testing::TempDir dir;
  save_column_corpus(corpus, dir / "c.tsv");
  const auto back = load_column_corpus(dir / "c.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].labels == s.labels);
  CHECK(back[1].tokens[2].surface == "Corniche");

  testing::write_text(dir / "bad.tsv", "crash\tO\non\tB-XYZ\n");
  CHECK_THROWS_AS(load_column_corpus(dir / "bad.tsv"), ParseError);
}
