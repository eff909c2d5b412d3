#include <doctest.h>

#include <cmath>

#include <omp.h>

#include "ground/maxent.hpp"
#include "ground/util.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ground;
using namespace ground::maxent;
using namespace oracles::maxent;

TEST_CASE("n-gram features") {
  const auto toks = text::tokenize("traffic jam");
  CHECK(extract_ngram_features(toks, 2) == FeatureVector{{"uni:traffic", 1}, {"uni:jam", 1}, {"bi:traffic_jam", 1}});
  CHECK(extract_ngram_features({}, 2).empty());
  CHECK(extract_ngram_features(text::tokenize("jam jam"), 1) == FeatureVector{{"uni:jam", 2}});
  const auto with_url = extract_ngram_features(text::tokenize("crash http://t.co/x"), 1, true);
  CHECK(with_url == FeatureVector{{"uni:crash", 1}, {"meta:has_media", 1}});
}

TEST_CASE("featurize applies the simplifier") {
  const text::Simplifier s(std::vector<text::SimplifierRule>{{"@moi_qatar", "government_entity"}});
  const auto x = featurize("@MOI_Qatar warns", false, s, 1);
  CHECK(x.count("uni:government_entity") == 1);
  CHECK(x.count("uni:@moi_qatar") == 0);
}

TEST_CASE("softmax examples") {
  MaxEntModel m({"relevant", "irrelevant"}, {"uni:jam"});
  auto p = predict_proba(m, {{"uni:jam", 1}});
  CHECK(p[0] == doctest::Approx(0.5));
  m.set_weight(kRelevant, "uni:jam", std::log(3.0));
  p = predict_proba(m, {{"uni:jam", 1}});
  CHECK(p[kRelevant] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(predict_proba(m, {{"uni:unknown", 4}}) == predict_proba(m, {}));
}

TEST_CASE("softmax normalizes for arbitrary models") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 300; ++i) {
    const auto m = random_model(rng, 10, 50.0);
    const auto data = make_data(rng, 1, 10);
    const auto p = predict_proba(m, data[0].features);
    CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-9);
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
  }
}

TEST_CASE("classification threshold is inclusive") {
  MaxEntModel m({"relevant", "irrelevant"}, {"uni:a"});
  CHECK(classify(m, {}, 0.5));
  m.set_weight(kRelevant, "uni:a", std::log(3.0));
  CHECK(classify(m, {{"uni:a", 1}}, 0.5));
  CHECK_FALSE(classify(m, {{"uni:a", 1}}, 0.76));
  m.set_weight(kRelevant, "uni:a", std::log(0.49 / 0.51));
  CHECK_FALSE(classify(m, {{"uni:a", 1}}, 0.5));
}

TEST_CASE("objective at zero weights is ln 2 per example") {
  const MaxEntModel m({"relevant", "irrelevant"}, {"uni:a"});
  const std::vector<LabeledExample> one{{{{"uni:a", 1}}, kRelevant}};
  CHECK(neg_loglik_and_gradient(with_lambda(m, 0.0), one).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("regularizer-only gradient is lambda times w") {
  std::mt19937_64 rng(4);
  const auto m = with_lambda(random_model(rng, 4, 1.0), 0.7);
  const std::vector<LabeledExample> empty_features{{{}, kRelevant}, {{}, kIrrelevant}};
  const auto g = neg_loglik_and_gradient(m, empty_features);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.weights[c * 4 + j] == 0.7 * m.weight(c, j));
  }
}

TEST_CASE("objective matches an independent evaluation and gradients match finite differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const double lambda = trial % 3 == 0 ? 0.0 : testing::uniform(rng, 0.01, 2.0);
    const auto m = with_lambda(random_model(rng, 1 + testing::pick(rng, 20), 1.0), lambda);
    const auto data = make_data(rng, 1 + testing::pick(rng, 12), m.vocabulary_size());
    const auto g = neg_loglik_and_gradient(m, data);
    CHECK(g.value == doctest::Approx(oracle_objective(m, data, lambda)).epsilon(1e-12));

    std::vector<double> analytic = g.weights;
    analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());
    const auto x0 = m.parameters();
    const double h = 1e-4;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      auto plus = m, minus = m;
      auto xp = x0, xm = x0;
      xp[i] += h;
      xm[i] -= h;
      plus.set_parameters(xp);
      minus.set_parameters(xm);
      const double fd = (oracle_objective(plus, data, lambda) - oracle_objective(minus, data, lambda)) / (2 * h);
      CHECK(testing::rel_close(analytic[i], fd, 1e-5, 1e-3));
    }
  }
}

TEST_CASE("parallel gradient agrees with serial reference and ignores thread count") {
  std::mt19937_64 rng(12);
  const auto m = with_lambda(random_model(rng, 50, 1.0), 0.1);
  const auto data = make_data(rng, 333, 50);
  const auto s = serial::neg_loglik_and_gradient(m, data);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto p1 = neg_loglik_and_gradient(m, data);
  omp_set_num_threads(3);
  const auto p3 = neg_loglik_and_gradient(m, data);
  omp_set_num_threads(saved);
  CHECK(p1.value == p3.value);
  CHECK(p1.weights == p3.weights);
  CHECK(p1.value == doctest::Approx(s.value).epsilon(1e-12));
  for (std::size_t i = 0; i < s.weights.size(); ++i) CHECK(p1.weights[i] == doctest::Approx(s.weights[i]).epsilon(1e-10));
}

TEST_CASE("training examples") {
  TrainConfig cfg;
  cfg.l2_lambda = 0.1;
  const std::vector<LabeledExample> separable{{{{"uni:crash", 1}}, kRelevant}, {{{"uni:toast", 1}}, kIrrelevant}};
  TrainStats st;
  const auto m = train_maxent(separable, cfg, &st);
  // By symmetry the optimum has weights (a, -a) on each feature and zero bias,
  // so the stationarity condition is 1 - sigmoid(2a) = lambda * a.
  double lo = 0.0, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double a = 0.5 * (lo + hi);
    (1.0 - 1.0 / (1.0 + std::exp(-2.0 * a)) > cfg.l2_lambda * a ? lo : hi) = a;
  }
  const double p_opt = 1.0 / (1.0 + std::exp(-(lo + hi)));
  CHECK(predict_proba(m, separable[0].features)[kRelevant] == doctest::Approx(p_opt).epsilon(1e-6));
  CHECK(predict_proba(m, separable[1].features)[kIrrelevant] == doctest::Approx(p_opt).epsilon(1e-6));
  CHECK(p_opt > 0.85);
  CHECK(st.optimizer.value <= 2 * std::log(2.0));
  for (std::size_t i = 1; i < st.optimizer.history.size(); ++i) {
    CHECK(st.optimizer.history[i] <= st.optimizer.history[i - 1]);
  }

  cfg.l2_lambda = 1e6;
  const auto flat = train_maxent(separable, cfg);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < flat.vocabulary_size(); ++j) CHECK(std::abs(flat.weight(c, j)) < 1e-3);
  }

  cfg.l2_lambda = 0.1;
  const std::vector<LabeledExample> contradictory{{{{"uni:jam", 1}}, kRelevant}, {{{"uni:jam", 1}}, kIrrelevant}};
  const auto sym = train_maxent(contradictory, cfg);
  CHECK(predict_proba(sym, {{"uni:jam", 1}})[kRelevant] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("training never ends above the zero-weight objective") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto data = make_data(rng, 40, 15);
    data[0].label = kRelevant;
    data[1].label = kIrrelevant;
    TrainConfig cfg;
    cfg.max_iters = 50;
    TrainStats st;
    const auto m = train_maxent(data, cfg, &st);
    const MaxEntModel zero(m.classes(), m.vocabulary(), cfg);
    CHECK(st.optimizer.value <= neg_loglik_and_gradient(zero, data).value);
  }
}

TEST_CASE("training is deterministic and rejects a missing class") {
  std::mt19937_64 rng(2);
  auto data = make_data(rng, 60, 10);
  data[0].label = kRelevant;
  data[1].label = kIrrelevant;
  TrainConfig cfg;
  cfg.max_iters = 40;
  CHECK(train_maxent(data, cfg).parameters() == train_maxent(data, cfg).parameters());
  for (auto& e : data) e.label = kRelevant;
  CHECK_THROWS_AS(train_maxent(data, cfg), Error);
}

TEST_CASE("feature order does not change probabilities") {
  std::mt19937_64 rng(77);
  const auto m = random_model(rng, 8, 2.0);
  std::vector<std::pair<std::string, double>> items;
  for (std::size_t j = 0; j < 8; ++j) items.emplace_back("uni:f" + std::to_string(j), j + 1.0);
  std::vector<double> ref;
  for (int i = 0; i < 20; ++i) {
    std::shuffle(items.begin(), items.end(), rng);
    FeatureVector x;
    for (const auto& [k, v] : items) x.emplace(k, v);
    const auto p = predict_proba(m, x);
    if (ref.empty()) ref = p;
    CHECK(p == ref);
  }
}

TEST_CASE("model save and load round trip; version mismatch is an error") {
  std::mt19937_64 rng(1);
  const auto m = random_model(rng, 6, 1.0);
  testing::TempDir dir;
  save_model(m, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  CHECK(back.parameters() == m.parameters());
  CHECK(back.vocabulary() == m.vocabulary());
  CHECK(back.classes() == m.classes());

  auto j = nlohmann::json::parse(read_file(dir / "m.json"));
  j["version"] = kModelVersion + 1;
  testing::write_text(dir / "bad.json", j.dump());
  CHECK_THROWS_AS(load_model(dir / "bad.json"), ConfigError);
}

TEST_CASE("labeled corpus round trip") {
  const std::vector<LabeledText> corpus{{"crash on Corniche", true, false}, {"jam on toast", false, true}};
  testing::TempDir dir;
  save_labeled_corpus(corpus, dir / "c.jsonl");
  const auto back = load_labeled_corpus(dir / "c.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].text == "crash on Corniche");
  CHECK(back[0].relevant);
  CHECK_FALSE(back[1].relevant);
  CHECK(back[1].has_media);
}
