#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "ground/evaluation.hpp"
#include "support.hpp"

using namespace ground;

namespace {

// Sequences of single tokens giving exactly the requested word-level counts.
void append_tokens(std::vector<std::vector<std::size_t>>& pred, std::vector<std::vector<std::size_t>>& gold,
                   std::size_t p, std::size_t g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    pred.push_back({p});
    gold.push_back({g});
  }
}

std::vector<bool> bools(std::size_t n_true, std::size_t n_false) {
  std::vector<bool> v(n_true, true);
  v.resize(n_true + n_false, false);
  return v;
}

}  // namespace

TEST_CASE("all-positive predictions on a 0.337 positive rate") {
  const auto gold = bools(337, 663);
  const std::vector<bool> pred(1000, true);
  const auto m = eval::classification_metrics(pred, gold);
  CHECK(m.precision == 0.337);
  CHECK(m.recall == 1.0);
  CHECK(m.accuracy == 0.337);
  CHECK(m.f1 == doctest::Approx(2 * 0.337 / 1.337).epsilon(1e-12));
  CHECK(std::abs(m.f1 - 0.505) <= 0.001);
  CHECK(m.tp == 337);
  CHECK(m.fp == 663);
  CHECK(m.total() == 1000);
}

TEST_CASE("word-level counts reproduce the CRF and gazetteer rows") {
  const ner::LabelSet labels;
  const auto b_loc = *labels.begin_of("LOC");
  const auto o = labels.outside();
  {
    std::vector<std::vector<std::size_t>> pred, gold;
    append_tokens(pred, gold, b_loc, b_loc, 896);
    append_tokens(pred, gold, b_loc, o, 104);
    append_tokens(pred, gold, o, b_loc, 434);
    append_tokens(pred, gold, o, o, 5000);
    const auto r = eval::word_level_ner_metrics(pred, gold, labels);
    CHECK(r.micro.tp == 896);
    CHECK(r.micro.fp == 104);
    CHECK(r.micro.fn == 434);
    CHECK(std::abs(r.micro.precision - 0.896) <= 0.001);
    CHECK(std::abs(r.micro.recall - 0.674) <= 0.001);
    CHECK(std::abs(r.micro.f1 - 0.769) <= 0.001);
    CHECK(r.per_type.at("LOC").tp == 896);
    CHECK(r.per_type.at("LMK").tp == 0);
  }
  {
    std::vector<std::vector<std::size_t>> pred, gold;
    append_tokens(pred, gold, b_loc, b_loc, 388);
    append_tokens(pred, gold, b_loc, o, 91);
    append_tokens(pred, gold, o, b_loc, 2832);
    const auto r = eval::word_level_ner_metrics(pred, gold, labels);
    CHECK(std::abs(r.micro.precision - 0.810) <= 0.0005);
    CHECK(std::abs(r.micro.recall - 0.120) <= 0.001);
    CHECK(std::abs(r.micro.f1 - 0.210) <= 0.001);
  }
}

TEST_CASE("zero denominators give zero") {
  const auto m = eval::Metrics::from_counts(0, 0, 0, 5);
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.accuracy == 1.0);
  const auto empty = eval::Metrics::from_counts(0, 0, 0, 0);
  CHECK(empty.accuracy == 0.0);
  const auto none_predicted = eval::classification_metrics(std::vector<bool>(4, false), bools(2, 2));
  CHECK(none_predicted.precision == 0.0);
  CHECK(none_predicted.recall == 0.0);
  CHECK(none_predicted.accuracy == 0.5);
}

TEST_CASE("classification metrics input errors") {
  CHECK_THROWS_AS(eval::classification_metrics({true}, {true, false}), Error);
  CHECK_THROWS_AS(eval::classification_metrics({}, {}), Error);
  const std::vector<std::vector<std::size_t>> a{{0, 0}}, b{{0}};
  CHECK_THROWS_AS(eval::word_level_ner_metrics(a, b), Error);
}

TEST_CASE("f1 is the harmonic mean and metrics ignore order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + testing::pick(rng, 60);
    std::vector<bool> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = testing::pick(rng, 2) == 1;
      gold[i] = testing::pick(rng, 2) == 1;
    }
    const auto m = eval::classification_metrics(pred, gold);
    if (m.precision > 0 && m.recall > 0) {
      CHECK(m.f1 == doctest::Approx(1.0 / ((1.0 / m.precision + 1.0 / m.recall) / 2.0)).epsilon(1e-12));
    }
    CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
    CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
    CHECK(m.total() == n);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<bool> pp(n), gp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = pred[perm[i]];
      gp[i] = gold[perm[i]];
    }
    const auto m2 = eval::classification_metrics(pp, gp);
    CHECK(m2.tp == m.tp);
    CHECK(m2.fp == m.fp);
    CHECK(m2.f1 == m.f1);
  }
}

TEST_CASE("word-level counts agree with a label-string recount") {
  const ner::LabelSet labels;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::size_t>> pred, gold;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    const std::size_t seqs = 1 + testing::pick(rng, 5);
    for (std::size_t s = 0; s < seqs; ++s) {
      const std::size_t len = 1 + testing::pick(rng, 8);
      std::vector<std::size_t> p(len), g(len);
      for (std::size_t t = 0; t < len; ++t) {
        p[t] = testing::pick(rng, labels.size());
        g[t] = testing::pick(rng, labels.size());
        const std::string pn = labels.name(p[t]), gn = labels.name(g[t]);
        if (pn != "O" && pn == gn) ++tp;
        if (pn != "O" && pn != gn) ++fp;
        if (gn != "O" && pn != gn) ++fn;
        if (pn == "O" && gn == "O") ++tn;
      }
      pred.push_back(p);
      gold.push_back(g);
    }
    const auto r = eval::word_level_ner_metrics(pred, gold, labels);
    CHECK(r.micro.tp == tp);
    CHECK(r.micro.fp == fp);
    CHECK(r.micro.fn == fn);
    CHECK(r.micro.tn == tn);
    std::size_t type_tp = 0;
    for (const auto& [type, m] : r.per_type) type_tp += m.tp;
    CHECK(type_tp == tp);
  }
}

TEST_CASE("span-level scoring matches whole entities only") {
  const ner::LabelSet labels;
  const auto B = *labels.begin_of("LOC"), I = *labels.inside_of("LOC"), O = labels.outside();
  const auto L = *labels.begin_of("LMK");
  const std::vector<std::vector<std::size_t>> gold{{B, I, O, L}};
  const std::vector<std::vector<std::size_t>> pred{{B, O, O, L}};
  const auto m = eval::span_level_ner_metrics(pred, gold, labels);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.accuracy == 0.0);
}

TEST_CASE("fold assignment partitions evenly and is seeded") {
  for (std::size_t n : {2u, 10u, 11u, 99u, 1000u}) {
    for (std::size_t k : {2u, 3u, 5u, 10u}) {
      if (k > n) continue;
      const auto f = eval::fold_assignment(n, k, 42);
      REQUIRE(f.size() == n);
      std::vector<std::size_t> sizes(k, 0);
      for (auto x : f) {
        REQUIRE(x < k);
        ++sizes[x];
      }
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
      CHECK(*lo >= 1);
      CHECK(eval::fold_assignment(n, k, 42) == f);
    }
  }
  CHECK(eval::fold_assignment(100, 5, 1) != eval::fold_assignment(100, 5, 2));
}

TEST_CASE("kfold cv with a constant predictor recovers the class rate") {
  std::vector<int> corpus(90);
  for (std::size_t i = 0; i < corpus.size(); ++i) corpus[i] = i % 3 == 0;
  std::size_t calls = 0, tested = 0;
  const auto cv = eval::kfold_cv(std::span<const int>(corpus), 10, 3,
                                 [&](const std::vector<int>& train, const std::vector<int>& test) {
                                   ++calls;
                                   tested += test.size();
                                   CHECK(train.size() + test.size() == corpus.size());
                                   std::vector<bool> pred(test.size(), false), gold;
                                   for (int x : test) gold.push_back(x == 1);
                                   return eval::classification_metrics(pred, gold);
                                 });
  CHECK(calls == 10);
  CHECK(tested == corpus.size());
  CHECK(cv.folds.size() == 10);
  CHECK(cv.mean.tn + cv.mean.fn == corpus.size());
  CHECK(cv.mean.fn == 30);
  // Folds of 9 each: the mean of per-fold accuracies equals the pooled rate.
  CHECK(cv.mean.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("kfold cv argument errors") {
  const std::vector<int> five(5, 0);
  const auto eval_fn = [](const std::vector<int>&, const std::vector<int>&) { return eval::Metrics{}; };
  CHECK_THROWS_AS(eval::kfold_cv(std::span<const int>(five), 1, 0, eval_fn), Error);
  CHECK_THROWS_AS(eval::kfold_cv(std::span<const int>(five), 6, 0, eval_fn), Error);
  CHECK_NOTHROW(eval::kfold_cv(std::span<const int>(five), 5, 0, eval_fn));
}

TEST_CASE("mean metrics averages rates and sums counts") {
  const std::vector<eval::Metrics> folds{eval::Metrics::from_counts(1, 1, 0, 2), eval::Metrics::from_counts(2, 0, 2, 0)};
  const auto m = eval::mean_metrics(folds);
  CHECK(m.precision == doctest::Approx(0.75));
  CHECK(m.recall == doctest::Approx(0.75));
  CHECK(m.tp == 3);
  CHECK(m.tn == 2);
  CHECK(eval::mean_metrics({}).f1 == 0.0);
}

TEST_CASE("metrics table layout") {
  const auto table = eval::format_table({{"Keyword-based", eval::Metrics::from_counts(337, 663, 0, 0)},
                                         {"MaxEnt", eval::Metrics::from_counts(1, 0, 0, 1)}});
  CHECK(table ==
        "Method           Prec    Rec     F1    Acc\n"
        "Keyword-based   0.337  1.000  0.504  0.337\n"
        "MaxEnt          1.000  1.000  1.000  1.000\n");
  const auto j = eval::to_json(eval::Metrics::from_counts(1, 2, 3, 4));
  CHECK(j["tp"] == 1);
  CHECK(j["tn"] == 4);
}
