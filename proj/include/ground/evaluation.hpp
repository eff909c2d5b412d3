#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ground/crf.hpp"
#include "ground/util.hpp"

namespace ground::eval {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  /// Zero denominators give zero.
  static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
};

/// Positive class is "relevant" (true). Throws Error on length mismatch or empty input.
Metrics classification_metrics(const std::vector<bool>& predicted, const std::vector<bool>& gold);

struct NerReport {
  Metrics micro;                          // over all entity types
  std::map<std::string, Metrics> per_type;  // keyed by type suffix ("LOC")
};

/// Token-level scoring: a non-O prediction equal to the gold label is a true
/// positive, any other non-O prediction a false positive, a non-O gold label
/// not predicted exactly a false negative; O/O pairs are true negatives.
NerReport word_level_ner_metrics(std::span<const std::vector<std::size_t>> predicted,
                                 std::span<const std::vector<std::size_t>> gold, const ner::LabelSet& labels = {});

/// Exact (start, end, type) entity matches. Diagnostic only; accuracy is left at 0.
Metrics span_level_ner_metrics(std::span<const std::vector<std::size_t>> predicted,
                               std::span<const std::vector<std::size_t>> gold, const ner::LabelSet& labels = {});

/// Unweighted mean of the rates; counts are summed.
Metrics mean_metrics(std::span<const Metrics> folds);

/// Fold index of every example after a seeded shuffle. Fold sizes differ by at most one.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

struct CvResult {
  std::vector<Metrics> folds;
  Metrics mean;
};

/// evaluate(train, test) -> Metrics is called once per fold, in fold order.
template <class T, class Evaluate>
CvResult kfold_cv(std::span<const T> corpus, std::size_t k, std::uint64_t seed, Evaluate&& evaluate) {
  if (k < 2) throw Error("kfold_cv: k must be at least 2");
  if (corpus.size() < k) throw Error("kfold_cv: corpus smaller than k");
  const auto folds = fold_assignment(corpus.size(), k, seed);
  CvResult out;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<T> train, test;
    for (std::size_t i = 0; i < corpus.size(); ++i) (folds[i] == f ? test : train).push_back(corpus[i]);
    out.folds.push_back(evaluate(std::as_const(train), std::as_const(test)));
  }
  out.mean = mean_metrics(out.folds);
  return out;
}

nlohmann::ordered_json to_json(const Metrics& m);

/// Plain-text table with Prec / Rec / F1 / Acc columns, three decimals.
std::string format_table(const std::vector<std::pair<std::string, Metrics>>& rows);

}  // namespace ground::eval
