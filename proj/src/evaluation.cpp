#include "ground/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

namespace ground::eval {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_aligned(std::span<const std::vector<std::size_t>> predicted, std::span<const std::vector<std::size_t>> gold) {
  if (predicted.size() != gold.size()) throw Error("ner metrics: sequence count mismatch");
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].size() != gold[i].size()) {
      throw Error("ner metrics: length mismatch in sequence " + std::to_string(i));
    }
  }
}

using Span = std::tuple<std::size_t, std::size_t, std::string>;

std::set<Span> spans_of(const std::vector<std::size_t>& labels, const ner::LabelSet& set) {
  std::set<Span> out;
  for (std::size_t t = 0; t < labels.size();) {
    if (set.is_outside(labels[t])) {
      ++t;
      continue;
    }
    const auto type = set.type(labels[t]);
    std::size_t end = t + 1;
    while (end < labels.size() && set.is_inside(labels[end]) && set.type(labels[end]) == type) ++end;
    out.emplace(t, end, type);
    t = end;
  }
  return out;
}

}  // namespace

Metrics Metrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
  return m;
}

Metrics classification_metrics(const std::vector<bool>& predicted, const std::vector<bool>& gold) {
  if (predicted.size() != gold.size()) throw Error("classification_metrics: length mismatch");
  if (gold.empty()) throw Error("classification_metrics: empty input");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] && gold[i]) ++tp;
    else if (predicted[i]) ++fp;
    else if (gold[i]) ++fn;
    else ++tn;
  }
  return Metrics::from_counts(tp, fp, fn, tn);
}

NerReport word_level_ner_metrics(std::span<const std::vector<std::size_t>> predicted,
                                 std::span<const std::vector<std::size_t>> gold, const ner::LabelSet& labels) {
  check_aligned(predicted, gold);
  struct C {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  };
  C all;
  std::map<std::string, C> by_type;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels.is_outside(i)) by_type[labels.type(i)];
  }
  for (std::size_t s = 0; s < gold.size(); ++s) {
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      const auto p = predicted[s][t];
      const auto g = gold[s][t];
      const bool p_ent = !labels.is_outside(p);
      const bool g_ent = !labels.is_outside(g);
      if (p_ent && p == g) ++all.tp;
      if (p_ent && p != g) ++all.fp;
      if (g_ent && p != g) ++all.fn;
      if (!p_ent && !g_ent) ++all.tn;
      for (auto& [type, c] : by_type) {
        const bool p_x = p_ent && labels.type(p) == type;
        const bool g_x = g_ent && labels.type(g) == type;
        if (p_x && p == g) ++c.tp;
        if (p_x && p != g) ++c.fp;
        if (g_x && p != g) ++c.fn;
        if (!p_x && !g_x) ++c.tn;
      }
    }
  }
  NerReport r;
  r.micro = Metrics::from_counts(all.tp, all.fp, all.fn, all.tn);
  for (const auto& [type, c] : by_type) r.per_type[type] = Metrics::from_counts(c.tp, c.fp, c.fn, c.tn);
  return r;
}

Metrics span_level_ner_metrics(std::span<const std::vector<std::size_t>> predicted,
                               std::span<const std::vector<std::size_t>> gold, const ner::LabelSet& labels) {
  check_aligned(predicted, gold);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto ps = spans_of(predicted[s], labels);
    const auto gs = spans_of(gold[s], labels);
    for (const auto& x : ps) (gs.count(x) ? tp : fp) += 1;
    for (const auto& x : gs) fn += ps.count(x) ? 0 : 1;
  }
  auto m = Metrics::from_counts(tp, fp, fn, 0);
  m.accuracy = 0.0;
  return m;
}

Metrics mean_metrics(std::span<const Metrics> folds) {
  Metrics m;
  if (folds.empty()) return m;
  for (const auto& f : folds) {
    m.precision += f.precision;
    m.recall += f.recall;
    m.f1 += f.f1;
    m.accuracy += f.accuracy;
    m.tp += f.tp;
    m.fp += f.fp;
    m.fn += f.fn;
    m.tn += f.tn;
  }
  const auto n = static_cast<double>(folds.size());
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  m.accuracy /= n;
  return m;
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error("fold_assignment: k must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t pos = f * n / k; pos < (f + 1) * n / k; ++pos) fold[order[pos]] = f;
  }
  return fold;
}

nlohmann::ordered_json to_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"accuracy", m.accuracy},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}, {"tn", m.tn}};
}

std::string format_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t width = 6;
  for (const auto& [name, m] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %6s %6s %6s %6s\n", static_cast<int>(width), "Method", "Prec", "Rec", "F1", "Acc");
  out += buf;
  for (const auto& [name, m] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %6.3f %6.3f %6.3f %6.3f\n", static_cast<int>(width), name.c_str(), m.precision,
                  m.recall, m.f1, m.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace ground::eval
