#include "ground/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ground/parallel.hpp"
#include "ground/util.hpp"

namespace ground::maxent {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string ngram_prefix(int n) {
  switch (n) {
    case 1: return "uni:";
    case 2: return "bi:";
    case 3: return "tri:";
    default: return "n" + std::to_string(n) + ":";
  }
}

struct IndexedExample {
  std::vector<std::pair<std::uint32_t, double>> features;
  std::size_t label;
};

std::vector<IndexedExample> index_examples(const MaxEntModel& model, std::span<const LabeledExample> data) {
  std::vector<IndexedExample> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    IndexedExample ie{{}, ex.label};
    for (const auto& [name, count] : ex.features) {
      if (count == 0.0) continue;
      if (auto idx = model.feature_index(name)) ie.features.emplace_back(static_cast<std::uint32_t>(*idx), count);
    }
    out.push_back(std::move(ie));
  }
  return out;
}

// Adds the data term of one example into `acc` = [value | weight grads | bias grads].
void accumulate_example(const IndexedExample& ex, std::span<const double> params, std::size_t num_classes,
                        std::size_t vocab, std::span<double> acc, std::vector<double>& scores) {
  const std::size_t bias_off = num_classes * vocab;
  scores.assign(num_classes, 0.0);
  for (std::size_t y = 0; y < num_classes; ++y) {
    double s = params[bias_off + y];
    const double* w = params.data() + y * vocab;
    for (const auto& [f, v] : ex.features) s += w[f] * v;
    scores[y] = s;
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  const double log_z = mx + std::log(z);
  acc[0] += log_z - scores[ex.label];
  for (std::size_t y = 0; y < num_classes; ++y) {
    const double resid = std::exp(scores[y] - log_z) - (y == ex.label ? 1.0 : 0.0);
    double* g = acc.data() + 1 + y * vocab;
    for (const auto& [f, v] : ex.features) g[f] += resid * v;
    acc[1 + bias_off + y] += resid;
  }
}

void add_regularizer(std::span<const double> params, std::size_t n_weights, double lambda, double& value,
                     std::span<double> weight_grad) {
  double sq = 0.0;
  for (std::size_t i = 0; i < n_weights; ++i) {
    sq += params[i] * params[i];
    weight_grad[i] += lambda * params[i];
  }
  value += 0.5 * lambda * sq;
}

// Returns [value | grad] for flat parameters.
std::vector<double> objective_parallel(std::span<const IndexedExample> data, std::span<const double> params,
                                       std::size_t num_classes, std::size_t vocab, double lambda) {
  const std::size_t width = 1 + params.size();
  auto acc = parallel::block_reduce(data.size(), width, [&](std::size_t lo, std::size_t hi, std::span<double> part) {
    std::vector<double> scores;
    for (std::size_t i = lo; i < hi; ++i) accumulate_example(data[i], params, num_classes, vocab, part, scores);
  });
  add_regularizer(params, num_classes * vocab, lambda, acc[0], std::span<double>(acc).subspan(1));
  return acc;
}

std::vector<double> objective_serial(std::span<const IndexedExample> data, std::span<const double> params,
                                     std::size_t num_classes, std::size_t vocab, double lambda) {
  std::vector<double> acc(1 + params.size(), 0.0);
  std::vector<double> scores;
  for (const auto& ex : data) accumulate_example(ex, params, num_classes, vocab, acc, scores);
  add_regularizer(params, num_classes * vocab, lambda, acc[0], std::span<double>(acc).subspan(1));
  return acc;
}

Gradient unpack(const std::vector<double>& acc, std::size_t n_weights, std::size_t num_classes) {
  Gradient g;
  g.value = acc[0];
  g.weights.assign(acc.begin() + 1, acc.begin() + 1 + static_cast<std::ptrdiff_t>(n_weights));
  g.bias.assign(acc.begin() + 1 + static_cast<std::ptrdiff_t>(n_weights),
                acc.begin() + 1 + static_cast<std::ptrdiff_t>(n_weights + num_classes));
  return g;
}

}  // namespace

FeatureVector extract_ngram_features(std::span<const text::Token> tokens, int n_max, bool has_media) {
  FeatureVector fv;
  std::vector<const std::string*> forms;
  for (const auto& t : tokens) {
    if (t.kind != text::TokenKind::Url) forms.push_back(&t.normalized);
  }
  for (int n = 1; n <= n_max; ++n) {
    const auto prefix = ngram_prefix(n);
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= forms.size(); ++i) {
      std::string key = prefix;
      for (int k = 0; k < n; ++k) {
        if (k) key += '_';
        key += *forms[i + static_cast<std::size_t>(k)];
      }
      fv[key] += 1.0;
    }
  }
  if (has_media) fv["meta:has_media"] = 1.0;
  return fv;
}

FeatureVector featurize(std::string_view text, bool has_media, const text::Simplifier& simplifier, int n_max) {
  return extract_ngram_features(text::simplify_entities(text::tokenize(text), simplifier), n_max, has_media);
}

// ---------------------------------------------------------------------------

MaxEntModel::MaxEntModel(std::vector<std::string> classes, std::vector<std::string> vocabulary, TrainConfig config)
    : classes_(std::move(classes)), vocabulary_(std::move(vocabulary)), config_(config) {
  if (classes_.size() < 2) throw ConfigError("maxent model needs at least two classes");
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) throw ConfigError("duplicate feature '" + vocabulary_[i] + "'");
  }
  weights_.assign(classes_.size() * vocabulary_.size(), 0.0);
  bias_.assign(classes_.size(), 0.0);
}

std::optional<std::size_t> MaxEntModel::feature_index(std::string_view feature) const {
  const auto it = index_.find(std::string(feature));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> MaxEntModel::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i] == name) return i;
  }
  return std::nullopt;
}

void MaxEntModel::set_weight(std::size_t cls, std::string_view feature, double value) {
  const auto idx = feature_index(feature);
  if (!idx) throw Error("feature '" + std::string(feature) + "' not in vocabulary");
  weight(cls, *idx) = value;
}

std::vector<double> MaxEntModel::parameters() const {
  std::vector<double> p(weights_);
  p.insert(p.end(), bias_.begin(), bias_.end());
  return p;
}

void MaxEntModel::set_parameters(std::span<const double> params) {
  if (params.size() != num_parameters()) throw Error("parameter vector size mismatch");
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(weights_.size()), weights_.begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(weights_.size()), params.end(), bias_.begin());
}

ordered_json MaxEntModel::to_json() const {
  ordered_json j;
  j["format"] = "ground-maxent";
  j["version"] = kModelVersion;
  j["classes"] = classes_;
  j["config"] = {{"l2_lambda", config_.l2_lambda},
                 {"max_iters", config_.max_iters},
                 {"tolerance", config_.tolerance},
                 {"initial_step", config_.initial_step},
                 {"ngram_max", config_.ngram_max}};
  j["vocabulary"] = vocabulary_;
  ordered_json rows = ordered_json::array();
  for (std::size_t y = 0; y < classes_.size(); ++y) {
    rows.push_back(std::vector<double>(weights_.begin() + static_cast<std::ptrdiff_t>(y * vocabulary_.size()),
                                       weights_.begin() + static_cast<std::ptrdiff_t>((y + 1) * vocabulary_.size())));
  }
  j["weights"] = std::move(rows);
  j["bias"] = bias_;
  return j;
}

MaxEntModel MaxEntModel::from_json(const json& j) {
  if (j.value("format", "") != "ground-maxent") throw ConfigError("not a maxent model file");
  if (j.value("version", -1) != kModelVersion) {
    throw ConfigError("maxent model version " + std::to_string(j.value("version", -1)) + " unsupported (expected " +
                      std::to_string(kModelVersion) + ")");
  }
  TrainConfig cfg;
  const auto& c = j.at("config");
  cfg.l2_lambda = c.at("l2_lambda").get<double>();
  cfg.max_iters = c.at("max_iters").get<int>();
  cfg.tolerance = c.at("tolerance").get<double>();
  cfg.initial_step = c.value("initial_step", 1.0);
  cfg.ngram_max = c.at("ngram_max").get<int>();
  MaxEntModel m(j.at("classes").get<std::vector<std::string>>(), j.at("vocabulary").get<std::vector<std::string>>(),
                cfg);
  const auto& rows = j.at("weights");
  if (rows.size() != m.num_classes()) throw ConfigError("maxent model: weight rows do not match classes");
  for (std::size_t y = 0; y < m.num_classes(); ++y) {
    const auto row = rows[y].get<std::vector<double>>();
    if (row.size() != m.vocabulary_size()) throw ConfigError("maxent model: weight row size mismatch");
    std::copy(row.begin(), row.end(), m.weights_.begin() + static_cast<std::ptrdiff_t>(y * m.vocabulary_size()));
  }
  m.bias_ = j.at("bias").get<std::vector<double>>();
  if (m.bias_.size() != m.num_classes()) throw ConfigError("maxent model: bias size mismatch");
  return m;
}

void save_model(const MaxEntModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << model.to_json().dump(1) << '\n';
}

MaxEntModel load_model(const std::filesystem::path& path) {
  try {
    return MaxEntModel::from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::vector<double> predict_proba(const MaxEntModel& model, const FeatureVector& x) {
  const std::size_t k = model.num_classes();
  std::vector<double> scores(k);
  for (std::size_t y = 0; y < k; ++y) scores[y] = model.bias(y);
  for (const auto& [name, count] : x) {
    const auto idx = model.feature_index(name);
    if (!idx) continue;
    for (std::size_t y = 0; y < k; ++y) scores[y] += model.weight(y, *idx) * count;
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (auto& s : scores) {
    s = std::exp(s - mx);
    z += s;
  }
  for (auto& s : scores) s /= z;
  return scores;
}

Gradient neg_loglik_and_gradient(const MaxEntModel& model, std::span<const LabeledExample> data) {
  const auto indexed = index_examples(model, data);
  const auto params = model.parameters();
  const auto acc = objective_parallel(indexed, params, model.num_classes(), model.vocabulary_size(),
                                      model.config().l2_lambda);
  return unpack(acc, model.num_classes() * model.vocabulary_size(), model.num_classes());
}

Gradient serial::neg_loglik_and_gradient(const MaxEntModel& model, std::span<const LabeledExample> data) {
  const auto indexed = index_examples(model, data);
  const auto params = model.parameters();
  const auto acc =
      objective_serial(indexed, params, model.num_classes(), model.vocabulary_size(), model.config().l2_lambda);
  return unpack(acc, model.num_classes() * model.vocabulary_size(), model.num_classes());
}

MaxEntModel train_maxent(std::span<const LabeledExample> data, const TrainConfig& config, TrainStats* stats,
                         std::vector<std::string> classes) {
  std::vector<std::size_t> per_class(classes.size(), 0);
  for (const auto& ex : data) {
    if (ex.label >= classes.size()) throw Error("training example has unknown label " + std::to_string(ex.label));
    ++per_class[ex.label];
  }
  for (std::size_t y = 0; y < classes.size(); ++y) {
    if (per_class[y] == 0) throw Error("training data has no examples of class '" + classes[y] + "'");
  }

  std::set<std::string> vocab_set;
  for (const auto& ex : data) {
    for (const auto& [name, count] : ex.features) {
      if (count != 0.0) vocab_set.insert(name);
    }
  }
  MaxEntModel model(std::move(classes), std::vector<std::string>(vocab_set.begin(), vocab_set.end()), config);
  const auto indexed = index_examples(model, data);
  const std::size_t k = model.num_classes();
  const std::size_t v = model.vocabulary_size();

  const optim::Objective objective = [&](std::span<const double> x, std::span<double> grad) {
    const auto acc = objective_parallel(indexed, x, k, v, config.l2_lambda);
    std::copy(acc.begin() + 1, acc.end(), grad.begin());
    return acc[0];
  };
  optim::Config oc;
  oc.max_iters = config.max_iters;
  oc.tolerance = config.tolerance;
  oc.initial_step = config.initial_step;
  auto result = optim::minimize(objective, std::vector<double>(model.num_parameters(), 0.0), oc);
  model.set_parameters(result.x);
  if (stats) stats->optimizer = std::move(result);
  return model;
}

bool classify(const MaxEntModel& model, const FeatureVector& x, double threshold) {
  return predict_proba(model, x)[kRelevant] >= threshold;
}

// ---------------------------------------------------------------------------

std::vector<LabeledText> load_labeled_corpus(const std::filesystem::path& path) {
  std::vector<LabeledText> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      const auto j = json::parse(lines[i]);
      LabeledText t;
      t.text = j.at("text").get<std::string>();
      const auto label = j.at("label").get<std::string>();
      if (label == "relevant") {
        t.relevant = true;
      } else if (label != "irrelevant") {
        throw ParseError(path.string(), i + 1, "label must be 'relevant' or 'irrelevant'");
      }
      t.has_media = j.value("has_media", false);
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), i + 1, e.what());
    }
  }
  return out;
}

void save_labeled_corpus(std::span<const LabeledText> corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : corpus) {
    ordered_json j;
    j["text"] = t.text;
    j["label"] = t.relevant ? "relevant" : "irrelevant";
    if (t.has_media) j["has_media"] = true;
    out << j.dump() << '\n';
  }
}

std::vector<LabeledExample> to_examples(std::span<const LabeledText> corpus, const text::Simplifier& simplifier,
                                        int n_max) {
  std::vector<LabeledExample> out;
  out.reserve(corpus.size());
  for (const auto& t : corpus) {
    out.push_back({featurize(t.text, t.has_media, simplifier, n_max), t.relevant ? kRelevant : kIrrelevant});
  }
  return out;
}

}  // namespace ground::maxent
