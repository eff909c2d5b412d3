#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ground/optimize.hpp"
#include "ground/text.hpp"

namespace ground::maxent {

/// Sparse feature counts. Keys are namespaced ("uni:", "bi:", "meta:").
/// Ordered so that iteration (and anything summed over it) is deterministic.
using FeatureVector = std::map<std::string, double>;

/// Unigrams through n_max-grams over normalized forms, URLs dropped.
/// Emits "meta:has_media" when the post carries media.
FeatureVector extract_ngram_features(std::span<const text::Token> tokens, int n_max, bool has_media = false);

/// tokenize -> simplify_entities -> extract_ngram_features.
FeatureVector featurize(std::string_view text, bool has_media, const text::Simplifier& simplifier, int n_max);

inline constexpr std::size_t kRelevant = 0;
inline constexpr std::size_t kIrrelevant = 1;

struct LabeledExample {
  FeatureVector features;
  std::size_t label = kRelevant;  // index into the model's class list
};

struct TrainConfig {
  double l2_lambda = 0.1;
  int max_iters = 500;
  double tolerance = 1e-6;
  double initial_step = 1.0;
  int ngram_max = 2;
};

class MaxEntModel {
 public:
  MaxEntModel() = default;
  MaxEntModel(std::vector<std::string> classes, std::vector<std::string> vocabulary, TrainConfig config = {});

  std::size_t num_classes() const noexcept { return classes_.size(); }
  std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  const TrainConfig& config() const noexcept { return config_; }

  std::optional<std::size_t> feature_index(std::string_view feature) const;
  std::optional<std::size_t> class_index(std::string_view name) const;

  double& weight(std::size_t cls, std::size_t feature) { return weights_[cls * vocabulary_.size() + feature]; }
  double weight(std::size_t cls, std::size_t feature) const { return weights_[cls * vocabulary_.size() + feature]; }
  /// Convenience for tests: sets the weight of a vocabulary feature by name.
  void set_weight(std::size_t cls, std::string_view feature, double value);
  double& bias(std::size_t cls) { return bias_[cls]; }
  double bias(std::size_t cls) const { return bias_[cls]; }

  /// Flat parameter vector: class-major weights, then one bias per class.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);
  std::size_t num_parameters() const noexcept { return weights_.size() + bias_.size(); }

  nlohmann::ordered_json to_json() const;
  static MaxEntModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> classes_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  TrainConfig config_;
};

inline constexpr int kModelVersion = 1;
void save_model(const MaxEntModel& model, const std::filesystem::path& path);
/// Throws ConfigError on a format or version mismatch.
MaxEntModel load_model(const std::filesystem::path& path);

/// Softmax over classes, computed with max-subtraction. Unknown features are ignored.
std::vector<double> predict_proba(const MaxEntModel& model, const FeatureVector& x);

struct Gradient {
  double value = 0.0;
  std::vector<double> weights;  // same layout as the model's weights
  std::vector<double> bias;
};

/// L(w) = -sum_i log P(y_i | x_i) + (lambda/2) ||w||^2 and its exact gradient.
/// The bias terms are not regularized. Examples are processed in parallel with
/// a fixed-order reduction.
Gradient neg_loglik_and_gradient(const MaxEntModel& model, std::span<const LabeledExample> data);

namespace serial {
/// Single-threaded reference, one example at a time in data order.
Gradient neg_loglik_and_gradient(const MaxEntModel& model, std::span<const LabeledExample> data);
}  // namespace serial

struct TrainStats {
  optim::Result optimizer;
};

/// Zero-initialized batch gradient descent. Throws Error when a class has no
/// examples.
MaxEntModel train_maxent(std::span<const LabeledExample> data, const TrainConfig& config,
                         TrainStats* stats = nullptr,
                         std::vector<std::string> classes = {"relevant", "irrelevant"});

/// relevant iff P(relevant | x) >= threshold.
bool classify(const MaxEntModel& model, const FeatureVector& x, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Labeled corpus: newline-delimited {"text": ..., "label": "relevant"|"irrelevant"}.

struct LabeledText {
  std::string text;
  bool relevant = false;
  bool has_media = false;
};

std::vector<LabeledText> load_labeled_corpus(const std::filesystem::path& path);
void save_labeled_corpus(std::span<const LabeledText> corpus, const std::filesystem::path& path);

std::vector<LabeledExample> to_examples(std::span<const LabeledText> corpus, const text::Simplifier& simplifier,
                                        int n_max);

}  // namespace ground::maxent
