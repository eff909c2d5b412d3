#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ground/gazetteer.hpp"
#include "ground/optimize.hpp"
#include "ground/text.hpp"

namespace ground::ner {

/// Ordered BIO label inventory. The default is {O, B-LOC, I-LOC, B-LMK, I-LMK}.
class LabelSet {
 public:
  LabelSet();
  /// Throws ConfigError unless "O" is present and every B-X has a matching I-X.
  explicit LabelSet(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& name(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& names() const noexcept { return labels_; }
  std::optional<std::size_t> index(std::string_view name) const;
  std::size_t outside() const noexcept { return outside_; }

  bool is_outside(std::size_t i) const noexcept { return i == outside_; }
  bool is_begin(std::size_t i) const { return labels_.at(i).starts_with("B-"); }
  bool is_inside(std::size_t i) const { return labels_.at(i).starts_with("I-"); }
  /// Entity type suffix ("LOC"); empty for O.
  std::string type(std::size_t i) const;
  std::optional<std::size_t> begin_of(std::string_view type) const;
  std::optional<std::size_t> inside_of(std::string_view type) const;

  /// BIO legality: I-X may only follow B-X or I-X. `prev` empty means sequence start.
  bool allowed(std::optional<std::size_t> prev, std::size_t cur) const;

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::size_t outside_ = 0;
};

bool bio_consistent(std::span<const std::size_t> labels, const LabelSet& set);

/// Entity type tag for a gazetteer kind ("LOC" / "LMK").
std::string_view entity_type(gaz::EntityKind kind) noexcept;
std::optional<gaz::EntityKind> entity_kind(std::string_view type) noexcept;

// ---------------------------------------------------------------------------
// Features

enum class Template { Bias, Word, PrevWord, NextWord, Pos, Shape, Gazetteer };

std::string_view to_string(Template t) noexcept;
std::optional<Template> parse_template(std::string_view s) noexcept;
std::vector<Template> default_templates(bool use_pos = true);

/// Capitalization pattern with repeats collapsed: "Corniche" -> "Xx", "C-Ring" -> "X-Xx".
std::string word_shape(std::string_view surface);

using PositionFeatures = std::vector<std::vector<std::string>>;

/// Per-position feature strings. Window features are absent at the edges.
/// Gazetteer flags mark every token covered by some alias window of up to 4 tokens.
/// `pos_tags` may be empty when the Pos template is not used.
PositionFeatures extract_sequence_features(std::span<const text::Token> tokens, std::span<const text::PosTag> pos_tags,
                                           const gaz::Gazetteer& gazetteer,
                                           std::span<const Template> templates = default_templates());

// ---------------------------------------------------------------------------
// Model

struct TrainConfig {
  double l2_lambda = 0.1;
  int max_iters = 500;
  double tolerance = 1e-6;
  double initial_step = 1.0;
  bool use_pos = true;
};

class CrfModel {
 public:
  CrfModel() = default;
  CrfModel(LabelSet labels, std::vector<Template> templates, std::vector<std::string> vocabulary, double l2_lambda);

  const LabelSet& labels() const noexcept { return labels_; }
  const std::vector<Template>& templates() const noexcept { return templates_; }
  bool uses_pos() const noexcept;
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  std::size_t num_labels() const noexcept { return labels_.size(); }
  std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
  double l2_lambda() const noexcept { return l2_lambda_; }

  std::optional<std::size_t> feature_index(std::string_view feature) const;

  double& emission(std::size_t feature, std::size_t label) { return emission_[feature * num_labels() + label]; }
  double emission(std::size_t feature, std::size_t label) const { return emission_[feature * num_labels() + label]; }
  double& transition(std::size_t from, std::size_t to) { return transition_[from * num_labels() + to]; }
  double transition(std::size_t from, std::size_t to) const { return transition_[from * num_labels() + to]; }
  void set_emission(std::string_view feature, std::size_t label, double value);

  /// Flat parameters: feature-major emission weights, then row-major transitions.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);
  std::size_t num_parameters() const noexcept { return emission_.size() + transition_.size(); }

  using IndexedSequence = std::vector<std::vector<std::uint32_t>>;
  /// Maps feature strings to vocabulary ids, dropping unknown features.
  IndexedSequence index(const PositionFeatures& features) const;

  nlohmann::ordered_json to_json() const;
  static CrfModel from_json(const nlohmann::json& j);

 private:
  LabelSet labels_;
  std::vector<Template> templates_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> emission_;
  std::vector<double> transition_;
  double l2_lambda_ = 0.0;
};

inline constexpr int kModelVersion = 1;
void save_model(const CrfModel& model, const std::filesystem::path& path);
/// Throws ConfigError on a format or version mismatch.
CrfModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Inference

struct Marginals {
  double log_partition = 0.0;
  std::size_t length = 0;
  std::size_t num_labels = 0;
  std::vector<double> node;  // length x num_labels
  std::vector<double> edge;  // (length-1) x num_labels x num_labels; entry t-1 is the (t-1, t) pair

  double node_at(std::size_t t, std::size_t y) const { return node[t * num_labels + y]; }
  /// Pair marginal of (y_{t-1} = a, y_t = b), t >= 1.
  double edge_at(std::size_t t, std::size_t a, std::size_t b) const {
    return edge[((t - 1) * num_labels + a) * num_labels + b];
  }
};

/// Log-space forward-backward over all label sequences (no BIO mask).
Marginals forward_backward(const CrfModel& model, const PositionFeatures& features);

/// Unnormalized log score of a labeling.
double sequence_score(const CrfModel& model, const PositionFeatures& features, std::span<const std::size_t> labels);

struct Decoded {
  std::vector<std::size_t> labels;
  double score = 0.0;
};

/// Max-scoring label sequence; ties go to the earlier label in label-set
/// order. With enforce_bio, illegal BIO transitions (and a leading I-X) are
/// excluded.
Decoded viterbi_decode(const CrfModel& model, const PositionFeatures& features, bool enforce_bio = true);

/// Decodes many sequences in parallel.
std::vector<std::vector<std::size_t>> decode_batch(const CrfModel& model, std::span<const PositionFeatures> batch);

// ---------------------------------------------------------------------------
// Training

struct FeatureSequence {
  PositionFeatures features;
  std::vector<std::size_t> labels;
};

struct AnnotatedSequence {
  std::string id;
  std::vector<text::Token> tokens;
  std::vector<std::size_t> labels;
};

struct Gradient {
  double value = 0.0;
  std::vector<double> grad;  // same layout as CrfModel::parameters()
};

/// -sum log P(y|x) + (lambda/2)||w||^2 and its gradient (expected minus
/// empirical feature counts plus lambda*w). Sequences are processed in
/// parallel with a fixed-order reduction.
Gradient neg_loglik_and_gradient(const CrfModel& model, std::span<const FeatureSequence> data);

namespace serial {
Gradient neg_loglik_and_gradient(const CrfModel& model, std::span<const FeatureSequence> data);
std::vector<std::vector<std::size_t>> decode_batch(const CrfModel& model, std::span<const PositionFeatures> batch);
}  // namespace serial

struct TrainStats {
  optim::Result optimizer;
};

/// Vocabulary is every feature seen in `data`. Throws Error on a
/// BIO-inconsistent gold sequence (naming its index).
CrfModel train_crf(std::span<const FeatureSequence> data, const LabelSet& labels, std::vector<Template> templates,
                   const TrainConfig& config, TrainStats* stats = nullptr);

/// Extracts features (POS only when config.use_pos) and trains.
CrfModel train_crf(std::span<const AnnotatedSequence> data, const gaz::Gazetteer& gazetteer,
                   const text::PosLexicon& lexicon, const TrainConfig& config, TrainStats* stats = nullptr);

/// Feature extraction + Viterbi for a token sequence.
std::vector<std::size_t> tag(const CrfModel& model, std::span<const text::Token> tokens, const gaz::Gazetteer& gazetteer,
                             const text::PosLexicon& lexicon);

// ---------------------------------------------------------------------------
// Gazetteer baseline and expression assembly

/// Greedy left-to-right longest match against gazetteer aliases (window <= max_window).
std::vector<std::size_t> gazetteer_tag(std::span<const text::Token> tokens, const gaz::Gazetteer& gazetteer,
                                       const LabelSet& labels = LabelSet(), std::size_t max_window = 6);

struct Constituent {
  std::size_t start = 0;  // token index
  std::size_t end = 0;    // exclusive
  std::string name;
  gaz::EntityKind kind = gaz::EntityKind::Location;
};

struct LocationExpression {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;  // token surfaces joined by single spaces
  gaz::EntityKind kind = gaz::EntityKind::Location;
  std::vector<Constituent> constituents;

  std::vector<std::string> names() const;
  bool compound() const noexcept { return constituents.size() > 1; }
};

struct AssembleOptions {
  std::vector<std::string> connectors{"between", "and", "to", "near", "opposite"};
  std::size_t max_gap = 3;
};

/// Each maximal B-X I-X* run is an entity. Runs separated only by 1..max_gap
/// connector tokens merge into one compound expression; the expression kind is
/// that of its first constituent.
std::vector<LocationExpression> assemble_location_expressions(std::span<const text::Token> tokens,
                                                              std::span<const std::size_t> labels,
                                                              const LabelSet& set = LabelSet(),
                                                              const AssembleOptions& options = {});

// ---------------------------------------------------------------------------
// Column corpus: "surface TAB label" per line, blank line between sequences.

std::vector<AnnotatedSequence> load_column_corpus(const std::filesystem::path& path, const LabelSet& labels = LabelSet());
void save_column_corpus(std::span<const AnnotatedSequence> corpus, const std::filesystem::path& path,
                        const LabelSet& labels = LabelSet());

}  // namespace ground::ner
