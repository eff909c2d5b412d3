#include "ground/crf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "ground/parallel.hpp"
#include "ground/util.hpp"

namespace ground::ner {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* v, std::size_t n) {
  double mx = kNegInf;
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

// Parameter view shared by the model and the optimizer's flat vectors.
struct Params {
  const double* emission;    // V x K
  const double* transition;  // K x K
  std::size_t num_labels;
};

Params view(std::span<const double> flat, std::size_t vocab, std::size_t k) {
  return {flat.data(), flat.data() + vocab * k, k};
}

std::vector<double> emissions(const Params& p, const CrfModel::IndexedSequence& seq) {
  const std::size_t k = p.num_labels;
  std::vector<double> emit(seq.size() * k, 0.0);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    double* row = emit.data() + t * k;
    for (auto f : seq[t]) {
      const double* w = p.emission + static_cast<std::size_t>(f) * k;
      for (std::size_t y = 0; y < k; ++y) row[y] += w[y];
    }
  }
  return emit;
}

Marginals run_forward_backward(const std::vector<double>& emit, const double* trans, std::size_t len, std::size_t k) {
  Marginals m;
  m.length = len;
  m.num_labels = k;
  std::vector<double> alpha(len * k), beta(len * k), buf(k);

  for (std::size_t y = 0; y < k; ++y) alpha[y] = emit[y];
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t y = 0; y < k; ++y) {
      for (std::size_t a = 0; a < k; ++a) buf[a] = alpha[(t - 1) * k + a] + trans[a * k + y];
      alpha[t * k + y] = emit[t * k + y] + log_sum_exp(buf.data(), k);
    }
  }
  m.log_partition = log_sum_exp(alpha.data() + (len - 1) * k, k);

  for (std::size_t y = 0; y < k; ++y) beta[(len - 1) * k + y] = 0.0;
  for (std::size_t t = len - 1; t-- > 0;) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) buf[b] = trans[a * k + b] + emit[(t + 1) * k + b] + beta[(t + 1) * k + b];
      beta[t * k + a] = log_sum_exp(buf.data(), k);
    }
  }

  m.node.resize(len * k);
  for (std::size_t i = 0; i < len * k; ++i) m.node[i] = std::exp(alpha[i] + beta[i] - m.log_partition);
  m.edge.resize(len > 1 ? (len - 1) * k * k : 0);
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        m.edge[((t - 1) * k + a) * k + b] = std::exp(alpha[(t - 1) * k + a] + trans[a * k + b] + emit[t * k + b] +
                                                     beta[t * k + b] - m.log_partition);
      }
    }
  }
  return m;
}

Decoded run_viterbi(const std::vector<double>& emit, const double* trans, std::size_t len, const LabelSet& labels,
                    bool enforce_bio) {
  const std::size_t k = labels.size();
  std::vector<double> delta(len * k, kNegInf);
  std::vector<std::size_t> back(len * k, 0);
  for (std::size_t y = 0; y < k; ++y) {
    if (!enforce_bio || labels.allowed(std::nullopt, y)) delta[y] = emit[y];
  }
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t y = 0; y < k; ++y) {
      double best = kNegInf;
      std::size_t arg = 0;
      bool found = false;
      for (std::size_t a = 0; a < k; ++a) {
        if (enforce_bio && !labels.allowed(a, y)) continue;
        const double prev = delta[(t - 1) * k + a];
        if (prev == kNegInf) continue;
        const double s = prev + trans[a * k + y];
        if (!found || s > best) {
          best = s;
          arg = a;
          found = true;
        }
      }
      if (found) {
        delta[t * k + y] = best + emit[t * k + y];
        back[t * k + y] = arg;
      }
    }
  }
  Decoded d;
  std::size_t last = 0;
  double best = kNegInf;
  bool found = false;
  for (std::size_t y = 0; y < k; ++y) {
    const double s = delta[(len - 1) * k + y];
    if (s == kNegInf) continue;
    if (!found || s > best) {
      best = s;
      last = y;
      found = true;
    }
  }
  d.score = best;
  d.labels.assign(len, 0);
  d.labels[len - 1] = last;
  for (std::size_t t = len - 1; t > 0; --t) d.labels[t - 1] = back[t * k + d.labels[t]];
  return d;
}

struct Prepared {
  CrfModel::IndexedSequence features;
  std::vector<std::size_t> labels;
};

// Adds one sequence's data term into acc = [value | grad].
void accumulate_sequence(const Prepared& seq, std::span<const double> flat, std::size_t vocab, std::size_t k,
                         std::span<double> acc) {
  if (seq.features.empty()) return;
  const auto p = view(flat, vocab, k);
  const auto emit = emissions(p, seq.features);
  const std::size_t len = seq.features.size();
  const auto m = run_forward_backward(emit, p.transition, len, k);

  double gold = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    gold += emit[t * k + seq.labels[t]];
    if (t > 0) gold += p.transition[seq.labels[t - 1] * k + seq.labels[t]];
  }
  acc[0] += m.log_partition - gold;

  double* g_emit = acc.data() + 1;
  double* g_trans = acc.data() + 1 + vocab * k;
  for (std::size_t t = 0; t < len; ++t) {
    for (auto f : seq.features[t]) {
      double* g = g_emit + static_cast<std::size_t>(f) * k;
      for (std::size_t y = 0; y < k; ++y) g[y] += m.node[t * k + y];
      g[seq.labels[t]] -= 1.0;
    }
  }
  for (std::size_t t = 1; t < len; ++t) {
    const double* e = m.edge.data() + (t - 1) * k * k;
    for (std::size_t i = 0; i < k * k; ++i) g_trans[i] += e[i];
    g_trans[seq.labels[t - 1] * k + seq.labels[t]] -= 1.0;
  }
}

void add_regularizer(std::span<const double> flat, double lambda, std::span<double> acc) {
  double sq = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    sq += flat[i] * flat[i];
    acc[1 + i] += lambda * flat[i];
  }
  acc[0] += 0.5 * lambda * sq;
}

std::vector<double> objective_parallel(std::span<const Prepared> data, std::span<const double> flat, std::size_t vocab,
                                       std::size_t k, double lambda) {
  auto acc = parallel::block_reduce(data.size(), 1 + flat.size(), [&](std::size_t lo, std::size_t hi, std::span<double> part) {
    for (std::size_t i = lo; i < hi; ++i) accumulate_sequence(data[i], flat, vocab, k, part);
  });
  add_regularizer(flat, lambda, acc);
  return acc;
}

std::vector<double> objective_serial(std::span<const Prepared> data, std::span<const double> flat, std::size_t vocab,
                                     std::size_t k, double lambda) {
  std::vector<double> acc(1 + flat.size(), 0.0);
  for (const auto& seq : data) accumulate_sequence(seq, flat, vocab, k, acc);
  add_regularizer(flat, lambda, acc);
  return acc;
}

std::vector<Prepared> prepare(const CrfModel& model, std::span<const FeatureSequence> data) {
  std::vector<Prepared> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].features.size() != data[i].labels.size()) {
      throw Error("sequence " + std::to_string(i) + ": feature/label length mismatch");
    }
    for (auto l : data[i].labels) {
      if (l >= model.num_labels()) throw Error("sequence " + std::to_string(i) + ": label id out of range");
    }
    out.push_back({model.index(data[i].features), data[i].labels});
  }
  return out;
}

Gradient to_gradient(std::vector<double> acc) {
  Gradient g;
  g.value = acc[0];
  g.grad.assign(acc.begin() + 1, acc.end());
  return g;
}

char shape_class(char32_t c) {
  if (c >= 'A' && c <= 'Z') return 'X';
  if (c >= 'a' && c <= 'z') return 'x';
  if (c >= '0' && c <= '9') return 'd';
  if (c >= 0x80) return 'u';
  return static_cast<char>(c);
}

}  // namespace

// ---------------------------------------------------------------------------

LabelSet::LabelSet() : LabelSet({"O", "B-LOC", "I-LOC", "B-LMK", "I-LMK"}) {}

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  const auto o = std::find(labels_.begin(), labels_.end(), "O");
  if (o == labels_.end()) throw ConfigError("label set must contain O");
  outside_ = static_cast<std::size_t>(o - labels_.begin());
  std::set<std::string> uniq(labels_.begin(), labels_.end());
  if (uniq.size() != labels_.size()) throw ConfigError("label set has duplicates");
  for (const auto& l : labels_) {
    if (l == "O") continue;
    if (!l.starts_with("B-") && !l.starts_with("I-")) throw ConfigError("label '" + l + "' is not BIO");
    if (l.starts_with("B-") && !uniq.count("I-" + l.substr(2))) throw ConfigError("label '" + l + "' has no I- partner");
    if (l.starts_with("I-") && !uniq.count("B-" + l.substr(2))) throw ConfigError("label '" + l + "' has no B- partner");
  }
}

std::optional<std::size_t> LabelSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == name) return i;
  }
  return std::nullopt;
}

std::string LabelSet::type(std::size_t i) const {
  const auto& l = labels_.at(i);
  return l == "O" ? std::string() : l.substr(2);
}

std::optional<std::size_t> LabelSet::begin_of(std::string_view type) const { return index("B-" + std::string(type)); }
std::optional<std::size_t> LabelSet::inside_of(std::string_view type) const { return index("I-" + std::string(type)); }

bool LabelSet::allowed(std::optional<std::size_t> prev, std::size_t cur) const {
  if (!is_inside(cur)) return true;
  if (!prev || is_outside(*prev)) return false;
  return type(*prev) == type(cur);
}

bool bio_consistent(std::span<const std::size_t> labels, const LabelSet& set) {
  std::optional<std::size_t> prev;
  for (auto l : labels) {
    if (l >= set.size() || !set.allowed(prev, l)) return false;
    prev = l;
  }
  return true;
}

std::string_view entity_type(gaz::EntityKind kind) noexcept {
  return kind == gaz::EntityKind::Location ? "LOC" : "LMK";
}

std::optional<gaz::EntityKind> entity_kind(std::string_view type) noexcept {
  if (type == "LOC") return gaz::EntityKind::Location;
  if (type == "LMK") return gaz::EntityKind::Landmark;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Template t) noexcept {
  switch (t) {
    case Template::Bias: return "bias";
    case Template::Word: return "w";
    case Template::PrevWord: return "w-1";
    case Template::NextWord: return "w+1";
    case Template::Pos: return "pos";
    case Template::Shape: return "shape";
    case Template::Gazetteer: return "gaz";
  }
  return "?";
}

std::optional<Template> parse_template(std::string_view s) noexcept {
  for (auto t : {Template::Bias, Template::Word, Template::PrevWord, Template::NextWord, Template::Pos,
                 Template::Shape, Template::Gazetteer}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::vector<Template> default_templates(bool use_pos) {
  std::vector<Template> t{Template::Bias, Template::Word, Template::PrevWord, Template::NextWord};
  if (use_pos) t.push_back(Template::Pos);
  t.push_back(Template::Shape);
  t.push_back(Template::Gazetteer);
  return t;
}

std::string word_shape(std::string_view surface) {
  std::string out;
  for (std::size_t i = 0; i < surface.size();) {
    const auto d = decode_utf8(surface, i);
    i += d.len;
    const char c = shape_class(d.cp);
    if (out.empty() || out.back() != c) out += c;
  }
  return out;
}

PositionFeatures extract_sequence_features(std::span<const text::Token> tokens, std::span<const text::PosTag> pos_tags,
                                           const gaz::Gazetteer& gazetteer, std::span<const Template> templates) {
  const std::size_t len = tokens.size();
  const bool want_pos = std::find(templates.begin(), templates.end(), Template::Pos) != templates.end();
  if (want_pos && pos_tags.size() != len) throw Error("pos tag count does not match token count");

  // Gazetteer coverage: bit 1 = Location, bit 2 = Landmark.
  std::vector<unsigned> cover(len, 0);
  const bool want_gaz = std::find(templates.begin(), templates.end(), Template::Gazetteer) != templates.end();
  if (want_gaz && !gazetteer.empty()) {
    const std::size_t max_win = std::min<std::size_t>(4, gazetteer.max_phrase_tokens());
    for (std::size_t i = 0; i < len; ++i) {
      std::string phrase;
      for (std::size_t n = 1; n <= max_win && i + n <= len; ++n) {
        if (n > 1) phrase += ' ';
        phrase += gaz::match_form(tokens[i + n - 1]);
        unsigned bits = 0;
        for (auto id : gazetteer.lookup_phrase(phrase)) {
          bits |= gazetteer.entries()[id].kind == gaz::EntityKind::Location ? 1u : 2u;
        }
        if (bits) {
          for (std::size_t j = i; j < i + n; ++j) cover[j] |= bits;
        }
      }
    }
  }

  PositionFeatures out(len);
  for (std::size_t t = 0; t < len; ++t) {
    auto& f = out[t];
    for (auto tmpl : templates) {
      switch (tmpl) {
        case Template::Bias:
          f.emplace_back("bias");
          break;
        case Template::Word:
          f.push_back("w=" + tokens[t].normalized);
          break;
        case Template::PrevWord:
          if (t > 0) f.push_back("w-1=" + tokens[t - 1].normalized);
          break;
        case Template::NextWord:
          if (t + 1 < len) f.push_back("w+1=" + tokens[t + 1].normalized);
          break;
        case Template::Pos:
          f.push_back("pos=" + std::string(text::to_string(pos_tags[t])));
          break;
        case Template::Shape:
          f.push_back("shape=" + word_shape(tokens[t].surface));
          break;
        case Template::Gazetteer:
          if (cover[t] & 1u) f.emplace_back("in-gazetteer-LOC");
          if (cover[t] & 2u) f.emplace_back("in-gazetteer-LMK");
          break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CrfModel::CrfModel(LabelSet labels, std::vector<Template> templates, std::vector<std::string> vocabulary,
                   double l2_lambda)
    : labels_(std::move(labels)),
      templates_(std::move(templates)),
      vocabulary_(std::move(vocabulary)),
      l2_lambda_(l2_lambda) {
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) throw ConfigError("duplicate feature '" + vocabulary_[i] + "'");
  }
  emission_.assign(vocabulary_.size() * labels_.size(), 0.0);
  transition_.assign(labels_.size() * labels_.size(), 0.0);
}

bool CrfModel::uses_pos() const noexcept {
  return std::find(templates_.begin(), templates_.end(), Template::Pos) != templates_.end();
}

std::optional<std::size_t> CrfModel::feature_index(std::string_view feature) const {
  const auto it = index_.find(std::string(feature));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void CrfModel::set_emission(std::string_view feature, std::size_t label, double value) {
  const auto idx = feature_index(feature);
  if (!idx) throw Error("feature '" + std::string(feature) + "' not in vocabulary");
  emission(*idx, label) = value;
}

std::vector<double> CrfModel::parameters() const {
  std::vector<double> p(emission_);
  p.insert(p.end(), transition_.begin(), transition_.end());
  return p;
}

void CrfModel::set_parameters(std::span<const double> params) {
  if (params.size() != num_parameters()) throw Error("parameter vector size mismatch");
  const auto split_at = params.begin() + static_cast<std::ptrdiff_t>(emission_.size());
  std::copy(params.begin(), split_at, emission_.begin());
  std::copy(split_at, params.end(), transition_.begin());
}

CrfModel::IndexedSequence CrfModel::index(const PositionFeatures& features) const {
  IndexedSequence out(features.size());
  for (std::size_t t = 0; t < features.size(); ++t) {
    for (const auto& f : features[t]) {
      const auto it = index_.find(f);
      if (it != index_.end()) out[t].push_back(static_cast<std::uint32_t>(it->second));
    }
  }
  return out;
}

ordered_json CrfModel::to_json() const {
  ordered_json j;
  j["format"] = "ground-crf";
  j["version"] = kModelVersion;
  j["labels"] = labels_.names();
  std::vector<std::string> tmpl;
  for (auto t : templates_) tmpl.emplace_back(to_string(t));
  j["templates"] = tmpl;
  j["l2_lambda"] = l2_lambda_;
  j["vocabulary"] = vocabulary_;
  const std::size_t k = num_labels();
  ordered_json em = ordered_json::array();
  for (std::size_t f = 0; f < vocabulary_.size(); ++f) {
    em.push_back(std::vector<double>(emission_.begin() + static_cast<std::ptrdiff_t>(f * k),
                                     emission_.begin() + static_cast<std::ptrdiff_t>((f + 1) * k)));
  }
  j["emission"] = std::move(em);
  ordered_json tr = ordered_json::array();
  for (std::size_t a = 0; a < k; ++a) {
    tr.push_back(std::vector<double>(transition_.begin() + static_cast<std::ptrdiff_t>(a * k),
                                     transition_.begin() + static_cast<std::ptrdiff_t>((a + 1) * k)));
  }
  j["transition"] = std::move(tr);
  return j;
}

CrfModel CrfModel::from_json(const json& j) {
  if (j.value("format", "") != "ground-crf") throw ConfigError("not a CRF model file");
  if (j.value("version", -1) != kModelVersion) {
    throw ConfigError("CRF model version " + std::to_string(j.value("version", -1)) + " unsupported (expected " +
                      std::to_string(kModelVersion) + ")");
  }
  std::vector<Template> templates;
  for (const auto& s : j.at("templates")) {
    const auto t = parse_template(s.get<std::string>());
    if (!t) throw ConfigError("unknown feature template '" + s.get<std::string>() + "'");
    templates.push_back(*t);
  }
  CrfModel m(LabelSet(j.at("labels").get<std::vector<std::string>>()), std::move(templates),
             j.at("vocabulary").get<std::vector<std::string>>(), j.at("l2_lambda").get<double>());
  const std::size_t k = m.num_labels();
  const auto& em = j.at("emission");
  if (em.size() != m.vocabulary_size()) throw ConfigError("CRF model: emission rows do not match vocabulary");
  for (std::size_t f = 0; f < em.size(); ++f) {
    const auto row = em[f].get<std::vector<double>>();
    if (row.size() != k) throw ConfigError("CRF model: emission row size mismatch");
    std::copy(row.begin(), row.end(), m.emission_.begin() + static_cast<std::ptrdiff_t>(f * k));
  }
  const auto& tr = j.at("transition");
  if (tr.size() != k) throw ConfigError("CRF model: transition rows do not match labels");
  for (std::size_t a = 0; a < k; ++a) {
    const auto row = tr[a].get<std::vector<double>>();
    if (row.size() != k) throw ConfigError("CRF model: transition row size mismatch");
    std::copy(row.begin(), row.end(), m.transition_.begin() + static_cast<std::ptrdiff_t>(a * k));
  }
  return m;
}

void save_model(const CrfModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << model.to_json().dump(1) << '\n';
}

CrfModel load_model(const std::filesystem::path& path) {
  try {
    return CrfModel::from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

Marginals forward_backward(const CrfModel& model, const PositionFeatures& features) {
  if (features.empty()) throw Error("forward_backward: empty sequence");
  const auto flat = model.parameters();
  const auto p = view(flat, model.vocabulary_size(), model.num_labels());
  const auto emit = emissions(p, model.index(features));
  return run_forward_backward(emit, p.transition, features.size(), model.num_labels());
}

double sequence_score(const CrfModel& model, const PositionFeatures& features, std::span<const std::size_t> labels) {
  if (labels.size() != features.size()) throw Error("sequence_score: length mismatch");
  const auto seq = model.index(features);
  double s = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (auto f : seq[t]) s += model.emission(f, labels[t]);
    if (t > 0) s += model.transition(labels[t - 1], labels[t]);
  }
  return s;
}

Decoded viterbi_decode(const CrfModel& model, const PositionFeatures& features, bool enforce_bio) {
  if (features.empty()) throw Error("viterbi_decode: empty sequence");
  const auto flat = model.parameters();
  const auto p = view(flat, model.vocabulary_size(), model.num_labels());
  const auto emit = emissions(p, model.index(features));
  return run_viterbi(emit, p.transition, features.size(), model.labels(), enforce_bio);
}

std::vector<std::vector<std::size_t>> decode_batch(const CrfModel& model, std::span<const PositionFeatures> batch) {
  const auto flat = model.parameters();
  const auto p = view(flat, model.vocabulary_size(), model.num_labels());
  std::vector<std::vector<std::size_t>> out(batch.size());
  parallel::for_each_index(batch.size(), [&](std::size_t i) {
    if (batch[i].empty()) return;
    const auto emit = emissions(p, model.index(batch[i]));
    out[i] = run_viterbi(emit, p.transition, batch[i].size(), model.labels(), true).labels;
  });
  return out;
}

std::vector<std::vector<std::size_t>> serial::decode_batch(const CrfModel& model,
                                                           std::span<const PositionFeatures> batch) {
  const auto flat = model.parameters();
  const auto p = view(flat, model.vocabulary_size(), model.num_labels());
  std::vector<std::vector<std::size_t>> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].empty()) continue;
    out[i] = run_viterbi(emissions(p, model.index(batch[i])), p.transition, batch[i].size(), model.labels(), true).labels;
  }
  return out;
}

// ---------------------------------------------------------------------------

Gradient neg_loglik_and_gradient(const CrfModel& model, std::span<const FeatureSequence> data) {
  const auto prepared = prepare(model, data);
  const auto flat = model.parameters();
  return to_gradient(objective_parallel(prepared, flat, model.vocabulary_size(), model.num_labels(), model.l2_lambda()));
}

Gradient serial::neg_loglik_and_gradient(const CrfModel& model, std::span<const FeatureSequence> data) {
  const auto prepared = prepare(model, data);
  const auto flat = model.parameters();
  return to_gradient(objective_serial(prepared, flat, model.vocabulary_size(), model.num_labels(), model.l2_lambda()));
}

CrfModel train_crf(std::span<const FeatureSequence> data, const LabelSet& labels, std::vector<Template> templates,
                   const TrainConfig& config, TrainStats* stats) {
  if (data.empty()) throw Error("train_crf: no training sequences");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!bio_consistent(data[i].labels, labels)) {
      throw Error("train_crf: sequence " + std::to_string(i) + " has BIO-inconsistent gold labels");
    }
  }
  std::set<std::string> vocab_set;
  for (const auto& seq : data) {
    for (const auto& pos : seq.features) vocab_set.insert(pos.begin(), pos.end());
  }
  CrfModel model(labels, std::move(templates), std::vector<std::string>(vocab_set.begin(), vocab_set.end()),
                 config.l2_lambda);
  const auto prepared = prepare(model, data);
  const std::size_t vocab = model.vocabulary_size();
  const std::size_t k = model.num_labels();

  const optim::Objective objective = [&](std::span<const double> x, std::span<double> grad) {
    const auto acc = objective_parallel(prepared, x, vocab, k, config.l2_lambda);
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

CrfModel train_crf(std::span<const AnnotatedSequence> data, const gaz::Gazetteer& gazetteer,
                   const text::PosLexicon& lexicon, const TrainConfig& config, TrainStats* stats) {
  const LabelSet labels;
  const auto templates = default_templates(config.use_pos);
  std::vector<FeatureSequence> seqs;
  seqs.reserve(data.size());
  for (const auto& s : data) {
    if (s.tokens.size() != s.labels.size()) throw Error("train_crf: sequence '" + s.id + "' token/label length mismatch");
    if (!bio_consistent(s.labels, labels)) {
      throw Error("train_crf: sequence '" + s.id + "' has BIO-inconsistent gold labels");
    }
    std::vector<text::PosTag> pos;
    if (config.use_pos) pos = text::coarse_pos_tag(s.tokens, lexicon);
    seqs.push_back({extract_sequence_features(s.tokens, pos, gazetteer, templates), s.labels});
  }
  return train_crf(seqs, labels, templates, config, stats);
}

std::vector<std::size_t> tag(const CrfModel& model, std::span<const text::Token> tokens, const gaz::Gazetteer& gazetteer,
                             const text::PosLexicon& lexicon) {
  if (tokens.empty()) return {};
  std::vector<text::PosTag> pos;
  if (model.uses_pos()) pos = text::coarse_pos_tag(tokens, lexicon);
  return viterbi_decode(model, extract_sequence_features(tokens, pos, gazetteer, model.templates())).labels;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> gazetteer_tag(std::span<const text::Token> tokens, const gaz::Gazetteer& gazetteer,
                                       const LabelSet& labels, std::size_t max_window) {
  const std::size_t len = tokens.size();
  std::vector<std::size_t> out(len, labels.outside());
  std::vector<std::string> forms;
  forms.reserve(len);
  for (const auto& t : tokens) forms.push_back(gaz::match_form(t));

  std::size_t i = 0;
  while (i < len) {
    bool matched = false;
    for (std::size_t n = std::min(max_window, len - i); n >= 1; --n) {
      std::string phrase = forms[i];
      for (std::size_t j = 1; j < n; ++j) phrase += ' ' + forms[i + j];
      const auto ids = gazetteer.lookup_phrase(phrase);
      if (ids.empty()) continue;
      const auto type = entity_type(gazetteer.entries()[ids.front()].kind);
      const auto b = labels.begin_of(type);
      const auto in = labels.inside_of(type);
      if (!b || !in) continue;
      out[i] = *b;
      for (std::size_t j = 1; j < n; ++j) out[i + j] = *in;
      i += n;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return out;
}

std::vector<std::string> LocationExpression::names() const {
  std::vector<std::string> out;
  for (const auto& c : constituents) out.push_back(c.name);
  return out;
}

std::vector<LocationExpression> assemble_location_expressions(std::span<const text::Token> tokens,
                                                              std::span<const std::size_t> labels, const LabelSet& set,
                                                              const AssembleOptions& options) {
  if (tokens.size() != labels.size()) throw Error("assemble_location_expressions: length mismatch");
  const auto joined = [&](std::size_t a, std::size_t b) {
    return text::join_surfaces(tokens.subspan(a, b - a));
  };

  std::vector<Constituent> runs;
  for (std::size_t t = 0; t < labels.size();) {
    if (set.is_outside(labels[t])) {
      ++t;
      continue;
    }
    const auto type = set.type(labels[t]);
    std::size_t end = t + 1;
    while (end < labels.size() && set.is_inside(labels[end]) && set.type(labels[end]) == type) ++end;
    const auto kind = entity_kind(type).value_or(gaz::EntityKind::Location);
    runs.push_back({t, end, joined(t, end), kind});
    t = end;
  }

  const auto is_connector = [&](const text::Token& tok) {
    return std::find(options.connectors.begin(), options.connectors.end(), tok.normalized) != options.connectors.end();
  };

  std::vector<LocationExpression> out;
  for (std::size_t r = 0; r < runs.size();) {
    LocationExpression e;
    e.constituents.push_back(runs[r]);
    std::size_t next = r + 1;
    while (next < runs.size()) {
      const std::size_t gap_lo = e.constituents.back().end;
      const std::size_t gap_hi = runs[next].start;
      const std::size_t gap = gap_hi - gap_lo;
      if (gap < 1 || gap > options.max_gap) break;
      bool all_connectors = true;
      for (std::size_t t = gap_lo; t < gap_hi && all_connectors; ++t) all_connectors = is_connector(tokens[t]);
      if (!all_connectors) break;
      e.constituents.push_back(runs[next]);
      ++next;
    }
    e.start = e.constituents.front().start;
    e.end = e.constituents.back().end;
    e.kind = e.constituents.front().kind;
    e.surface = joined(e.start, e.end);
    out.push_back(std::move(e));
    r = next;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<AnnotatedSequence> load_column_corpus(const std::filesystem::path& path, const LabelSet& labels) {
  std::vector<AnnotatedSequence> out;
  std::vector<std::string> surfaces;
  std::vector<std::size_t> ids;
  std::size_t start_line = 0;
  const auto flush = [&]() {
    if (surfaces.empty()) return;
    AnnotatedSequence s;
    s.id = path.filename().string() + ":" + std::to_string(start_line);
    s.tokens = text::tokens_from_surfaces(surfaces);
    s.labels = ids;
    out.push_back(std::move(s));
    surfaces.clear();
    ids.clear();
  };
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = lines[i].rfind('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), i + 1, "expected 'surface<TAB>label'");
    const auto surface = std::string(trim(std::string_view(lines[i]).substr(0, tab)));
    const auto label = std::string(trim(std::string_view(lines[i]).substr(tab + 1)));
    const auto id = labels.index(label);
    if (!id) throw ParseError(path.string(), i + 1, "unknown label '" + label + "'");
    if (surface.empty()) throw ParseError(path.string(), i + 1, "empty surface");
    if (surfaces.empty()) start_line = i + 1;
    surfaces.push_back(surface);
    ids.push_back(*id);
  }
  flush();
  return out;
}

void save_column_corpus(std::span<const AnnotatedSequence> corpus, const std::filesystem::path& path,
                        const LabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : corpus) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t) out << s.tokens[t].surface << '\t' << labels.name(s.labels[t]) << '\n';
    out << '\n';
  }
}

}  // namespace ground::ner
