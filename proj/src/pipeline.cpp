#include "ground/pipeline.hpp"

#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

namespace ground::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::KeywordMiss: return "KeywordMiss";
    case RejectReason::ClassifiedIrrelevant: return "ClassifiedIrrelevant";
    case RejectReason::NoLocationFound: return "NoLocationFound";
    case RejectReason::GroundingRejected: return "GroundingRejected";
  }
  return "?";
}

Resources load_resources(const config::Config& config, bool require_models) {
  Resources r;
  r.config = config;
  if (config.keywords.empty()) throw ConfigError("config: no keyword list");
  r.keywords = ingest::KeywordList::load(config.keywords);
  if (!config.simplifier.empty()) r.simplifier = text::Simplifier::load(config.simplifier);
  if (!config.pos_lexicon.empty()) r.lexicon = text::load_pos_lexicon(config.pos_lexicon);
  if (config.gazetteer.empty()) throw ConfigError("config: no gazetteer");
  auto loaded = gaz::load_gazetteer(config.gazetteer, config.resolver.bbox);
  r.gazetteer = std::make_shared<const gaz::Gazetteer>(std::move(loaded.gazetteer));
  r.clients = config::make_clients(config);
  const auto filter_path = config.models / "filter.model.json";
  const auto ner_path = config.models / "ner.model.json";
  if (std::filesystem::exists(filter_path)) {
    r.filter_model = maxent::load_model(filter_path);
  } else if (require_models) {
    throw ConfigError("filter model not found at " + filter_path.string());
  }
  if (std::filesystem::exists(ner_path)) {
    r.ner_model = ner::load_model(ner_path);
  } else if (require_models) {
    throw ConfigError("NER model not found at " + ner_path.string());
  }
  return r;
}

std::function<Timestamp()> replay_clock(Timestamp start) {
  auto next = std::make_shared<std::atomic<long long>>(0);
  return [start, next]() { return start + std::chrono::seconds(next->fetch_add(1)); };
}

Processor::Processor(Resources resources) : res_(std::move(resources)) {
  if (!res_.filter_model) throw ConfigError("pipeline: filter model not loaded");
  if (!res_.ner_model) throw ConfigError("pipeline: NER model not loaded");
  if (!res_.gazetteer) throw ConfigError("pipeline: gazetteer not loaded");
  resolver_ = std::make_unique<geocode::Resolver>(res_.gazetteer, res_.clients, res_.config.resolver, res_.clock);
  for (const auto& rule : res_.config.categories) {
    category_rules_.emplace_back(ingest::KeywordList(rule.category, {rule.keyword}), rule.category);
  }
  categories_ = res_.config.category_set();
}

std::string Processor::categorize(const ingest::RawPost& post) const {
  for (const auto& [list, category] : category_rules_) {
    if (ingest::keyword_match(post, list).matched) return category;
  }
  return res_.config.default_category;
}

Outcome Processor::process(const ingest::RawPost& post) const {
  const auto& cfg = res_.config;
  if (!ingest::keyword_match(post, res_.keywords).matched) return Rejection{RejectReason::KeywordMiss, {}};

  const auto features = maxent::featurize(post.text, post.has_media, res_.simplifier, cfg.ngram_max);
  double p = maxent::predict_proba(*res_.filter_model, features)[maxent::kRelevant];
  if (p < cfg.filter_threshold) {
    return Rejection{RejectReason::ClassifiedIrrelevant, "p(relevant) = " + std::to_string(p)};
  }
  p = std::clamp(p, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));

  GroundedPost out;
  out.post = post;
  out.relevance = p;
  out.category = categorize(post);

  const bool has_device_gps = post.gps && cfg.resolver.bbox.contains(*post.gps);
  std::vector<ner::LocationExpression> expressions;
  if (!has_device_gps || cfg.ner_on_gps) {
    const auto tokens = text::tokenize(post.text);
    if (!tokens.empty()) {
      const auto labels = ner::tag(*res_.ner_model, tokens, *res_.gazetteer, res_.lexicon);
      ner::AssembleOptions opts;
      opts.connectors = cfg.connectors;
      opts.max_gap = cfg.connector_window;
      expressions = ner::assemble_location_expressions(tokens, labels, res_.ner_model->labels(), opts);
    }
  }
  for (const auto& e : expressions) out.expressions.push_back({e.surface, e.kind, e.names(), {}});

  if (has_device_gps) {
    out.provenance = Provenance::DeviceGps;
    out.processed_at = res_.clock();
    return out;
  }
  if (expressions.empty()) return Rejection{RejectReason::NoLocationFound, {}};

  std::string statuses;
  for (auto& rec : out.expressions) {
    for (const auto& name : rec.constituents) {
      auto g = resolver_->resolve(name);
      if (!statuses.empty()) statuses += ", ";
      statuses += name + ": " + std::string(geocode::to_string(g.status));
      if (!out.grounding && geocode::is_grounded(g.status)) out.grounding = g;
      rec.groundings.push_back(std::move(g));
    }
  }
  if (!out.grounding) return Rejection{RejectReason::GroundingRejected, statuses};
  out.provenance = Provenance::TextGrounded;
  out.processed_at = res_.clock();
  return out;
}

// ---------------------------------------------------------------------------

double Stats::augmentation_ratio() const noexcept {
  return static_cast<double>(gps_geocoded + grounded) / static_cast<double>(std::max<std::size_t>(gps_geocoded, 1));
}

void Stats::record(const Outcome& outcome) {
  ++read;
  if (const auto* r = std::get_if<Rejection>(&outcome)) {
    switch (r->reason) {
      case RejectReason::KeywordMiss:
        ++rejected_keyword;
        return;
      case RejectReason::ClassifiedIrrelevant:
        ++matched;
        ++rejected_irrelevant;
        return;
      case RejectReason::NoLocationFound:
        ++matched;
        ++classified_relevant;
        ++rejected_no_location;
        return;
      case RejectReason::GroundingRejected:
        ++matched;
        ++classified_relevant;
        ++ner_hits;
        ++rejected_grounding;
        return;
    }
  }
  const auto& g = std::get<GroundedPost>(outcome);
  ++matched;
  ++classified_relevant;
  if (!g.expressions.empty()) ++ner_hits;
  if (g.provenance == Provenance::DeviceGps) {
    ++gps_geocoded;
  } else {
    ++grounded;
  }
}

std::optional<std::string> Stats::check_monotone() const {
  if (grounded > ner_hits) return "grounded > ner_hits";
  if (ner_hits > classified_relevant) return "ner_hits > classified_relevant";
  if (classified_relevant > matched) return "classified_relevant > matched";
  if (matched > read) return "matched > read";
  return std::nullopt;
}

ordered_json Stats::to_json() const {
  ordered_json j;
  j["read"] = read;
  j["matched"] = matched;
  j["classified_relevant"] = classified_relevant;
  j["ner_hits"] = ner_hits;
  j["grounded"] = grounded;
  j["gps_geocoded"] = gps_geocoded;
  j["rejected"] = {{"keyword", rejected_keyword},
                   {"irrelevant", rejected_irrelevant},
                   {"no_location", rejected_no_location},
                   {"grounding", rejected_grounding}};
  j["skipped_malformed"] = skipped_malformed;
  j["stored"] = stored;
  j["duplicates"] = duplicates;
  j["augmentation_ratio"] = augmentation_ratio();
  return j;
}

Stats Stats::from_json(const json& j) {
  Stats s;
  const auto get = [&](const json& obj, const char* key) { return obj.value(key, std::size_t{0}); };
  s.read = get(j, "read");
  s.matched = get(j, "matched");
  s.classified_relevant = get(j, "classified_relevant");
  s.ner_hits = get(j, "ner_hits");
  s.grounded = get(j, "grounded");
  s.gps_geocoded = get(j, "gps_geocoded");
  if (j.contains("rejected")) {
    const auto& r = j["rejected"];
    s.rejected_keyword = get(r, "keyword");
    s.rejected_irrelevant = get(r, "irrelevant");
    s.rejected_no_location = get(r, "no_location");
    s.rejected_grounding = get(r, "grounding");
  }
  s.skipped_malformed = get(j, "skipped_malformed");
  s.stored = get(j, "stored");
  s.duplicates = get(j, "duplicates");
  return s;
}

// ---------------------------------------------------------------------------

Stats run_stream(ingest::PostReader& reader, const Processor& processor, store::PostStore& store,
                 const RunOptions& options) {
  BoundedQueue<ingest::RawPost> inbox(options.queue_capacity);
  BoundedQueue<GroundedPost> outbox(options.queue_capacity);
  Stats stats;
  std::mutex stats_mutex;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  std::thread read_thread([&] {
    while (!failed.load()) {
      auto post = reader.next();
      if (!post || !inbox.push(std::move(*post))) break;
    }
    inbox.close();
  });

  std::thread process_thread([&] {
    while (auto post = inbox.pop()) {
      Outcome outcome;
      try {
        outcome = processor.process(*post);
      } catch (const std::exception& e) {
        spdlog::error("post '{}' could not be processed: {}", post->id, e.what());
        continue;
      }
      {
        std::lock_guard lock(stats_mutex);
        stats.record(outcome);
      }
      if (auto* g = std::get_if<GroundedPost>(&outcome)) {
        if (!outbox.push(std::move(*g))) break;
      } else {
        const auto& r = std::get<Rejection>(outcome);
        spdlog::debug("post '{}' rejected: {} {}", post->id, to_string(r.reason), r.detail);
      }
    }
    outbox.close();
  });

  std::thread write_thread([&] {
    while (auto post = outbox.pop()) {
      for (int attempt = 1;; ++attempt) {
        try {
          const auto r = store.put(*post);
          std::lock_guard lock(stats_mutex);
          (r == store::PutResult::Stored ? stats.stored : stats.duplicates) += 1;
          break;
        } catch (const IoError& e) {
          spdlog::warn("store write for '{}' failed (attempt {}/{}): {}", post->post.id, attempt, options.store_attempts,
                       e.what());
          if (attempt >= options.store_attempts) {
            failure = std::current_exception();
            failed.store(true);
            reader.request_stop();
            inbox.close();
            outbox.close();
            return;
          }
        } catch (const Error& e) {
          spdlog::error("post '{}' not stored: {}", post->post.id, e.what());
          break;
        }
      }
    }
  });

  read_thread.join();
  process_thread.join();
  write_thread.join();
  if (failure) std::rethrow_exception(failure);
  stats.skipped_malformed = reader.skipped();
  return stats;
}

}  // namespace ground::pipeline
