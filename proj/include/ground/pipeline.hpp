#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ground/config.hpp"
#include "ground/crf.hpp"
#include "ground/ingest.hpp"
#include "ground/maxent.hpp"
#include "ground/record.hpp"
#include "ground/store.hpp"

namespace ground::pipeline {

enum class RejectReason { KeywordMiss, ClassifiedIrrelevant, NoLocationFound, GroundingRejected };
std::string_view to_string(RejectReason r) noexcept;

struct Rejection {
  RejectReason reason;
  std::string detail;
};

using Outcome = std::variant<GroundedPost, Rejection>;

struct Resources {
  config::Config config;
  ingest::KeywordList keywords;
  text::Simplifier simplifier;
  text::PosLexicon lexicon;
  std::shared_ptr<const gaz::Gazetteer> gazetteer;
  std::optional<maxent::MaxEntModel> filter_model;
  std::optional<ner::CrfModel> ner_model;
  geocode::ClientList clients;
  std::function<Timestamp()> clock = now_utc;
};

/// Loads everything named by the config; models come from
/// `<models>/filter.model.json` and `<models>/ner.model.json`.
Resources load_resources(const config::Config& config, bool require_models = true);

/// Replay clock: each call returns `start` plus one second more than the last.
std::function<Timestamp()> replay_clock(Timestamp start);

/// Stateless per-post processing; safe to call from several threads.
class Processor {
 public:
  /// Throws ConfigError when a model is missing.
  explicit Processor(Resources resources);

  Outcome process(const ingest::RawPost& post) const;

  const Resources& resources() const noexcept { return res_; }
  geocode::Resolver& resolver() const noexcept { return *resolver_; }
  std::string categorize(const ingest::RawPost& post) const;

 private:
  Resources res_;
  std::unique_ptr<geocode::Resolver> resolver_;
  std::vector<std::pair<ingest::KeywordList, std::string>> category_rules_;
  std::set<std::string> categories_;
};

struct Stats {
  std::size_t read = 0;
  std::size_t matched = 0;
  std::size_t classified_relevant = 0;
  std::size_t ner_hits = 0;
  std::size_t grounded = 0;  // text-grounded
  std::size_t gps_geocoded = 0;
  std::size_t rejected_keyword = 0;
  std::size_t rejected_irrelevant = 0;
  std::size_t rejected_no_location = 0;
  std::size_t rejected_grounding = 0;
  std::size_t skipped_malformed = 0;
  std::size_t stored = 0;
  std::size_t duplicates = 0;

  /// (gps + text grounded) / max(gps, 1).
  double augmentation_ratio() const noexcept;
  void record(const Outcome& outcome);
  /// Empty when grounded <= ner_hits <= classified_relevant <= matched <= read.
  std::optional<std::string> check_monotone() const;

  nlohmann::ordered_json to_json() const;
  static Stats from_json(const nlohmann::json& j);
  friend bool operator==(const Stats&, const Stats&) = default;
};

/// Blocking bounded queue; close() wakes all waiters and makes push fail.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Empty once the queue is closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

struct RunOptions {
  std::size_t queue_capacity = 64;
  int store_attempts = 3;
};

/// Reader, processor and writer threads joined by bounded queues. Returns when
/// the reader is exhausted (or stopped) and the queues have drained. Throws
/// IoError when a store write still fails after the configured attempts.
Stats run_stream(ingest::PostReader& reader, const Processor& processor, store::PostStore& store,
                 const RunOptions& options = {});

}  // namespace ground::pipeline
