#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ground/record.hpp"

namespace ground::store {

/// A malformed query (bad count, conflicting time filters). Maps to HTTP 400.
class RequestError : public Error {
 public:
  using Error::Error;
};

struct RecentQuery {
  std::size_t count = 20;
  std::optional<std::string> language;
};

struct SearchQuery {
  std::vector<std::string> keywords;  // each may span several tokens
  bool match_any = false;             // default: every keyword must match
  std::optional<Timestamp> since;
  std::optional<std::pair<Timestamp, Timestamp>> between;  // inclusive
  std::optional<std::string> language;
  std::optional<std::size_t> limit;
};

/// Throws RequestError when the query is inconsistent.
void check(const RecentQuery& q);
void check(const SearchQuery& q);

enum class PutResult { Stored, Duplicate };

class PostStore {
 public:
  virtual ~PostStore() = default;

  /// Throws Error for a record violating its invariants, IoError on storage failure.
  virtual PutResult put(const GroundedPost& post) = 0;
  virtual std::optional<GroundedPost> get(const std::string& id) const = 0;
  virtual std::size_t size() const = 0;

  /// Newest first by processed_at, ties by id.
  virtual std::vector<GroundedPost> recent(const RecentQuery& q) const = 0;
  /// Keyword and window filters apply to the post text and created_at;
  /// results are newest first by created_at, ties by id.
  virtual std::vector<GroundedPost> search(const SearchQuery& q) const = 0;
};

/// Append-only JSON-lines file with in-memory indexes rebuilt on open. Each put
/// is flushed and synced before it returns. Many readers, one writer.
class LogStore : public PostStore {
 public:
  explicit LogStore(std::filesystem::path path);
  ~LogStore() override;
  LogStore(const LogStore&) = delete;
  LogStore& operator=(const LogStore&) = delete;

  PutResult put(const GroundedPost& post) override;
  std::optional<GroundedPost> get(const std::string& id) const override;
  std::size_t size() const override;
  std::vector<GroundedPost> recent(const RecentQuery& q) const override;
  std::vector<GroundedPost> search(const SearchQuery& q) const override;

  /// Lines skipped as unreadable when the log was opened.
  std::size_t skipped_on_open() const noexcept { return skipped_on_open_; }
  /// Cross-checks indexes against the records; returns problems found.
  std::vector<std::string> audit() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  struct Entry {
    GroundedPost post;
    std::vector<std::string> terms;  // case-folded token forms of the text, hashtags without '#'
  };
  void index(GroundedPost post);

  std::filesystem::path path_;
  int fd_ = -1;
  std::size_t skipped_on_open_ = 0;
  // Readers pass through gate_ before taking a shared lock; a writer holds it
  // while waiting so a steady stream of readers cannot starve it.
  std::shared_lock<std::shared_mutex> read_lock() const;
  mutable std::mutex gate_;
  mutable std::shared_mutex mutex_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::set<std::pair<Timestamp, std::string>> by_processed_;
  std::set<std::pair<Timestamp, std::string>> by_created_;
  std::unordered_map<std::string, std::set<std::size_t>> by_term_;
};

/// Case-folded token forms used for keyword matching (hashtags lose '#').
std::vector<std::string> term_forms(std::string_view text);

}  // namespace ground::store
