#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ground/text.hpp"
#include "ground/timeutil.hpp"
#include "ground/util.hpp"

namespace ground::ingest {

struct RawPost {
  std::string id;
  std::string text;
  Timestamp created_at{};
  std::string language = "und";
  std::optional<LatLon> gps;
  bool has_media = false;
  std::vector<std::string> hashtags;  // without leading '#'

  friend bool operator==(const RawPost&, const RawPost&) = default;
};

/// Returns an error message when a RawPost invariant is violated.
std::optional<std::string> validate(const RawPost& post);

nlohmann::ordered_json to_json(const RawPost& post);
/// Throws std::invalid_argument for missing/ill-typed fields or violated
/// invariants. Unknown fields are ignored. When "hashtags" is absent the
/// hashtags are taken from the text.
RawPost post_from_json(const nlohmann::json& j);
/// One canonical line (no trailing newline).
std::string serialize_post(const RawPost& post);

class KeywordList {
 public:
  KeywordList() = default;
  /// Case-folds and trims entries; throws ConfigError on blank or duplicate keywords.
  KeywordList(std::string name, std::vector<std::string> keywords);

  /// One keyword per line, '#'-prefixed lines are comments.
  static KeywordList load(const std::filesystem::path& path);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& keywords() const noexcept { return keywords_; }
  std::size_t size() const noexcept { return keywords_.size(); }

 private:
  std::string name_;
  std::vector<std::string> keywords_;
  std::vector<std::vector<std::string>> keyword_tokens_;
  friend struct KeywordMatcher;
};

struct KeywordMatch {
  bool matched = false;
  std::vector<std::string> hits;  // list order, each keyword once
};

/// Plain words match whole case-folded tokens; hashtags (from the text and the
/// post's hashtag list) match by substring.
KeywordMatch keyword_match(const RawPost& post, const KeywordList& list);
KeywordMatch keyword_match(std::span<const text::Token> tokens, std::span<const std::string> extra_hashtags,
                           const KeywordList& list);

struct ReadWarning {
  std::string source;
  std::size_t line = 0;
  std::string message;
};

/// Streams posts from a newline-delimited record file, a directory of such
/// files (name order), or standard input ("-"). Malformed records are skipped
/// and counted. In follow mode the reader waits for appended data until
/// request_stop() is called.
class PostReader {
 public:
  explicit PostReader(const std::string& source, bool follow = false);
  ~PostReader();
  PostReader(const PostReader&) = delete;
  PostReader& operator=(const PostReader&) = delete;

  std::optional<RawPost> next();

  std::size_t skipped() const noexcept { return skipped_; }
  const std::vector<ReadWarning>& warnings() const noexcept { return warnings_; }
  void request_stop() noexcept { stop_.store(true); }

 private:
  bool open_next_file();
  bool read_line(std::string& line);

  std::vector<std::filesystem::path> files_;
  std::size_t file_index_ = 0;
  bool use_stdin_ = false;
  bool follow_ = false;
  std::unique_ptr<std::ifstream> in_;
  std::string current_name_;
  std::size_t line_no_ = 0;
  std::string partial_;
  std::size_t skipped_ = 0;
  std::vector<ReadWarning> warnings_;
  std::atomic<bool> stop_{false};
};

struct ReadResult {
  std::vector<RawPost> posts;
  std::size_t skipped = 0;
  std::vector<ReadWarning> warnings;
};

ReadResult read_posts(const std::string& source);

}  // namespace ground::ingest
