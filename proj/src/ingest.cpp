#include "ground/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

namespace ground::ingest {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<std::string> validate(const RawPost& post) {
  if (post.id.empty()) return "empty id";
  if (post.gps && !valid_lat_lon(*post.gps)) return "gps coordinate out of range";
  if (post.language.empty()) return "empty language";
  for (const auto& tag : post.hashtags) {
    if (tag.empty()) return "empty hashtag";
    if (tag.front() == '#') return "hashtag '" + tag + "' has a leading '#'";
    if (contains_whitespace(tag)) return "hashtag '" + tag + "' contains whitespace";
  }
  return std::nullopt;
}

ordered_json to_json(const RawPost& post) {
  ordered_json j;
  j["id"] = post.id;
  j["text"] = post.text;
  j["created_at"] = format_rfc3339(post.created_at);
  j["language"] = post.language;
  if (post.gps) {
    j["gps"] = ordered_json{{"lat", post.gps->lat}, {"lon", post.gps->lon}};
  } else {
    j["gps"] = nullptr;
  }
  j["has_media"] = post.has_media;
  j["hashtags"] = post.hashtags;
  return j;
}

RawPost post_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  const auto require_string = [&](const char* key) -> std::string {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw std::invalid_argument(std::string("missing string field '") + key + "'");
    return it->get<std::string>();
  };

  RawPost p;
  p.id = require_string("id");
  p.text = require_string("text");
  const auto created = require_string("created_at");
  const auto ts = parse_rfc3339(created);
  if (!ts) throw std::invalid_argument("bad created_at '" + created + "'");
  p.created_at = *ts;

  if (auto it = j.find("language"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("language must be a string");
    p.language = it->get<std::string>();
  }
  if (auto it = j.find("gps"); it != j.end() && !it->is_null()) {
    if (!it->is_object() || !it->contains("lat") || !it->contains("lon") || !(*it)["lat"].is_number() ||
        !(*it)["lon"].is_number()) {
      throw std::invalid_argument("gps must be {lat, lon}");
    }
    p.gps = LatLon{(*it)["lat"].get<double>(), (*it)["lon"].get<double>()};
  }
  if (auto it = j.find("has_media"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw std::invalid_argument("has_media must be a boolean");
    p.has_media = it->get<bool>();
  }
  if (auto it = j.find("hashtags"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw std::invalid_argument("hashtags must be an array");
    for (const auto& h : *it) {
      if (!h.is_string()) throw std::invalid_argument("hashtags must be strings");
      p.hashtags.push_back(h.get<std::string>());
    }
  } else {
    for (const auto& tok : text::tokenize(p.text)) {
      if (tok.kind == text::TokenKind::Hashtag) p.hashtags.push_back(tok.surface.substr(1));
    }
  }
  if (auto err = validate(p)) throw std::invalid_argument(*err);
  return p;
}

std::string serialize_post(const RawPost& post) { return to_json(post).dump(); }

// ---------------------------------------------------------------------------

KeywordList::KeywordList(std::string name, std::vector<std::string> keywords) : name_(std::move(name)) {
  for (const auto& raw : keywords) {
    auto kw = casefold(trim(raw));
    if (kw.empty()) throw ConfigError("keyword list '" + name_ + "': blank keyword");
    if (std::find(keywords_.begin(), keywords_.end(), kw) != keywords_.end()) {
      throw ConfigError("keyword list '" + name_ + "': duplicate keyword '" + kw + "'");
    }
    std::vector<std::string> toks;
    for (const auto& t : text::tokenize(kw)) toks.push_back(t.normalized);
    keyword_tokens_.push_back(std::move(toks));
    keywords_.push_back(std::move(kw));
  }
}

KeywordList KeywordList::load(const std::filesystem::path& path) {
  std::vector<std::string> kws;
  for (const auto& line : read_lines(path)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    kws.emplace_back(t);
  }
  return KeywordList(path.stem().string(), std::move(kws));
}

struct KeywordMatcher {
  static KeywordMatch run(std::span<const text::Token> tokens, std::span<const std::string> extra_hashtags,
                          const KeywordList& list) {
    std::vector<std::string> words;
    std::vector<std::string> tags;
    for (const auto& t : tokens) {
      if (t.kind == text::TokenKind::Hashtag) {
        tags.push_back(t.normalized.substr(1));
      } else if (t.kind == text::TokenKind::Word || t.kind == text::TokenKind::Number) {
        words.push_back(t.normalized);
      }
    }
    for (const auto& h : extra_hashtags) tags.push_back(casefold(h));

    KeywordMatch m;
    for (std::size_t k = 0; k < list.keywords_.size(); ++k) {
      const auto& seq = list.keyword_tokens_[k];
      bool hit = false;
      if (!seq.empty() && seq.size() <= words.size()) {
        for (std::size_t i = 0; i + seq.size() <= words.size() && !hit; ++i) {
          hit = std::equal(seq.begin(), seq.end(), words.begin() + static_cast<std::ptrdiff_t>(i));
        }
      }
      if (!hit) {
        std::string glued;
        for (char c : list.keywords_[k]) {
          if (c != ' ' && c != '\t') glued += c;
        }
        hit = std::any_of(tags.begin(), tags.end(),
                          [&](const std::string& tag) { return tag.find(glued) != std::string::npos; });
      }
      if (hit) m.hits.push_back(list.keywords_[k]);
    }
    m.matched = !m.hits.empty();
    return m;
  }
};

KeywordMatch keyword_match(std::span<const text::Token> tokens, std::span<const std::string> extra_hashtags,
                           const KeywordList& list) {
  return KeywordMatcher::run(tokens, extra_hashtags, list);
}

KeywordMatch keyword_match(const RawPost& post, const KeywordList& list) {
  const auto tokens = text::tokenize(post.text);
  return KeywordMatcher::run(tokens, post.hashtags, list);
}

// ---------------------------------------------------------------------------

PostReader::PostReader(const std::string& source, bool follow) : follow_(follow) {
  namespace fs = std::filesystem;
  if (source == "-") {
    use_stdin_ = true;
    current_name_ = "<stdin>";
    return;
  }
  const fs::path p(source);
  std::error_code ec;
  if (fs::is_directory(p, ec)) {
    for (const auto& entry : fs::directory_iterator(p)) {
      if (entry.is_regular_file()) files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end());
  } else if (fs::is_regular_file(p, ec)) {
    files_.push_back(p);
  } else {
    throw IoError("cannot read post source " + source);
  }
  for (const auto& f : files_) {
    std::ifstream probe(f);
    if (!probe) throw IoError("cannot read post source " + f.string());
  }
}

PostReader::~PostReader() = default;

bool PostReader::open_next_file() {
  while (file_index_ < files_.size()) {
    const auto& path = files_[file_index_++];
    in_ = std::make_unique<std::ifstream>(path);
    if (!*in_) throw IoError("cannot read post source " + path.string());
    current_name_ = path.string();
    line_no_ = 0;
    partial_.clear();
    return true;
  }
  return false;
}

bool PostReader::read_line(std::string& line) {
  using namespace std::chrono_literals;
  while (true) {
    std::istream* in = use_stdin_ ? static_cast<std::istream*>(&std::cin) : in_.get();
    if (!in) {
      if (!open_next_file()) return false;
      continue;
    }
    std::string chunk;
    if (std::getline(*in, chunk)) {
      if (in->eof()) {
        // No trailing newline: either a final unterminated record or a
        // record still being appended.
        if (follow_ && !stop_.load()) {
          partial_ += chunk;
          in->clear();
          std::this_thread::sleep_for(50ms);
          continue;
        }
      }
      line = partial_ + chunk;
      partial_.clear();
      ++line_no_;
      return true;
    }
    if (!partial_.empty()) {
      line = std::move(partial_);
      partial_.clear();
      ++line_no_;
      return true;
    }
    const bool last_file = use_stdin_ || file_index_ >= files_.size();
    if (follow_ && last_file && !use_stdin_ && !stop_.load()) {
      in->clear();
      std::this_thread::sleep_for(100ms);
      continue;
    }
    if (use_stdin_) return false;
    in_.reset();
    if (!open_next_file()) return false;
  }
}

std::optional<RawPost> PostReader::next() {
  std::string line;
  while (read_line(line)) {
    if (trim(line).empty()) continue;
    try {
      return post_from_json(json::parse(line));
    } catch (const std::exception& e) {
      ++skipped_;
      warnings_.push_back({current_name_, line_no_, e.what()});
      spdlog::warn("{}:{}: skipping malformed record: {}", current_name_, line_no_, e.what());
    }
  }
  return std::nullopt;
}

ReadResult read_posts(const std::string& source) {
  PostReader reader(source);
  ReadResult r;
  while (auto p = reader.next()) r.posts.push_back(std::move(*p));
  r.skipped = reader.skipped();
  r.warnings = reader.warnings();
  return r;
}

}  // namespace ground::ingest
