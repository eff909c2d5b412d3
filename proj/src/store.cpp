#include "ground/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

#include <spdlog/spdlog.h>

#include "ground/text.hpp"

namespace ground::store {

using nlohmann::json;

namespace {

bool contains_phrase(const std::vector<std::string>& terms, const std::vector<std::string>& phrase) {
  if (phrase.empty()) return true;
  if (phrase.size() > terms.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= terms.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), terms.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

void write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("store write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::vector<std::string> term_forms(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& tok : text::tokenize(text)) {
    switch (tok.kind) {
      case text::TokenKind::Word:
      case text::TokenKind::Number:
      case text::TokenKind::Mention:
        out.push_back(tok.normalized);
        break;
      case text::TokenKind::Hashtag:
        out.push_back(tok.normalized.substr(1));
        break;
      default:
        break;
    }
  }
  return out;
}

void check(const RecentQuery& q) {
  if (q.count < 1) throw RequestError("count must be a positive integer");
  if (q.language && q.language->empty()) throw RequestError("lang must not be empty");
}

void check(const SearchQuery& q) {
  if (q.since && q.between) throw RequestError("since and from/to are mutually exclusive");
  if (q.between && q.between->first > q.between->second) throw RequestError("from must not be later than to");
  if (q.language && q.language->empty()) throw RequestError("lang must not be empty");
  if (q.limit && *q.limit < 1) throw RequestError("count must be a positive integer");
}

LogStore::LogStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  bool needs_newline = false;
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        auto post = grounded_from_json(json::parse(line));
        if (by_id_.count(post.post.id)) {
          spdlog::warn("{}:{}: duplicate id '{}' ignored", path_.string(), line_no, post.post.id);
          continue;
        }
        index(std::move(post));
      } catch (const std::exception& e) {
        ++skipped_on_open_;
        spdlog::warn("{}:{}: unreadable record skipped: {}", path_.string(), line_no, e.what());
      }
    }
    const auto size = std::filesystem::file_size(path_);
    if (size > 0) {
      std::ifstream tail(path_, std::ios::binary);
      tail.seekg(static_cast<std::streamoff>(size - 1));
      needs_newline = tail.get() != '\n';
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open store " + path_.string() + ": " + std::strerror(errno));
  if (needs_newline) write_all(fd_, "\n");
}

std::shared_lock<std::shared_mutex> LogStore::read_lock() const {
  std::lock_guard gate(gate_);
  return std::shared_lock(mutex_);
}

LogStore::~LogStore() {
  if (fd_ >= 0) ::close(fd_);
}

void LogStore::index(GroundedPost post) {
  const std::size_t i = entries_.size();
  Entry e{std::move(post), {}};
  e.terms = term_forms(e.post.post.text);
  for (const auto& h : e.post.post.hashtags) e.terms.push_back(casefold(h));
  by_id_[e.post.post.id] = i;
  by_processed_.emplace(e.post.processed_at, e.post.post.id);
  by_created_.emplace(e.post.post.created_at, e.post.post.id);
  for (const auto& t : e.terms) by_term_[t].insert(i);
  entries_.push_back(std::move(e));
}

PutResult LogStore::put(const GroundedPost& post) {
  if (auto err = validate(post)) throw Error("invalid record '" + post.post.id + "': " + *err);
  std::unique_lock lock = [&] {
    std::lock_guard gate(gate_);
    return std::unique_lock(mutex_);
  }();
  if (by_id_.count(post.post.id)) {
    spdlog::warn("store: duplicate id '{}' ignored", post.post.id);
    return PutResult::Duplicate;
  }
  write_all(fd_, to_json(post).dump() + "\n");
  if (::fsync(fd_) != 0) throw IoError(std::string("store sync failed: ") + std::strerror(errno));
  index(post);
  return PutResult::Stored;
}

std::optional<GroundedPost> LogStore::get(const std::string& id) const {
  auto lock = read_lock();
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return entries_[it->second].post;
}

std::size_t LogStore::size() const {
  auto lock = read_lock();
  return entries_.size();
}

std::vector<GroundedPost> LogStore::recent(const RecentQuery& q) const {
  check(q);
  auto lock = read_lock();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!q.language || entries_[i].post.post.language == *q.language) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = entries_[a].post;
    const auto& y = entries_[b].post;
    if (x.processed_at != y.processed_at) return x.processed_at > y.processed_at;
    return x.post.id < y.post.id;
  });
  if (idx.size() > q.count) idx.resize(q.count);
  std::vector<GroundedPost> out;
  for (auto i : idx) out.push_back(entries_[i].post);
  return out;
}

std::vector<GroundedPost> LogStore::search(const SearchQuery& q) const {
  check(q);
  std::vector<std::vector<std::string>> phrases;
  for (const auto& k : q.keywords) {
    auto forms = term_forms(k);
    if (!forms.empty()) phrases.push_back(std::move(forms));
  }

  auto lock = read_lock();
  std::vector<std::size_t> idx;
  const auto keep = [&](const Entry& e) {
    const auto& p = e.post.post;
    if (q.language && p.language != *q.language) return false;
    if (q.since && p.created_at < *q.since) return false;
    if (q.between && (p.created_at < q.between->first || p.created_at > q.between->second)) return false;
    if (phrases.empty()) return true;
    if (q.match_any) {
      return std::any_of(phrases.begin(), phrases.end(), [&](const auto& ph) { return contains_phrase(e.terms, ph); });
    }
    return std::all_of(phrases.begin(), phrases.end(), [&](const auto& ph) { return contains_phrase(e.terms, ph); });
  };

  if (phrases.empty()) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (keep(entries_[i])) idx.push_back(i);
    }
  } else {
    std::set<std::size_t> pool;
    for (const auto& ph : phrases) {
      const auto it = by_term_.find(ph.front());
      if (it != by_term_.end()) pool.insert(it->second.begin(), it->second.end());
    }
    for (auto i : pool) {
      if (keep(entries_[i])) idx.push_back(i);
    }
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = entries_[a].post.post;
    const auto& y = entries_[b].post.post;
    if (x.created_at != y.created_at) return x.created_at > y.created_at;
    return x.id < y.id;
  });
  if (q.limit && idx.size() > *q.limit) idx.resize(*q.limit);
  std::vector<GroundedPost> out;
  for (auto i : idx) out.push_back(entries_[i].post);
  return out;
}

std::vector<std::string> LogStore::audit() const {
  auto lock = read_lock();
  std::vector<std::string> problems;
  if (by_id_.size() != entries_.size()) problems.push_back("id index size differs from record count");
  if (by_processed_.size() != entries_.size()) problems.push_back("time index size differs from record count");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& p = entries_[i].post;
    const auto it = by_id_.find(p.post.id);
    if (it == by_id_.end() || it->second != i) problems.push_back("id index wrong for '" + p.post.id + "'");
    if (!by_processed_.count({p.processed_at, p.post.id})) problems.push_back("time index misses '" + p.post.id + "'");
    if (auto err = validate(p)) problems.push_back("'" + p.post.id + "': " + *err);
  }
  return problems;
}

}  // namespace ground::store
