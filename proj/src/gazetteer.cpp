#include "ground/gazetteer.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "ground/parallel.hpp"
#include "ground/util.hpp"

namespace ground::gaz {
namespace {

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string phrase_of(std::string_view alias) {
  std::string out;
  for (const auto& tok : text::tokenize(alias)) {
    if (!out.empty()) out += ' ';
    out += match_form(tok);
  }
  return out;
}

struct Scored {
  double distance;
  std::size_t alias;
};

// Lower bound |la - lb| <= d lets most aliases be skipped without the DP.
double score_alias(const std::u32string& query, const Gazetteer::Alias& alias, double max_dist) {
  const std::size_t la = query.size();
  const std::size_t lb = alias.length;
  const std::size_t longest = std::max(la, lb);
  if (longest == 0) return 0.0;
  const double lower = static_cast<double>(la > lb ? la - lb : lb - la) / static_cast<double>(longest);
  if (lower > max_dist) return std::numeric_limits<double>::infinity();
  const auto u = to_u32(alias.folded);
  // Same DP as edit_distance, kept on code-point strings to avoid re-decoding the query.
  std::vector<std::size_t> prev(u.size() + 1), cur(u.size() + 1);
  for (std::size_t j = 0; j <= u.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= la; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= u.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (query[i - 1] == u[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[u.size()]) / static_cast<double>(longest);
}

bool better(const Scored& a, const Scored& b, const std::vector<Gazetteer::Alias>& aliases) {
  if (a.distance != b.distance) return a.distance < b.distance;
  const auto& x = aliases[a.alias];
  const auto& y = aliases[b.alias];
  if (x.length != y.length) return x.length < y.length;
  return x.folded < y.folded;
}

std::optional<Match> pick(const std::vector<double>& distances, const Gazetteer& g, double max_dist) {
  std::optional<Scored> best;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] <= max_dist)) continue;
    const Scored s{distances[i], i};
    if (!best || better(s, *best, g.aliases())) best = s;
  }
  if (!best) return std::nullopt;
  const auto& alias = g.aliases()[best->alias];
  return Match{&g.entries()[alias.entry], alias.folded, best->distance};
}

}  // namespace

std::string_view to_string(EntityKind kind) noexcept {
  return kind == EntityKind::Location ? "Location" : "Landmark";
}

std::optional<EntityKind> parse_kind(std::string_view s) noexcept {
  const auto f = casefold(s);
  if (f == "location" || f == "loc") return EntityKind::Location;
  if (f == "landmark" || f == "lmk") return EntityKind::Landmark;
  return std::nullopt;
}

std::string normalize_name(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = true;
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

std::string match_form(const text::Token& tok) {
  if (tok.kind == text::TokenKind::Hashtag) return tok.normalized.substr(1);
  return tok.normalized;
}

Gazetteer::Gazetteer(std::vector<GazetteerEntry> entries) : entries_(std::move(entries)) {
  std::set<std::pair<std::string, EntityKind>> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    e.canonical = std::string(trim(e.canonical));
    if (e.canonical.empty()) throw ConfigError("gazetteer entry " + std::to_string(i + 1) + ": empty canonical name");
    if (!seen.emplace(normalize_name(e.canonical), e.kind).second) {
      throw ConfigError("gazetteer: duplicate entry '" + e.canonical + "' of kind " + std::string(to_string(e.kind)));
    }
    std::vector<std::string> aliases{e.canonical};
    std::set<std::string> folded{normalize_name(e.canonical)};
    for (const auto& a : e.aliases) {
      const auto t = std::string(trim(a));
      if (!t.empty() && folded.insert(normalize_name(t)).second) aliases.push_back(t);
    }
    e.aliases = std::move(aliases);

    for (const auto& a : e.aliases) {
      auto key = normalize_name(a);
      exact_[key].push_back(i);
      auto phrase = phrase_of(a);
      if (!phrase.empty()) {
        auto& bucket = phrases_[phrase];
        if (bucket.empty() || bucket.back() != i) bucket.push_back(i);
        max_phrase_tokens_ = std::max(max_phrase_tokens_, text::tokenize(a).size());
      }
    }
  }
  for (const auto& [key, ids] : exact_) {
    aliases_.push_back({key, to_u32(key).size(), ids.front()});
  }
  std::sort(aliases_.begin(), aliases_.end(), [](const Alias& a, const Alias& b) { return a.folded < b.folded; });
}

std::span<const std::size_t> Gazetteer::lookup_exact(std::string_view name) const {
  const auto it = exact_.find(normalize_name(name));
  if (it == exact_.end()) return {};
  return it->second;
}

std::span<const std::size_t> Gazetteer::lookup_phrase(std::string_view phrase) const {
  const auto it = phrases_.find(std::string(phrase));
  if (it == phrases_.end()) return {};
  return it->second;
}

LoadResult load_gazetteer(const std::filesystem::path& path, const geo::BoundingBox& region) {
  const auto lines = read_lines(path);
  std::vector<GazetteerEntry> entries;
  std::vector<std::string> warnings;
  std::set<std::pair<std::string, EntityKind>> seen;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    auto cols = split(line, '|');
    if (cols.size() != 5 && cols.size() != 6) {
      throw ParseError(path.string(), i + 1, "expected 5 or 6 '|'-separated columns, got " + std::to_string(cols.size()));
    }
    for (auto& c : cols) c = std::string(trim(c));

    GazetteerEntry e;
    e.canonical = cols[0];
    if (e.canonical.empty()) throw ParseError(path.string(), i + 1, "empty canonical name");
    const auto kind = parse_kind(cols[1]);
    if (!kind) throw ParseError(path.string(), i + 1, "unknown kind '" + cols[1] + "'");
    e.kind = *kind;
    if (!seen.emplace(normalize_name(e.canonical), e.kind).second) {
      throw ParseError(path.string(), i + 1, "duplicate canonical name '" + e.canonical + "' with the same kind");
    }

    if (cols[2].empty() != cols[3].empty()) throw ParseError(path.string(), i + 1, "lat and lon must both be set or both empty");
    if (!cols[2].empty()) {
      const auto lat = parse_double(cols[2]);
      const auto lon = parse_double(cols[3]);
      if (!lat || !lon) throw ParseError(path.string(), i + 1, "unparsable coordinate");
      const LatLon p{*lat, *lon};
      if (!valid_lat_lon(p)) throw ParseError(path.string(), i + 1, "coordinate out of range");
      if (region.contains(p)) {
        e.coordinate = p;
      } else {
        auto msg = path.string() + ":" + std::to_string(i + 1) + ": coordinate of '" + e.canonical +
                   "' lies outside the region bounding box; dropped";
        spdlog::warn("{}", msg);
        warnings.push_back(std::move(msg));
      }
    }
    if (!cols[4].empty()) {
      for (const auto& a : split(cols[4], ';')) e.aliases.emplace_back(trim(a));
    }
    if (cols.size() == 6 && !cols[5].empty()) e.source = cols[5];
    entries.push_back(std::move(e));
  }
  return {Gazetteer(std::move(entries)), std::move(warnings)};
}

void save_gazetteer(const Gazetteer& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# canonical | kind | lat | lon | aliases | source\n";
  for (const auto& e : g.entries()) {
    std::vector<std::string> extra(e.aliases.begin() + 1, e.aliases.end());
    out << e.canonical << " | " << to_string(e.kind) << " | ";
    if (e.coordinate) {
      out << format_double(e.coordinate->lat) << " | " << format_double(e.coordinate->lon);
    } else {
      out << " | ";
    }
    out << " | " << join(extra, ";") << " | " << e.source << '\n';
  }
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const auto x = to_u32(a);
  const auto y = to_u32(b);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

std::optional<Match> approx_lookup(std::string_view name, const Gazetteer& g, double max_normalized_distance) {
  const auto query = to_u32(normalize_name(name));
  const auto& aliases = g.aliases();
  std::vector<double> distances(aliases.size());
  parallel::for_each_index(aliases.size(), [&](std::size_t i) {
    distances[i] = score_alias(query, aliases[i], max_normalized_distance);
  });
  return pick(distances, g, max_normalized_distance);
}

std::optional<Match> serial::approx_lookup(std::string_view name, const Gazetteer& g, double max_normalized_distance) {
  const auto query = to_u32(normalize_name(name));
  const auto& aliases = g.aliases();
  std::vector<double> distances(aliases.size());
  for (std::size_t i = 0; i < aliases.size(); ++i) {
    distances[i] = score_alias(query, aliases[i], max_normalized_distance);
  }
  return pick(distances, g, max_normalized_distance);
}

}  // namespace ground::gaz
