#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ground/geo.hpp"
#include "ground/text.hpp"

namespace ground::gaz {

enum class EntityKind { Location, Landmark };

std::string_view to_string(EntityKind kind) noexcept;
std::optional<EntityKind> parse_kind(std::string_view s) noexcept;

struct GazetteerEntry {
  std::string canonical;
  std::vector<std::string> aliases;  // canonical first
  EntityKind kind = EntityKind::Location;
  std::optional<LatLon> coordinate;
  std::string source = "manual";

  friend bool operator==(const GazetteerEntry&, const GazetteerEntry&) = default;
};

/// Case-folds, trims, and collapses inner whitespace runs to one space.
std::string normalize_name(std::string_view s);

/// Form of a token used for gazetteer phrase matching (hashtags lose their '#').
std::string match_form(const text::Token& tok);

class Gazetteer {
 public:
  struct Alias {
    std::string folded;
    std::size_t length = 0;  // code points
    std::size_t entry = 0;   // first entry carrying this alias
  };

  Gazetteer() = default;
  /// Puts the canonical name first among the aliases and dedups them. Throws
  /// ConfigError for an empty canonical name or a repeated (canonical, kind).
  explicit Gazetteer(std::vector<GazetteerEntry> entries);

  const std::vector<GazetteerEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Distinct aliases, sorted; each resolves to the first entry carrying it.
  const std::vector<Alias>& aliases() const noexcept { return aliases_; }
  /// All entries carrying `alias` (case-folded, normalized), in file order.
  std::span<const std::size_t> lookup_exact(std::string_view name) const;

  /// Entries whose alias, tokenized, equals this token-window phrase
  /// (match forms joined by single spaces).
  std::span<const std::size_t> lookup_phrase(std::string_view phrase) const;
  std::size_t max_phrase_tokens() const noexcept { return max_phrase_tokens_; }

 private:
  std::vector<GazetteerEntry> entries_;
  std::vector<Alias> aliases_;
  std::unordered_map<std::string, std::vector<std::size_t>> exact_;
  std::unordered_map<std::string, std::vector<std::size_t>> phrases_;
  std::size_t max_phrase_tokens_ = 0;
};

struct LoadResult {
  Gazetteer gazetteer;
  std::vector<std::string> warnings;
};

/// Row format: canonical | kind | lat | lon | alias1;alias2;... [| source]
/// with '#' comment lines. Empty lat/lon means no coordinate. A coordinate
/// outside `region` is dropped with a warning.
LoadResult load_gazetteer(const std::filesystem::path& path, const geo::BoundingBox& region = geo::kDohaBox);
void save_gazetteer(const Gazetteer& g, const std::filesystem::path& path);

/// Levenshtein distance over Unicode code points.
std::size_t edit_distance(std::string_view a, std::string_view b);

struct Match {
  const GazetteerEntry* entry = nullptr;
  std::string alias;
  double distance = 0.0;  // normalized
};

/// Entry whose alias minimizes edit_distance / max(len) against the case-folded
/// name, if that minimum is <= max_normalized_distance. Ties go to the shorter,
/// then lexicographically smaller alias. Aliases are scored in parallel.
std::optional<Match> approx_lookup(std::string_view name, const Gazetteer& g, double max_normalized_distance);

namespace serial {
std::optional<Match> approx_lookup(std::string_view name, const Gazetteer& g, double max_normalized_distance);
}  // namespace serial

}  // namespace ground::gaz
