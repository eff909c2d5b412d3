#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ground/gazetteer.hpp"
#include "ground/geocode.hpp"
#include "ground/ingest.hpp"
#include "ground/timeutil.hpp"

namespace ground {

enum class Provenance { DeviceGps, TextGrounded };
std::string_view to_string(Provenance p) noexcept;
std::optional<Provenance> parse_provenance(std::string_view s) noexcept;

struct ExpressionRecord {
  std::string surface;
  gaz::EntityKind kind = gaz::EntityKind::Location;
  std::vector<std::string> constituents;
  std::vector<geocode::GroundingResult> groundings;  // one per constituent, empty when not resolved

  friend bool operator==(const ExpressionRecord&, const ExpressionRecord&) = default;
};

struct GroundedPost {
  ingest::RawPost post;
  double relevance = 0.0;
  std::string category;
  std::vector<ExpressionRecord> expressions;
  std::optional<geocode::GroundingResult> grounding;  // display grounding: first successful constituent
  Provenance provenance = Provenance::TextGrounded;
  Timestamp processed_at{};

  /// Device coordinate for DeviceGps, the display grounding's otherwise.
  std::optional<LatLon> coordinate() const;

  friend bool operator==(const GroundedPost&, const GroundedPost&) = default;
};

/// Checks the record invariants; `categories` empty skips the category check.
std::optional<std::string> validate(const GroundedPost& p, const std::set<std::string>& categories = {});

nlohmann::ordered_json to_json(const GroundedPost& p);
/// Throws std::invalid_argument on malformed input.
GroundedPost grounded_from_json(const nlohmann::json& j);

}  // namespace ground
