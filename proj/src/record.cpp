#include "ground/record.hpp"

namespace ground {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Provenance p) noexcept {
  return p == Provenance::DeviceGps ? "DeviceGps" : "TextGrounded";
}

std::optional<Provenance> parse_provenance(std::string_view s) noexcept {
  if (s == "DeviceGps") return Provenance::DeviceGps;
  if (s == "TextGrounded") return Provenance::TextGrounded;
  return std::nullopt;
}

std::optional<LatLon> GroundedPost::coordinate() const {
  if (provenance == Provenance::DeviceGps) return post.gps;
  if (grounding) return grounding->coordinate;
  return std::nullopt;
}

std::optional<std::string> validate(const GroundedPost& p, const std::set<std::string>& categories) {
  if (auto err = ingest::validate(p.post)) return err;
  if (!(p.relevance > 0.0 && p.relevance < 1.0)) return "relevance must be in (0, 1)";
  if (p.category.empty()) return "empty category";
  if (!categories.empty() && !categories.count(p.category)) return "category '" + p.category + "' is not configured";
  if (p.provenance == Provenance::DeviceGps && !p.post.gps) return "DeviceGps provenance without a device coordinate";
  if (p.provenance == Provenance::TextGrounded) {
    if (!p.grounding || !geocode::is_grounded(p.grounding->status)) {
      return "TextGrounded provenance without a successful grounding";
    }
  }
  if (p.grounding && p.grounding->coordinate.has_value() != geocode::is_grounded(p.grounding->status)) {
    return "grounding coordinate does not match its status";
  }
  return std::nullopt;
}

ordered_json to_json(const GroundedPost& p) {
  ordered_json j;
  j["post"] = ingest::to_json(p.post);
  j["relevance"] = p.relevance;
  j["category"] = p.category;
  ordered_json exprs = ordered_json::array();
  for (const auto& e : p.expressions) {
    ordered_json ej;
    ej["surface"] = e.surface;
    ej["kind"] = gaz::to_string(e.kind);
    ej["constituents"] = e.constituents;
    ordered_json gs = ordered_json::array();
    for (const auto& g : e.groundings) gs.push_back(geocode::serialize_grounding(g));
    ej["groundings"] = std::move(gs);
    exprs.push_back(std::move(ej));
  }
  j["expressions"] = std::move(exprs);
  j["grounding"] = p.grounding ? geocode::serialize_grounding(*p.grounding) : ordered_json(nullptr);
  j["provenance"] = to_string(p.provenance);
  j["processed_at"] = format_rfc3339(p.processed_at);
  return j;
}

GroundedPost grounded_from_json(const json& j) {
  try {
    GroundedPost p;
    p.post = ingest::post_from_json(j.at("post"));
    p.relevance = j.at("relevance").get<double>();
    p.category = j.at("category").get<std::string>();
    for (const auto& ej : j.at("expressions")) {
      ExpressionRecord e;
      e.surface = ej.at("surface").get<std::string>();
      const auto kind = gaz::parse_kind(ej.at("kind").get<std::string>());
      if (!kind) throw std::invalid_argument("bad expression kind");
      e.kind = *kind;
      e.constituents = ej.at("constituents").get<std::vector<std::string>>();
      for (const auto& g : ej.at("groundings")) e.groundings.push_back(geocode::parse_grounding(g));
      p.expressions.push_back(std::move(e));
    }
    if (const auto& g = j.at("grounding"); !g.is_null()) p.grounding = geocode::parse_grounding(g);
    const auto prov = parse_provenance(j.at("provenance").get<std::string>());
    if (!prov) throw std::invalid_argument("bad provenance");
    p.provenance = *prov;
    const auto ts = parse_rfc3339(j.at("processed_at").get<std::string>());
    if (!ts) throw std::invalid_argument("bad processed_at");
    p.processed_at = *ts;
    return p;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed grounded post: ") + e.what());
  }
}

}  // namespace ground
