#include "ground/config.hpp"

#include "ground/util.hpp"

namespace ground::config {

using nlohmann::json;

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: '") + key + "' has the wrong type");
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace

std::set<std::string> Config::category_set() const {
  std::set<std::string> out{default_category};
  for (const auto& r : categories) out.insert(r.category);
  return out;
}

Config from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  Config c;
  c.keywords = resolve_path(base_dir, get_or<std::string>(j, "keywords", ""));
  c.simplifier = resolve_path(base_dir, get_or<std::string>(j, "simplifier", ""));
  c.pos_lexicon = resolve_path(base_dir, get_or<std::string>(j, "pos_lexicon", ""));
  c.gazetteer = resolve_path(base_dir, get_or<std::string>(j, "gazetteer", ""));
  c.models = resolve_path(base_dir, get_or<std::string>(j, "models", ""));
  c.store = resolve_path(base_dir, get_or<std::string>(j, "store", ""));
  c.stats = resolve_path(base_dir, get_or<std::string>(j, "stats", ""));

  const auto& filter = section(j, "filter");
  c.filter_threshold = get_or(filter, "threshold", c.filter_threshold);
  c.ngram_max = get_or(filter, "ngram_max", c.ngram_max);
  if (!(c.filter_threshold > 0 && c.filter_threshold < 1)) throw ConfigError("config: filter.threshold must be in (0, 1)");
  if (c.ngram_max < 1) throw ConfigError("config: filter.ngram_max must be >= 1");

  const auto& ner = section(j, "ner");
  c.connectors = get_or(ner, "connectors", c.connectors);
  c.connector_window = get_or(ner, "connector_window", c.connector_window);
  for (auto& w : c.connectors) w = casefold(trim(w));

  const auto& res = section(j, "resolver");
  c.resolver.max_normalized_distance = get_or(res, "max_normalized_distance", c.resolver.max_normalized_distance);
  c.resolver.max_pairwise_km = get_or(res, "max_pairwise_km", c.resolver.max_pairwise_km);
  c.resolver.client_timeout = std::chrono::milliseconds(get_or(res, "client_timeout_ms", 5000LL));
  c.resolver.negative_cache_ttl = std::chrono::seconds(get_or(res, "negative_cache_ttl_s", 3600LL));
  const auto fusion = get_or<std::string>(res, "fusion", "centroid");
  const auto f = geocode::parse_fusion(fusion);
  if (!f) throw ConfigError("config: resolver.fusion must be 'centroid' or 'first-source-priority'");
  c.resolver.fusion = *f;
  if (!(c.resolver.max_pairwise_km > 0)) throw ConfigError("config: resolver.max_pairwise_km must be positive");
  if (c.resolver.max_normalized_distance < 0 || c.resolver.max_normalized_distance >= 1) {
    throw ConfigError("config: resolver.max_normalized_distance must be in [0, 1)");
  }

  if (j.contains("bbox")) {
    const auto& b = section(j, "bbox");
    c.resolver.bbox = {get_or(b, "min_lat", 0.0), get_or(b, "max_lat", 0.0), get_or(b, "min_lon", 0.0),
                       get_or(b, "max_lon", 0.0)};
    if (!c.resolver.bbox.valid()) throw ConfigError("config: bbox needs min < max on both axes");
  }

  if (j.contains("geocoders")) {
    if (!j["geocoders"].is_array()) throw ConfigError("config: 'geocoders' must be an array");
    for (const auto& g : j["geocoders"]) {
      GeocoderSettings s;
      s.type = get_or<std::string>(g, "type", "");
      s.name = get_or<std::string>(g, "name", s.type);
      s.timeout = std::chrono::milliseconds(get_or(g, "timeout_ms", 5000LL));
      s.rate_limit_per_s = get_or(g, "rate_limit_per_s", 1.0);
      if (s.type == "mock") {
        s.fixture = resolve_path(base_dir, get_or<std::string>(g, "fixture", ""));
        if (s.fixture.empty()) throw ConfigError("config: mock geocoder '" + s.name + "' needs a fixture");
        if (g.contains("source")) s.source = get_or<std::string>(g, "source", "");
      } else if (s.type == "http") {
        s.base_url = get_or<std::string>(g, "base_url", "");
        if (s.base_url.empty()) throw ConfigError("config: http geocoder '" + s.name + "' needs a base_url");
      } else {
        throw ConfigError("config: geocoder type must be 'mock' or 'http', got '" + s.type + "'");
      }
      c.geocoders.push_back(std::move(s));
    }
  }

  if (j.contains("categories")) {
    if (!j["categories"].is_array()) throw ConfigError("config: 'categories' must be an array");
    for (const auto& r : j["categories"]) {
      CategoryRule rule{casefold(trim(get_or<std::string>(r, "keyword", ""))), get_or<std::string>(r, "category", "")};
      if (rule.keyword.empty() || rule.category.empty()) throw ConfigError("config: category rule needs keyword and category");
      c.categories.push_back(std::move(rule));
    }
  }
  c.default_category = get_or(j, "default_category", c.default_category);

  const auto& pipe = section(j, "pipeline");
  c.ner_on_gps = get_or(pipe, "ner_on_gps", c.ner_on_gps);
  c.queue_capacity = get_or(pipe, "queue_capacity", c.queue_capacity);
  if (c.queue_capacity == 0) throw ConfigError("config: pipeline.queue_capacity must be positive");
  return c;
}

Config load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

geocode::ClientList make_clients(const Config& config) {
  geocode::ClientList out;
  for (const auto& s : config.geocoders) {
    if (s.type == "mock") {
      out.push_back(std::make_shared<geocode::MockGeocoder>(s.name, geocode::MockGeocoder::load_fixture(s.fixture), s.source));
    } else {
      geocode::HttpGeocoder::Options o;
      o.name = s.name;
      o.base_url = s.base_url;
      o.timeout = s.timeout;
      o.rate_limit_per_s = s.rate_limit_per_s;
      out.push_back(std::make_shared<geocode::HttpGeocoder>(std::move(o)));
    }
  }
  return out;
}

}  // namespace ground::config
