#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ground/geocode.hpp"

namespace ground::config {

struct GeocoderSettings {
  std::string type;  // "mock" or "http"
  std::string name;
  std::filesystem::path fixture;         // mock
  std::optional<std::string> source;     // mock: serve only this source's rows
  std::string base_url;                  // http
  std::chrono::milliseconds timeout{5000};
  double rate_limit_per_s = 1.0;
};

struct CategoryRule {
  std::string keyword;
  std::string category;
};

/// One JSON document. Relative paths are resolved against the directory of
/// the config file.
struct Config {
  std::filesystem::path keywords;
  std::filesystem::path simplifier;
  std::filesystem::path pos_lexicon;
  std::filesystem::path gazetteer;
  std::filesystem::path models;
  std::filesystem::path store;
  std::filesystem::path stats;

  double filter_threshold = 0.5;
  int ngram_max = 2;

  std::vector<std::string> connectors{"between", "and", "to", "near", "opposite"};
  std::size_t connector_window = 3;

  geocode::ResolverConfig resolver;
  std::vector<GeocoderSettings> geocoders;

  std::vector<CategoryRule> categories;
  std::string default_category = "Other";

  bool ner_on_gps = true;
  std::size_t queue_capacity = 64;

  std::set<std::string> category_set() const;
};

/// Throws ConfigError naming the offending key.
Config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Config load(const std::filesystem::path& path);

geocode::ClientList make_clients(const Config& config);

}  // namespace ground::config
