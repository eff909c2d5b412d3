#include "ground/geocode.hpp"

#include <algorithm>
#include <charconv>
#include <future>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "ground/util.hpp"

namespace ground::geocode {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::optional<double> number_of(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) return std::nullopt;
  const auto& s = v.get_ref<const std::string&>();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return out;
}

bool canonical_less(const Candidate& a, const Candidate& b) {
  if (a.position.lat != b.position.lat) return a.position.lat < b.position.lat;
  if (a.position.lon != b.position.lon) return a.position.lon < b.position.lon;
  if (a.source != b.source) return a.source < b.source;
  return a.address < b.address;
}

}  // namespace

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::GazetteerHit: return "GazetteerHit";
    case Status::GeocodedConsistent: return "GeocodedConsistent";
    case Status::RejectedOutOfBounds: return "RejectedOutOfBounds";
    case Status::RejectedInconsistent: return "RejectedInconsistent";
    case Status::NotFound: return "NotFound";
  }
  return "?";
}

std::optional<Status> parse_status(std::string_view s) noexcept {
  for (auto st : {Status::GazetteerHit, Status::GeocodedConsistent, Status::RejectedOutOfBounds,
                  Status::RejectedInconsistent, Status::NotFound}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

std::optional<Fusion> parse_fusion(std::string_view s) noexcept {
  if (s == "centroid") return Fusion::Centroid;
  if (s == "first-source-priority") return Fusion::FirstSource;
  return std::nullopt;
}

std::string_view to_string(Fusion f) noexcept {
  return f == Fusion::Centroid ? "centroid" : "first-source-priority";
}

ordered_json serialize_grounding(const GroundingResult& r) {
  ordered_json j;
  j["name"] = r.name;
  j["status"] = to_string(r.status);
  if (r.coordinate) {
    j["coordinate"] = ordered_json{{"lat", r.coordinate->lat}, {"lon", r.coordinate->lon}};
  } else {
    j["coordinate"] = nullptr;
  }
  j["address"] = r.address ? ordered_json(*r.address) : ordered_json(nullptr);
  j["max_pairwise_km"] = r.max_pairwise_km ? ordered_json(*r.max_pairwise_km) : ordered_json(nullptr);
  ordered_json cands = ordered_json::array();
  for (const auto& c : r.candidates) {
    cands.push_back(ordered_json{
        {"source", c.source}, {"lat", c.position.lat}, {"lon", c.position.lon}, {"address", c.address}});
  }
  j["candidates"] = std::move(cands);
  j["gazetteer_entry"] = r.gazetteer_entry ? ordered_json(*r.gazetteer_entry) : ordered_json(nullptr);
  return j;
}

GroundingResult parse_grounding(const json& j) {
  try {
    GroundingResult r;
    r.name = j.at("name").get<std::string>();
    const auto status = parse_status(j.at("status").get<std::string>());
    if (!status) throw std::invalid_argument("unknown status '" + j.at("status").get<std::string>() + "'");
    r.status = *status;
    if (const auto& c = j.at("coordinate"); !c.is_null()) r.coordinate = LatLon{c.at("lat").get<double>(), c.at("lon").get<double>()};
    if (const auto& a = j.at("address"); !a.is_null()) r.address = a.get<std::string>();
    if (const auto& m = j.at("max_pairwise_km"); !m.is_null()) r.max_pairwise_km = m.get<double>();
    for (const auto& c : j.at("candidates")) {
      r.candidates.push_back({c.at("source").get<std::string>(), {c.at("lat").get<double>(), c.at("lon").get<double>()},
                              c.at("address").get<std::string>()});
    }
    if (j.contains("gazetteer_entry") && !j["gazetteer_entry"].is_null()) {
      r.gazetteer_entry = j["gazetteer_entry"].get<std::string>();
    }
    if (r.coordinate.has_value() != is_grounded(r.status)) {
      throw std::invalid_argument("coordinate presence does not match status");
    }
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed grounding: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

MockGeocoder::MockGeocoder(std::string name, std::vector<Row> rows, std::optional<std::string> source_filter)
    : name_(std::move(name)), source_filter_(std::move(source_filter)) {
  for (auto& r : rows) rows_[gaz::normalize_name(r.query)].push_back(std::move(r.candidate));
}

std::vector<MockGeocoder::Row> MockGeocoder::load_fixture(const std::filesystem::path& path) {
  std::vector<Row> rows;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    auto cols = split(line, '|');
    if (cols.size() != 5) throw ParseError(path.string(), i + 1, "expected query | source | lat | lon | address");
    for (auto& c : cols) c = std::string(trim(c));
    double lat = 0.0, lon = 0.0;
    const auto p1 = std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), lat);
    const auto p2 = std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), lon);
    if (p1.ec != std::errc() || p2.ec != std::errc() || p1.ptr != cols[2].data() + cols[2].size() ||
        p2.ptr != cols[3].data() + cols[3].size()) {
      throw ParseError(path.string(), i + 1, "unparsable coordinate");
    }
    if (!valid_lat_lon({lat, lon})) throw ParseError(path.string(), i + 1, "coordinate out of range");
    if (cols[0].empty() || cols[1].empty()) throw ParseError(path.string(), i + 1, "empty query or source");
    rows.push_back({cols[0], {cols[1], {lat, lon}, cols[4]}});
  }
  return rows;
}

std::vector<Candidate> MockGeocoder::query(const std::string& place) {
  ++calls_;
  if (const auto d = delay_ms_.load(); d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
  if (failing_.load()) throw Error(name_ + ": simulated failure");
  std::vector<Candidate> out;
  const auto it = rows_.find(gaz::normalize_name(place));
  if (it == rows_.end()) return out;
  for (const auto& c : it->second) {
    if (!source_filter_ || c.source == *source_filter_) out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------

HttpGeocoder::HttpGeocoder(Options options) : options_(std::move(options)) {
  const auto& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw ConfigError("geocoder '" + options_.name + "': base_url must start with http://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_ = url.substr(0, path_start);
  if (path_start != std::string::npos) path_prefix_ = url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (scheme_host_.size() <= scheme_end + 3) throw ConfigError("geocoder '" + options_.name + "': base_url has no host");
}

std::vector<Candidate> HttpGeocoder::parse_response(std::string_view body, const std::string& source) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw Error(source + ": response is not a JSON array");
  std::vector<Candidate> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("lat") || !item.contains("lon")) continue;
    const auto lat = number_of(item["lat"]);
    const auto lon = number_of(item["lon"]);
    if (!lat || !lon || !valid_lat_lon({*lat, *lon})) continue;
    std::string address;
    if (item.contains("display_name") && item["display_name"].is_string()) address = item["display_name"].get<std::string>();
    out.push_back({source, {*lat, *lon}, std::move(address)});
  }
  return out;
}

std::vector<Candidate> HttpGeocoder::query(const std::string& place) {
  if (options_.rate_limit_per_s > 0) {
    std::unique_lock lock(throttle_mutex_);
    const auto now = std::chrono::steady_clock::now();
    const auto slot = std::max(now, next_slot_);
    next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / options_.rate_limit_per_s));
    lock.unlock();
    std::this_thread::sleep_until(slot);
  }
  httplib::Client cli(scheme_host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  const httplib::Params params{{"q", place}, {"format", "json"}};
  const httplib::Headers headers{{"User-Agent", options_.user_agent}};
  auto res = cli.Get(path_prefix_ + "/search", params, headers);
  if (!res) throw Error(options_.name + ": request failed (" + httplib::to_string(res.error()) + ")");
  if (res->status != 200) throw Error(options_.name + ": HTTP status " + std::to_string(res->status));
  return parse_response(res->body, options_.name);
}

// ---------------------------------------------------------------------------

std::vector<Candidate> geocode(const std::string& place, const ClientList& clients, std::chrono::milliseconds timeout) {
  std::vector<std::future<std::vector<Candidate>>> pending;
  pending.reserve(clients.size());
  for (const auto& client : clients) {
    auto promise = std::make_shared<std::promise<std::vector<Candidate>>>();
    pending.push_back(promise->get_future());
    // Detached so a hung client cannot block the caller past the deadline;
    // the thread owns a reference to its client.
    std::thread([client, place, promise]() {
      try {
        promise->set_value(client->query(place));
      } catch (...) {
        promise->set_exception(std::current_exception());
      }
    }).detach();
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    const auto& name = clients[i]->name();
    if (pending[i].wait_until(deadline) != std::future_status::ready) {
      spdlog::warn("geocoder '{}' timed out on '{}'", name, place);
      continue;
    }
    try {
      auto got = pending[i].get();
      out.insert(out.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
    } catch (const std::exception& e) {
      spdlog::warn("geocoder '{}' failed on '{}': {}", name, place, e.what());
    } catch (...) {
      spdlog::warn("geocoder '{}' failed on '{}'", name, place);
    }
  }
  return out;
}

GroundingResult validate_consistency(std::span<const Candidate> candidates, const geo::BoundingBox& bbox,
                                     double max_pairwise_km, Fusion fusion) {
  if (!(max_pairwise_km > 0)) throw Error("validate_consistency: max_pairwise_km must be positive");
  GroundingResult r;
  r.candidates.assign(candidates.begin(), candidates.end());
  if (candidates.empty()) {
    r.status = Status::NotFound;
    return r;
  }
  std::vector<Candidate> survivors;
  for (const auto& c : candidates) {
    if (valid_lat_lon(c.position) && bbox.contains(c.position)) survivors.push_back(c);
  }
  if (survivors.empty()) {
    r.status = Status::RejectedOutOfBounds;
    return r;
  }
  const Candidate first_in_order = survivors.front();
  std::sort(survivors.begin(), survivors.end(), canonical_less);

  double worst = 0.0;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    for (std::size_t j = i + 1; j < survivors.size(); ++j) {
      worst = std::max(worst, geo::haversine_km(survivors[i].position, survivors[j].position));
    }
  }
  r.max_pairwise_km = worst;
  if (worst > max_pairwise_km) {
    r.status = Status::RejectedInconsistent;
    return r;
  }

  LatLon fused = first_in_order.position;
  if (fusion == Fusion::Centroid) {
    double lat = 0.0, lon = 0.0;
    for (const auto& c : survivors) {
      lat += c.position.lat;
      lon += c.position.lon;
    }
    const auto n = static_cast<double>(survivors.size());
    fused = {std::clamp(lat / n, bbox.min_lat, bbox.max_lat), std::clamp(lon / n, bbox.min_lon, bbox.max_lon)};
  }
  r.status = Status::GeocodedConsistent;
  r.coordinate = fused;

  const Candidate* nearest = nullptr;
  double best = 0.0;
  for (const auto& c : survivors) {
    const double d = geo::haversine_km(c.position, fused);
    if (!nearest || d < best) {
      nearest = &c;
      best = d;
    }
  }
  r.address = nearest->address;
  return r;
}

GroundingResult resolve(std::string_view name, const gaz::Gazetteer& gazetteer, const ClientList& clients,
                        const ResolverConfig& config) {
  std::string query(trim(name));
  std::optional<std::string> entry_name;
  if (const auto match = gaz::approx_lookup(query, gazetteer, config.max_normalized_distance)) {
    const auto& e = *match->entry;
    entry_name = e.canonical;
    if (e.coordinate && config.bbox.contains(*e.coordinate)) {
      GroundingResult r;
      r.name = std::string(name);
      r.status = Status::GazetteerHit;
      r.coordinate = e.coordinate;
      r.gazetteer_entry = e.canonical;
      return r;
    }
    query = e.canonical;
  }
  const auto candidates = geocode(query, clients, config.client_timeout);
  auto r = validate_consistency(candidates, config.bbox, config.max_pairwise_km, config.fusion);
  r.name = std::string(name);
  r.gazetteer_entry = std::move(entry_name);
  return r;
}

Resolver::Resolver(std::shared_ptr<const gaz::Gazetteer> gazetteer, ClientList clients, ResolverConfig config,
                   Clock clock)
    : gazetteer_(std::move(gazetteer)), clients_(std::move(clients)), config_(config), clock_(std::move(clock)) {
  if (!gazetteer_) throw ConfigError("resolver: no gazetteer");
  if (!config_.bbox.valid()) throw ConfigError("resolver: invalid bounding box");
  if (!(config_.max_pairwise_km > 0)) throw ConfigError("resolver: max_pairwise_km must be positive");
}

GroundingResult Resolver::resolve(std::string_view name) {
  const auto key = gaz::normalize_name(name);
  const auto now = clock_();
  {
    std::shared_lock lock(cache_mutex_);
    const auto it = not_found_.find(key);
    if (it != not_found_.end() && now < it->second) {
      ++cache_hits_;
      GroundingResult r;
      r.name = std::string(name);
      return r;
    }
  }
  auto r = geocode::resolve(name, *gazetteer_, clients_, config_);
  if (r.status == Status::NotFound && config_.negative_cache_ttl.count() > 0) {
    std::unique_lock lock(cache_mutex_);
    not_found_[key] = now + config_.negative_cache_ttl;
  }
  return r;
}

}  // namespace ground::geocode
