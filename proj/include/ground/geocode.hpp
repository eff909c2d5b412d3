#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ground/gazetteer.hpp"
#include "ground/geo.hpp"
#include "ground/timeutil.hpp"

namespace ground::geocode {

struct Candidate {
  std::string source;
  LatLon position;
  std::string address;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

enum class Status { GazetteerHit, GeocodedConsistent, RejectedOutOfBounds, RejectedInconsistent, NotFound };

std::string_view to_string(Status s) noexcept;
std::optional<Status> parse_status(std::string_view s) noexcept;
inline bool is_grounded(Status s) noexcept { return s == Status::GazetteerHit || s == Status::GeocodedConsistent; }

struct GroundingResult {
  std::string name;
  Status status = Status::NotFound;
  std::optional<LatLon> coordinate;
  std::optional<std::string> address;
  std::vector<Candidate> candidates;
  std::optional<double> max_pairwise_km;
  std::optional<std::string> gazetteer_entry;  // canonical name when the gazetteer matched

  friend bool operator==(const GroundingResult&, const GroundingResult&) = default;
};

/// Fields in fixed order: name, status, coordinate, address, max_pairwise_km,
/// candidates, gazetteer_entry. Absent optionals serialize as null.
nlohmann::ordered_json serialize_grounding(const GroundingResult& r);
/// Throws std::invalid_argument on a malformed object.
GroundingResult parse_grounding(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Clients

class GeocoderClient {
 public:
  virtual ~GeocoderClient() = default;
  virtual const std::string& name() const noexcept = 0;
  /// May throw on transport or protocol failure.
  virtual std::vector<Candidate> query(const std::string& place) = 0;
};

using ClientList = std::vector<std::shared_ptr<GeocoderClient>>;

/// File-backed client. Fixture rows: query | source | lat | lon | address.
/// Queries match case-insensitively. With a source filter only rows of that
/// source are served; otherwise every matching row is returned.
class MockGeocoder : public GeocoderClient {
 public:
  struct Row {
    std::string query;
    Candidate candidate;
  };

  MockGeocoder(std::string name, std::vector<Row> rows, std::optional<std::string> source_filter = std::nullopt);
  static std::vector<Row> load_fixture(const std::filesystem::path& path);

  const std::string& name() const noexcept override { return name_; }
  std::vector<Candidate> query(const std::string& place) override;

  std::size_t calls() const noexcept { return calls_.load(); }
  /// Test hooks: every query sleeps for `delay` and/or throws.
  void set_delay(std::chrono::milliseconds delay) noexcept { delay_ms_.store(delay.count()); }
  void set_failing(bool failing) noexcept { failing_.store(failing); }

 private:
  std::string name_;
  std::unordered_map<std::string, std::vector<Candidate>> rows_;  // fixture order kept
  std::optional<std::string> source_filter_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<long long> delay_ms_{0};
  std::atomic<bool> failing_{false};
};

/// Client for the open structured-query protocol: GET {base}/search?q=..&format=json
/// answered by an array of {lat, lon, display_name} objects (lat/lon may be
/// strings). Plain http only.
class HttpGeocoder : public GeocoderClient {
 public:
  struct Options {
    std::string name = "nominatim";
    std::string base_url;
    std::chrono::milliseconds timeout{5000};
    double rate_limit_per_s = 1.0;  // <= 0 disables throttling
    std::string user_agent = "ground/1.0";
  };

  explicit HttpGeocoder(Options options);
  const std::string& name() const noexcept override { return options_.name; }
  std::vector<Candidate> query(const std::string& place) override;

  /// Parses a response body; entries with missing or invalid coordinates are skipped.
  static std::vector<Candidate> parse_response(std::string_view body, const std::string& source);

 private:
  Options options_;
  std::string scheme_host_;
  std::string path_prefix_;
  std::mutex throttle_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Queries every client concurrently. A client that throws or misses the
/// deadline contributes nothing and is logged. Results are concatenated in
/// client order.
std::vector<Candidate> geocode(const std::string& place, const ClientList& clients,
                               std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

// ---------------------------------------------------------------------------
// Validation and resolution

enum class Fusion { Centroid, FirstSource };
std::optional<Fusion> parse_fusion(std::string_view s) noexcept;
std::string_view to_string(Fusion f) noexcept;

/// Drops candidates outside the box, then accepts the survivors only if their
/// maximum pairwise distance is within the threshold. The returned name is
/// empty. With Centroid fusion the result does not depend on candidate order.
GroundingResult validate_consistency(std::span<const Candidate> candidates, const geo::BoundingBox& bbox,
                                     double max_pairwise_km, Fusion fusion = Fusion::Centroid);

struct ResolverConfig {
  geo::BoundingBox bbox = geo::kDohaBox;
  double max_normalized_distance = 0.2;
  double max_pairwise_km = 1.0;
  Fusion fusion = Fusion::Centroid;
  std::chrono::milliseconds client_timeout{5000};
  std::chrono::seconds negative_cache_ttl{3600};
};

/// Gazetteer first (approximate match); a matched entry with a coordinate in
/// the box returns immediately. Otherwise the geocoders are asked for the
/// matched canonical name, or the raw name when nothing matched.
GroundingResult resolve(std::string_view name, const gaz::Gazetteer& gazetteer, const ClientList& clients,
                        const ResolverConfig& config);

/// resolve() plus a time-limited cache of NotFound names. Safe for concurrent use.
class Resolver {
 public:
  using Clock = std::function<Timestamp()>;

  Resolver(std::shared_ptr<const gaz::Gazetteer> gazetteer, ClientList clients, ResolverConfig config,
           Clock clock = now_utc);

  GroundingResult resolve(std::string_view name);

  const ResolverConfig& config() const noexcept { return config_; }
  const gaz::Gazetteer& gazetteer() const noexcept { return *gazetteer_; }
  const ClientList& clients() const noexcept { return clients_; }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
  std::shared_ptr<const gaz::Gazetteer> gazetteer_;
  ClientList clients_;
  ResolverConfig config_;
  Clock clock_;
  mutable std::shared_mutex cache_mutex_;
  std::unordered_map<std::string, Timestamp> not_found_;  // name -> expiry
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace ground::geocode
