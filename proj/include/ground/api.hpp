#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "ground/store.hpp"

namespace ground::api {

using Params = std::multimap<std::string, std::string>;

struct Response {
  int status = 200;
  nlohmann::ordered_json body;
};

/// Public view of a stored post: id, text, created_at, category, coordinate,
/// provenance, expressions, hashtags, has_media.
nlohmann::ordered_json post_view(const GroundedPost& p);

/// GET /api/recent?count=<int>&lang=<code>
Response handle_recent(const store::PostStore& store, const Params& params);
/// GET /api/search?query=a,b&since=<t> | from=<t>&to=<t> [&op=and|or] [&lang=] [&count=]
Response handle_search(const store::PostStore& store, const Params& params);
Response handle_health();

using StatsSource = std::function<nlohmann::ordered_json()>;

/// Serves the stats document written by `ground run`; zeros when the file is absent.
StatsSource stats_file_source(std::filesystem::path path);

class Server {
 public:
  Server(std::shared_ptr<const store::PostStore> store, StatsSource stats,
         std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ground::api
