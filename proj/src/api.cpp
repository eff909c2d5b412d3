#include "ground/api.hpp"

#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "ground/pipeline.hpp"

namespace ground::api {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Response error(std::string message) {
  return {400, ordered_json{{"error", std::move(message)}}};
}

std::optional<std::string> param(const Params& params, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

std::size_t parse_count(const std::string& raw) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size() || v < 1) {
    throw store::RequestError("count must be a positive integer, got '" + raw + "'");
  }
  return v;
}

Timestamp parse_time(const std::string& key, const std::string& raw) {
  const auto t = parse_rfc3339(raw);
  if (!t) throw store::RequestError(key + " must be an RFC 3339 datetime, got '" + raw + "'");
  return *t;
}

std::optional<std::string> language(const Params& params) {
  auto lang = param(params, "lang");
  if (lang && lang->empty()) throw store::RequestError("lang must not be empty");
  return lang;
}

Response envelope(const std::vector<GroundedPost>& posts) {
  ordered_json list = ordered_json::array();
  for (const auto& p : posts) list.push_back(post_view(p));
  ordered_json body;
  body["posts"] = std::move(list);
  body["count"] = posts.size();
  return {200, std::move(body)};
}

}  // namespace

ordered_json post_view(const GroundedPost& p) {
  ordered_json j;
  j["id"] = p.post.id;
  j["text"] = p.post.text;
  j["created_at"] = format_rfc3339(p.post.created_at);
  j["category"] = p.category;
  if (const auto c = p.coordinate()) {
    j["coordinate"] = ordered_json{{"lat", c->lat}, {"lon", c->lon}};
  } else {
    j["coordinate"] = nullptr;
  }
  j["provenance"] = to_string(p.provenance);
  ordered_json exprs = ordered_json::array();
  for (const auto& e : p.expressions) exprs.push_back(ordered_json{{"surface", e.surface}, {"kind", gaz::to_string(e.kind)}});
  j["expressions"] = std::move(exprs);
  j["hashtags"] = p.post.hashtags;
  j["has_media"] = p.post.has_media;
  return j;
}

Response handle_recent(const store::PostStore& store, const Params& params) {
  try {
    store::RecentQuery q;
    if (const auto c = param(params, "count")) q.count = parse_count(*c);
    q.language = language(params);
    return envelope(store.recent(q));
  } catch (const store::RequestError& e) {
    return error(e.what());
  }
}

Response handle_search(const store::PostStore& store, const Params& params) {
  try {
    store::SearchQuery q;
    if (const auto query = param(params, "query")) {
      for (const auto& k : split(*query, ',')) {
        const auto t = trim(k);
        if (!t.empty()) q.keywords.emplace_back(t);
      }
    }
    if (const auto s = param(params, "since")) q.since = parse_time("since", *s);
    const auto from = param(params, "from");
    const auto to = param(params, "to");
    if (from.has_value() != to.has_value()) throw store::RequestError("from and to must be given together");
    if (from) q.between = std::make_pair(parse_time("from", *from), parse_time("to", *to));
    if (const auto op = param(params, "op")) {
      if (*op == "or") {
        q.match_any = true;
      } else if (*op != "and") {
        throw store::RequestError("op must be 'and' or 'or'");
      }
    }
    q.language = language(params);
    if (const auto c = param(params, "count")) q.limit = parse_count(*c);
    return envelope(store.search(q));
  } catch (const store::RequestError& e) {
    return error(e.what());
  }
}

Response handle_health() { return {200, ordered_json{{"status", "ok"}}}; }

StatsSource stats_file_source(std::filesystem::path path) {
  return [path]() -> ordered_json {
    if (!path.empty() && std::filesystem::exists(path)) {
      try {
        return ordered_json::parse(read_file(path));
      } catch (const std::exception& e) {
        spdlog::warn("stats file {} unreadable: {}", path.string(), e.what());
      }
    }
    return pipeline::Stats{}.to_json();
  };
}

struct Server::Impl {
  httplib::Server http;
};

Server::Server(std::shared_ptr<const store::PostStore> store, StatsSource stats,
               std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
  auto& http = impl_->http;
  const auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json; charset=utf-8");
  };
  http.Get("/api/recent", [store, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_recent(*store, req.params));
  });
  http.Get("/api/search", [store, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_search(*store, req.params));
  });
  http.Get("/api/stats", [stats, send](const httplib::Request&, httplib::Response& res) {
    send(res, {200, stats()});
  });
  http.Get("/api/health", [send](const httplib::Request&, httplib::Response& res) { send(res, handle_health()); });
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(ordered_json{{"error", httplib::status_message(res.status)}}.dump(),
                      "application/json; charset=utf-8");
    }
  });
  if (static_dir && !http.set_mount_point("/", static_dir->string())) {
    throw ConfigError("static directory " + static_dir->string() + " does not exist");
  }
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) return impl_->http.bind_to_any_port(host);
  return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool Server::serve() { return impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace ground::api
