#include <doctest.h>

#include "records.hpp"
#include "support.hpp"

using namespace ground;

TEST_CASE("a well-formed record validates and exposes its display coordinate") {
  const auto g = testing::grounded_post("a1", "Accident near TV Roundabout #DohaTraffic", 0);
  CHECK(!validate(g));
  CHECK(!validate(g, {"Accident", "Other"}));
  REQUIRE(g.coordinate());
  CHECK(g.coordinate()->lat == 25.3005);
}

TEST_CASE("record invariants") {
  const auto base = testing::grounded_post("a1", "Accident near TV Roundabout", 0);
  auto g = base;
  g.relevance = 0.0;
  CHECK(validate(g));
  g = base;
  g.relevance = 1.0;
  CHECK(validate(g));
  g = base;
  g.category.clear();
  CHECK(validate(g));
  CHECK(validate(base, {"Congestion"}));
  g = base;
  g.grounding.reset();
  CHECK(validate(g));
  g = base;
  g.grounding->status = geocode::Status::RejectedInconsistent;
  CHECK(validate(g));
  g = base;
  g.grounding->coordinate.reset();
  CHECK(validate(g));
  g = base;
  g.provenance = Provenance::DeviceGps;
  CHECK(*validate(g) == "DeviceGps provenance without a device coordinate");
  g.post.gps = LatLon{25.28, 51.53};
  g.grounding.reset();
  CHECK(!validate(g));
  CHECK(g.coordinate()->lon == 51.53);
  g = base;
  g.post.id.clear();
  CHECK(validate(g));
}

TEST_CASE("records round trip through json") {
  auto g = testing::grounded_post("a1", "Crash on Salwa Road between Al Waab Street and TV Roundabout", 5, 7, "ar");
  g.post.has_media = true;
  g.post.gps = LatLon{25.0, 51.4};
  g.expressions.push_back({"Salwa Road", gaz::EntityKind::Location, {"Salwa Road", "Al Waab Street"}, {}});
  const auto j = to_json(g);
  CHECK(j["provenance"] == "TextGrounded");
  CHECK(j["processed_at"] == "2015-10-10T00:07:00Z");
  const auto back = grounded_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back == g);
  CHECK(to_json(back).dump() == j.dump());

  g.grounding.reset();
  CHECK(grounded_from_json(nlohmann::json::parse(to_json(g).dump())) == g);
}

TEST_CASE("malformed record json is rejected") {
  const auto j = to_json(testing::grounded_post("a1", "Accident near TV Roundabout", 0));
  for (const char* key : {"post", "relevance", "category", "expressions", "grounding", "provenance", "processed_at"}) {
    auto broken = nlohmann::json::parse(j.dump());
    broken.erase(key);
    CHECK_THROWS_AS(grounded_from_json(broken), std::invalid_argument);
  }
  auto bad = nlohmann::json::parse(j.dump());
  bad["provenance"] = "Telepathy";
  CHECK_THROWS_AS(grounded_from_json(bad), std::invalid_argument);
  bad = nlohmann::json::parse(j.dump());
  bad["expressions"][0]["kind"] = "Planet";
  CHECK_THROWS_AS(grounded_from_json(bad), std::invalid_argument);
  CHECK(parse_provenance("DeviceGps") == Provenance::DeviceGps);
  CHECK(!parse_provenance("devicegps"));
}
