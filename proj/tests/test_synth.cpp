#include <doctest.h>

#include <set>

#include "ground/synth.hpp"
#include "ground/gazetteer.hpp"
#include "ground/util.hpp"
#include "support.hpp"

using namespace ground;

namespace {

const gaz::Gazetteer& gazetteer() {
  static const auto g = gaz::load_gazetteer(testing::kData / "gazetteer_doha.txt").gazetteer;
  return g;
}

const ingest::KeywordList& keywords() {
  static const auto k = ingest::KeywordList::load(testing::kData / "keywords.txt");
  return k;
}

bool has_keyword(const std::string& text) {
  ingest::RawPost p;
  p.text = text;
  return ingest::keyword_match(p, keywords()).matched;
}

}  // namespace

TEST_CASE("filter corpus is seeded and keyword-bearing") {
  const auto places = synth::replay_places(gazetteer());
  synth::FilterCorpusOptions o;
  o.size = 300;
  o.label_noise = 0.0;
  const auto a = synth::filter_corpus(o, places);
  const auto b = synth::filter_corpus(o, places);
  REQUIRE(a.size() == 300);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    CHECK(a[i].relevant == b[i].relevant);
    CHECK(has_keyword(a[i].text));
    positives += a[i].relevant;
  }
  CHECK(positives == 100);
  o.seed = 8;
  const auto c = synth::filter_corpus(o, places);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].text != c[i].text;
  CHECK(differs);
}

TEST_CASE("off-topic and incident posts carry a traffic keyword") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    CHECK(has_keyword(synth::off_topic_post(rng, "Salwa Road")));
    CHECK(has_keyword(synth::incident_report(rng, "Salwa Road")));
  }
}

TEST_CASE("label noise flips roughly the requested share") {
  synth::FilterCorpusOptions o;
  o.size = 3000;
  o.positive_rate = 1.0;
  o.label_noise = 0.1;
  std::size_t negatives = 0;
  for (const auto& ex : synth::filter_corpus(o, synth::replay_places(gazetteer()))) negatives += !ex.relevant;
  CHECK(negatives > 220);
  CHECK(negatives < 380);
}

TEST_CASE("ner corpus is aligned, BIO-legal and seeded") {
  synth::NerCorpusOptions o;
  o.size = 200;
  const auto a = synth::ner_corpus(o, gazetteer());
  const auto b = synth::ner_corpus(o, gazetteer());
  const ner::LabelSet labels;
  REQUIRE(a.size() == 200);
  std::size_t entity_tokens = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].tokens.size() == a[i].labels.size());
    CHECK(a[i].labels == b[i].labels);
    for (std::size_t t = 0; t < a[i].labels.size(); ++t) {
      CHECK(a[i].tokens[t].surface == b[i].tokens[t].surface);
      const std::optional<std::size_t> prev = t ? std::optional(a[i].labels[t - 1]) : std::nullopt;
      CHECK(labels.allowed(prev, a[i].labels[t]));
      entity_tokens += !labels.is_outside(a[i].labels[t]);
    }
  }
  CHECK(entity_tokens > 200);
}

TEST_CASE("typo injection makes a single edit") {
  std::mt19937_64 rng(3);
  CHECK(synth::inject_typo(rng, "at") == "at");
  for (int i = 0; i < 1000; ++i) {
    const std::string word = i % 2 ? "Roundabout" : "jam";
    const auto out = synth::inject_typo(rng, word);
    CHECK(out != word);
    CHECK(gaz::edit_distance(out, word) <= 2);  // a transposition counts as two plain edits
    CHECK(out.size() + 1 >= word.size());
    CHECK(out.size() <= word.size() + 1);
  }
}

TEST_CASE("replay stream composition") {
  synth::ReplayOptions o;
  o.text_groundable = 30;
  o.gps = 4;
  o.off_topic = 6;
  o.no_keyword = 5;
  const auto posts = synth::replay_posts(o, synth::replay_places(gazetteer()));
  REQUIRE(posts.size() == 45);
  std::size_t gps = 0, no_kw = 0;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    CHECK(!ingest::validate(posts[i]));
    ids.insert(posts[i].id);
    if (posts[i].gps) {
      ++gps;
      CHECK(geo::kDohaBox.contains(*posts[i].gps));
    }
    no_kw += !has_keyword(posts[i].text);
    if (i) CHECK(posts[i].created_at > posts[i - 1].created_at);
  }
  CHECK(ids.size() == posts.size());
  CHECK(gps == 4);
  CHECK(no_kw == 5);
}

TEST_CASE("the shipped 200-post replay fixture regenerates byte for byte") {
  const auto places = synth::replay_places(gazetteer(), testing::kData / "mock_geocoder.tsv");
  std::string regenerated;
  for (const auto& p : synth::replay_posts({}, places)) regenerated += ingest::serialize_post(p) + "\n";
  CHECK(regenerated == read_file(testing::kData / "fixtures" / "replay_200.jsonl"));
}

TEST_CASE("generators reject unusable inputs") {
  CHECK_THROWS_AS(synth::filter_corpus({}, {}), Error);
  CHECK_THROWS_AS(synth::replay_posts({}, {}), Error);
  synth::ReplayOptions bad;
  bad.start = "yesterday";
  const std::vector<std::string> places{"Salwa Road"};
  CHECK_THROWS_AS(synth::replay_posts(bad, places), Error);
  CHECK_THROWS_AS(synth::ner_corpus({}, gaz::Gazetteer{}), Error);
}
