#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ground/crf.hpp"
#include "ground/gazetteer.hpp"
#include "ground/geocode.hpp"
#include "ground/ingest.hpp"
#include "ground/maxent.hpp"

// Seeded generators for the synthetic corpora and replay fixtures used by the
// evaluation harness and tests. Output depends only on the options and seed.
namespace ground::synth {

/// One real-time incident report mentioning `place`.
std::string incident_report(std::mt19937_64& rng, const std::string& place);

/// One keyword-bearing post that is not a traffic report (food, jokes, news,
/// general complaints, ads). May mention `place`.
std::string off_topic_post(std::mt19937_64& rng, const std::string& place);

struct FilterCorpusOptions {
  std::size_t size = 1000;
  double positive_rate = 1.0 / 3.0;
  double label_noise = 0.05;  // probability a label is flipped
  std::uint64_t seed = 7;
};

/// Every example contains at least one traffic keyword. Exactly
/// round(size * positive_rate) examples carry the relevant label before noise.
std::vector<maxent::LabeledText> filter_corpus(const FilterCorpusOptions& options, std::span<const std::string> places);

struct NerCorpusOptions {
  std::size_t size = 300;
  double typo_rate = 0.15;     // per word token, one random character edit
  double unseen_rate = 0.6;    // entity slot filled by a name absent from the gazetteer
  double lowercase_rate = 0.15;  // whole post lower-cased
  std::uint64_t seed = 11;
};

/// BIO-annotated incident posts. Known names are gazetteer aliases of the
/// matching kind; unseen names are generated street / landmark names.
std::vector<ner::AnnotatedSequence> ner_corpus(const NerCorpusOptions& options, const gaz::Gazetteer& gazetteer);

/// Applies one insertion, deletion, substitution or transposition to a word of
/// at least three characters; shorter words are returned unchanged.
std::string inject_typo(std::mt19937_64& rng, const std::string& word);

struct ReplayOptions {
  std::size_t text_groundable = 150;
  std::size_t gps = 5;
  std::size_t off_topic = 25;
  std::size_t no_keyword = 20;
  std::string start = "2015-10-10T06:00:00Z";
  std::uint64_t seed = 23;
};

/// Gazetteer names that carry a coordinate, then the distinct queries of a
/// mock geocoder fixture in first-seen order (when `mock_fixture` is given).
std::vector<std::string> replay_places(const gaz::Gazetteer& gazetteer, const std::filesystem::path& mock_fixture = {});

/// Interleaved replay stream. Text posts name one of `places`; gps posts carry a
/// device coordinate inside `box`.
std::vector<ingest::RawPost> replay_posts(const ReplayOptions& options, std::span<const std::string> places,
                                          const geo::BoundingBox& box = geo::kDohaBox);

}  // namespace ground::synth
