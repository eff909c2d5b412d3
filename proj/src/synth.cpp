#include "ground/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "ground/timeutil.hpp"
#include "ground/util.hpp"

namespace ground::synth {

namespace {

template <class C>
const auto& pick(std::mt19937_64& rng, const C& items) {
  std::uniform_int_distribution<std::size_t> d(0, std::size(items) - 1);
  return items[d(rng)];
}

bool chance(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::string fill(std::string pattern, const std::string& place) {
  const auto at = pattern.find("{P}");
  if (at != std::string::npos) pattern.replace(at, 3, place);
  return pattern;
}

constexpr std::array kIncidentCore{
    "accident on {P}",
    "car crash near {P}",
    "huge traffic jam on {P}",
    "road closed at {P}",
    "heavy congestion around {P}",
    "broken down truck blocking {P}",
    "flooding on {P} after the rain",
    "roadworks slowing traffic at {P}",
    "police diverting traffic near {P}",
    "thick fog on {P} , drive carefully",
    "collision at {P} , two lanes blocked",
    "signal not working at {P} , traffic backed up",
    "ambulance heading to a crash at {P}",
    "lane closure on {P} causing a long queue",
};

constexpr std::array kIncidentPrefix{"", "", "", "Avoid the area:", "Warning:", "Right now", "Heads up,", "Update:"};

constexpr std::array kIncidentSuffix{"",
                                     "",
                                     "avoid the area",
                                     "expect delays",
                                     "stuck for 20 minutes",
                                     "#DohaTraffic",
                                     "#QatarTraffic",
                                     "take another route",
                                     "still not moving",
                                     "drive safe"};

constexpr std::array kOffTopic{
    "I love jam on toast",
    "strawberry jam and toast for breakfast",
    "homemade apricot jam is the best thing ever",
    "jam session with the band tonight",
    "Pearl Jam on repeat all day",
    "traffic in this city is always terrible",
    "why is traffic so bad every single day",
    "I hate traffic so much",
    "road rage is a real problem here",
    "ministry announces new road safety campaign",
    "study says traffic accidents fell last year",
    "new highway project approved for next year",
    "article on how rain affects road design",
    "my brain is a traffic jam today",
    "crash course in statistics starts tomorrow",
    "my laptop had a crash again",
    "weekend road trip playlist ideas?",
    "love the sound of rain at night",
    "get car accident insurance quotes today",
    "best deals on tyres before the rain season",
    "watching a movie about a plane crash",
    "the fog in London looks beautiful in photos",
    "reading about traffic lights history , fascinating",
    "my cat caused a traffic jam in the kitchen",
    "nothing beats coffee and jam in the morning",
};

constexpr std::array kOffTopicWithPlace{
    "traffic around {P} is always terrible",
    "remember when {P} had no traffic at all",
    "new road plan for {P} announced by the ministry",
    "I love the breakfast place near {P} , their jam is amazing",
    "throwback to the rain at {P} last winter",
};

constexpr std::array kOffTopicSuffix{"", "", "", "lol", "😂", "#mood", "#life", "so true", "anyone else?"};

// Entity slots are {LOC} and {LMK}; tokens are separated by single spaces.
constexpr std::array kNerTemplates{
    "Accident on {LOC} near {LMK}",
    "Huge traffic jam on {LOC} right now",
    "Road closed between {LOC} and {LOC}",
    "Avoid {LOC} , crash blocking two lanes",
    "Heavy congestion at {LOC} heading to {LMK}",
    "stuck at {LOC} for 30 minutes",
    "Police diverting traffic from {LOC} to {LOC}",
    "Flooding near {LMK} after the rain",
    "Roadworks on {LOC} opposite {LMK}",
    "{LOC} completely blocked this morning",
    "Traffic moving slowly around {LMK}",
    "Broken down truck on {LOC} near the {LMK}",
    "No accidents reported today , roads are clear",
    "Signal not working at {LOC} , expect delays",
    "Queue from {LMK} all the way to {LOC}",
    "Thanks to the police at {LOC} for the quick help",
    "crash at {LOC} , ambulance on the way",
    "Fog is thick this morning , drive carefully",
    "Parking at {LMK} is full again",
    "Long delays on {LOC} because of roadworks",
    "Car crash near {LMK} #DohaTraffic",
    "Road closed at {LOC} #QatarTraffic",
    "@moi_qatar accident on {LOC} , please send help",
};

constexpr std::array kUnseenStems{
    "Umm Lekhba",   "Al Jasra",     "Fereej Kulaib", "Al Nuaija",   "Bin Omran",        "Al Hilal",
    "Al Mirqab",    "Najma",        "Al Mansoura",   "Rawdat Al Khail", "Abu Hamour",   "Al Luqta",
    "Al Gharrafa",  "Muaither",     "Al Thumama",    "Umm Ghuwailina", "Al Aziziya",    "Al Markhiya",
    "Duhail",       "Onaiza",       "Al Kharaitiyat", "Izghawa",     "Al Maamoura",      "Fereej Al Ali",
};

constexpr std::array kLocationSuffix{"Street", "Road", "Roundabout", "Interchange", "Intersection"};
constexpr std::array kLandmarkSuffix{"Mall", "Hospital", "Tower", "Park", "Stadium", "School", "Hotel", "Market"};

struct Slot {
  std::vector<std::string> words;
  gaz::EntityKind kind;
};

}  // namespace

std::string incident_report(std::mt19937_64& rng, const std::string& place) {
  std::string core = fill(pick(rng, kIncidentCore), place);
  std::string prefix = pick(rng, kIncidentPrefix);
  if (prefix.empty() && !core.empty()) core[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(core[0])));
  std::string out = prefix.empty() ? core : prefix + " " + core;
  const std::string suffix = pick(rng, kIncidentSuffix);
  if (!suffix.empty()) out += (suffix.front() == '#' ? " " : " , ") + suffix;
  return out;
}

std::string off_topic_post(std::mt19937_64& rng, const std::string& place) {
  std::string out = chance(rng, 0.2) ? fill(pick(rng, kOffTopicWithPlace), place) : std::string(pick(rng, kOffTopic));
  const std::string suffix = pick(rng, kOffTopicSuffix);
  if (!suffix.empty()) out += " " + suffix;
  return out;
}

std::vector<maxent::LabeledText> filter_corpus(const FilterCorpusOptions& options, std::span<const std::string> places) {
  if (places.empty()) throw Error("filter_corpus: no place names");
  if (options.positive_rate < 0 || options.positive_rate > 1) throw Error("filter_corpus: positive_rate outside [0, 1]");
  std::mt19937_64 rng(options.seed);
  const auto positives = static_cast<std::size_t>(std::llround(static_cast<double>(options.size) * options.positive_rate));
  std::vector<maxent::LabeledText> out;
  out.reserve(options.size);
  for (std::size_t i = 0; i < options.size; ++i) {
    const bool relevant = i < positives;
    const auto& place = pick(rng, places);
    maxent::LabeledText ex;
    ex.text = relevant ? incident_report(rng, place) : off_topic_post(rng, place);
    ex.has_media = chance(rng, relevant ? 0.35 : 0.15);
    ex.relevant = chance(rng, options.label_noise) ? !relevant : relevant;
    out.push_back(std::move(ex));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::string inject_typo(std::mt19937_64& rng, const std::string& word) {
  if (word.size() < 3) return word;
  for (unsigned char c : word) {
    if (c >= 0x80) return word;
  }
  std::string out = word;
  std::uniform_int_distribution<std::size_t> pos(0, word.size() - 1);
  std::uniform_int_distribution<int> letter('a', 'z');
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0:
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos(rng)), static_cast<char>(letter(rng)));
      break;
    case 1:
      out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos(rng)));
      break;
    case 2: {
      const auto p = pos(rng);
      char c = static_cast<char>(letter(rng));
      if (c == out[p]) c = c == 'z' ? 'a' : static_cast<char>(c + 1);
      out[p] = c;
      break;
    }
    default: {
      const auto p = std::uniform_int_distribution<std::size_t>(0, word.size() - 2)(rng);
      if (out[p] == out[p + 1]) {
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(p));
      } else {
        std::swap(out[p], out[p + 1]);
      }
      break;
    }
  }
  return out;
}

std::vector<ner::AnnotatedSequence> ner_corpus(const NerCorpusOptions& options, const gaz::Gazetteer& gazetteer) {
  std::vector<std::string> known_loc, known_lmk;
  for (const auto& e : gazetteer.entries()) {
    for (const auto& a : e.aliases) (e.kind == gaz::EntityKind::Location ? known_loc : known_lmk).push_back(a);
  }
  if (known_loc.empty() || known_lmk.empty()) throw Error("ner_corpus: gazetteer needs both locations and landmarks");

  const ner::LabelSet labels;
  std::mt19937_64 rng(options.seed);
  std::vector<ner::AnnotatedSequence> out;
  out.reserve(options.size);

  const auto make_slot = [&](gaz::EntityKind kind) {
    std::string name;
    if (chance(rng, options.unseen_rate)) {
      const std::string stem = pick(rng, kUnseenStems);
      name = stem + " " + (kind == gaz::EntityKind::Location ? std::string(pick(rng, kLocationSuffix))
                                                             : std::string(pick(rng, kLandmarkSuffix)));
    } else {
      name = kind == gaz::EntityKind::Location ? pick(rng, known_loc) : pick(rng, known_lmk);
    }
    Slot s{{}, kind};
    for (const auto& tok : text::tokenize(name)) s.words.push_back(tok.surface);
    return s;
  };

  for (std::size_t i = 0; i < options.size; ++i) {
    const std::string pattern = pick(rng, kNerTemplates);
    std::vector<std::string> words;
    std::vector<std::size_t> tags;
    for (const auto& piece : split(pattern, ' ')) {
      if (piece == "{LOC}" || piece == "{LMK}") {
        const auto kind = piece == "{LOC}" ? gaz::EntityKind::Location : gaz::EntityKind::Landmark;
        const auto slot = make_slot(kind);
        const auto type = ner::entity_type(kind);
        for (std::size_t w = 0; w < slot.words.size(); ++w) {
          words.push_back(slot.words[w]);
          tags.push_back(w == 0 ? *labels.begin_of(type) : *labels.inside_of(type));
        }
      } else {
        words.push_back(piece);
        tags.push_back(labels.outside());
      }
    }
    const bool lower = chance(rng, options.lowercase_rate);
    for (auto& w : words) {
      if (lower) w = casefold(w);
      if (chance(rng, options.typo_rate)) w = inject_typo(rng, w);
    }
    ner::AnnotatedSequence seq;
    seq.id = "synth-" + std::to_string(i + 1);
    seq.tokens = text::tokens_from_surfaces(words);
    seq.labels = std::move(tags);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<ingest::RawPost> replay_posts(const ReplayOptions& options, std::span<const std::string> places,
                                          const geo::BoundingBox& box) {
  if (places.empty()) throw Error("replay_posts: no place names");
  const auto start = parse_rfc3339(options.start);
  if (!start) throw Error("replay_posts: bad start time '" + options.start + "'");

  enum class Kind { Text, Gps, OffTopic, NoKeyword };
  std::vector<Kind> kinds;
  kinds.insert(kinds.end(), options.text_groundable, Kind::Text);
  kinds.insert(kinds.end(), options.gps, Kind::Gps);
  kinds.insert(kinds.end(), options.off_topic, Kind::OffTopic);
  kinds.insert(kinds.end(), options.no_keyword, Kind::NoKeyword);
  std::mt19937_64 rng(options.seed);
  std::shuffle(kinds.begin(), kinds.end(), rng);

  constexpr std::array kChatter{"good morning everyone", "what a beautiful sunset today", "new phone who dis",
                                "cannot wait for the weekend", "best karak in town"};
  const double lat_margin = (box.max_lat - box.min_lat) * 0.1;
  const double lon_margin = (box.max_lon - box.min_lon) * 0.1;
  std::uniform_real_distribution<double> lat(box.min_lat + lat_margin, box.max_lat - lat_margin);
  std::uniform_real_distribution<double> lon(box.min_lon + lon_margin, box.max_lon - lon_margin);

  std::vector<ingest::RawPost> out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    ingest::RawPost p;
    char id[32];
    std::snprintf(id, sizeof id, "p%04zu", i + 1);
    p.id = id;
    p.created_at = *start + std::chrono::seconds(97 * static_cast<long long>(i));
    p.language = "en";
    const auto& place = pick(rng, places);
    switch (kinds[i]) {
      case Kind::Text:
        p.text = incident_report(rng, place);
        break;
      case Kind::Gps:
        p.text = incident_report(rng, place);
        p.gps = LatLon{std::round(lat(rng) * 1e5) / 1e5, std::round(lon(rng) * 1e5) / 1e5};
        break;
      case Kind::OffTopic:
        p.text = off_topic_post(rng, place);
        break;
      case Kind::NoKeyword:
        p.text = pick(rng, kChatter);
        break;
    }
    p.has_media = chance(rng, 0.3);
    for (const auto& tok : text::tokenize(p.text)) {
      if (tok.kind == text::TokenKind::Hashtag) p.hashtags.push_back(tok.surface.substr(1));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> replay_places(const gaz::Gazetteer& gazetteer, const std::filesystem::path& mock_fixture) {
  std::vector<std::string> out;
  for (const auto& e : gazetteer.entries()) {
    if (e.coordinate) out.push_back(e.canonical);
  }
  if (!mock_fixture.empty()) {
    std::set<std::string> seen;
    for (const auto& row : geocode::MockGeocoder::load_fixture(mock_fixture)) {
      if (seen.insert(row.query).second) out.push_back(row.query);
    }
  }
  return out;
}

}  // namespace ground::synth
