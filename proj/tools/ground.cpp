#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ground/api.hpp"
#include "ground/config.hpp"
#include "ground/experiments.hpp"
#include "ground/pipeline.hpp"
#include "ground/synth.hpp"

namespace fs = std::filesystem;
using namespace ground;
using nlohmann::ordered_json;

namespace {

std::atomic<ingest::PostReader*> g_reader{nullptr};
std::atomic<api::Server*> g_server{nullptr};

void on_signal(int) {
  if (auto* r = g_reader.load()) r->request_stop();
  if (auto* s = g_server.load()) s->stop();
}

void write_json(const fs::path& path, const ordered_json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ordered_json metrics_row(const eval::Metrics& m) { return eval::to_json(m); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geo-grounding of traffic posts: filter, location NER, geocode resolution and retrieval API"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  std::string config_path = "data/config.json";
  app.add_option("-c,--config", config_path, "Configuration file");

  // run
  auto* run = app.add_subcommand("run", "Process a post stream into the store");
  std::string source;
  std::string models_dir, gazetteer_path, store_path, stats_path, clock_mode = "wall", clock_start = "2015-10-10T00:00:00Z";
  bool follow = false;
  run->add_option("--source", source, "Record file, directory, or - for stdin")->required();
  run->add_option("--models", models_dir, "Directory with filter.model.json and ner.model.json");
  run->add_option("--gazetteer", gazetteer_path, "Gazetteer file (overrides config)");
  run->add_option("--store", store_path, "Store log file (overrides config)");
  run->add_option("--stats", stats_path, "Where to write run statistics (overrides config)");
  run->add_flag("--follow", follow, "Keep reading appended records until interrupted");
  run->add_option("--clock", clock_mode, "wall or replay (deterministic processed_at)")->check(CLI::IsMember({"wall", "replay"}));
  run->add_option("--clock-start", clock_start, "Start instant of the replay clock");

  // train-filter
  auto* train_filter = app.add_subcommand("train-filter", "Train the Max-Ent content filter");
  std::string corpus_path, out_path;
  double lambda = 0.1;
  int max_iters = 500;
  train_filter->add_option("--corpus", corpus_path, "Labeled JSON-lines corpus")->required();
  train_filter->add_option("--out", out_path, "Model output path")->required();
  train_filter->add_option("--lambda", lambda, "L2 strength");
  train_filter->add_option("--max-iters", max_iters, "Optimizer iteration cap");

  // train-ner
  auto* train_ner = app.add_subcommand("train-ner", "Train the CRF location tagger");
  bool no_pos = false;
  train_ner->add_option("--corpus", corpus_path, "Column corpus (token TAB label)")->required();
  train_ner->add_option("--out", out_path, "Model output path")->required();
  train_ner->add_option("--lambda", lambda, "L2 strength");
  train_ner->add_option("--max-iters", max_iters, "Optimizer iteration cap");
  train_ner->add_flag("--no-pos", no_pos, "Drop the POS feature template");

  // eval-filter
  auto* eval_filter = app.add_subcommand("eval-filter", "Cross-validate keyword vs Max-Ent filtering");
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  std::string json_out;
  eval_filter->add_option("--corpus", corpus_path, "Labeled JSON-lines corpus")->required();
  eval_filter->add_option("--folds", folds, "Number of folds");
  eval_filter->add_option("--seed", seed, "Shuffle seed");
  eval_filter->add_option("--lambda", lambda, "L2 strength");
  eval_filter->add_option("--json", json_out, "Also write a machine-readable report here");

  // eval-ner
  auto* eval_ner = app.add_subcommand("eval-ner", "Cross-validate gazetteer vs CRF tagging (with and without POS)");
  eval_ner->add_option("--corpus", corpus_path, "Column corpus (token TAB label)")->required();
  eval_ner->add_option("--folds", folds, "Number of folds");
  eval_ner->add_option("--seed", seed, "Shuffle seed");
  eval_ner->add_option("--lambda", lambda, "L2 strength");
  eval_ner->add_option("--json", json_out, "Also write a machine-readable report here");

  // resolve
  auto* resolve_cmd = app.add_subcommand("resolve", "Resolve one location name and print the grounding");
  std::string name;
  resolve_cmd->add_option("name", name, "Location name")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the retrieval API");
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--store", store_path, "Store log file (overrides config)");
  serve->add_option("--stats", stats_path, "Run statistics file (overrides config)");
  serve->add_option("--static", static_dir, "Directory of static assets to mount at /");

  // gazetteer
  auto* gaz_cmd = app.add_subcommand("gazetteer", "Validate a gazetteer file and print a summary");
  std::string gaz_file;
  gaz_cmd->add_option("file", gaz_file, "Gazetteer file")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic corpora and replay fixtures");
  std::string kind;
  std::size_t size = 0;
  std::string mock_fixture;
  synth_cmd->add_option("kind", kind, "filter | ner | replay")->required()->check(CLI::IsMember({"filter", "ner", "replay"}));
  synth_cmd->add_option("--out", out_path, "Output path")->required();
  synth_cmd->add_option("--size", size, "Number of examples (0 keeps the default)");
  synth_cmd->add_option("--seed", seed, "Generator seed");
  synth_cmd->add_option("--mock-fixture", mock_fixture, "Also draw replay places from this geocoder fixture");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("ground"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    auto cfg = config::load(config_path);

    if (*run) {
      if (!models_dir.empty()) cfg.models = models_dir;
      if (!gazetteer_path.empty()) cfg.gazetteer = gazetteer_path;
      if (!store_path.empty()) cfg.store = store_path;
      if (!stats_path.empty()) cfg.stats = stats_path;
      if (cfg.store.empty()) throw ConfigError("no store path configured");
      auto res = pipeline::load_resources(cfg);
      if (clock_mode == "replay") {
        const auto start = parse_rfc3339(clock_start);
        if (!start) throw ConfigError("bad --clock-start");
        res.clock = pipeline::replay_clock(*start);
      }
      const pipeline::Processor processor(std::move(res));
      store::LogStore store(cfg.store);
      ingest::PostReader reader(source, follow);
      g_reader = &reader;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      pipeline::RunOptions opts;
      opts.queue_capacity = cfg.queue_capacity;
      const auto stats = pipeline::run_stream(reader, processor, store, opts);
      g_reader = nullptr;
      if (!cfg.stats.empty()) write_json(cfg.stats, stats.to_json());
      std::cout << stats.to_json().dump(2) << '\n';
      return 0;
    }

    if (*train_filter) {
      const auto corpus = maxent::load_labeled_corpus(corpus_path);
      const auto simplifier = cfg.simplifier.empty() ? text::Simplifier{} : text::Simplifier::load(cfg.simplifier);
      maxent::TrainConfig tc;
      tc.l2_lambda = lambda;
      tc.max_iters = max_iters;
      tc.ngram_max = cfg.ngram_max;
      maxent::TrainStats st;
      const auto model = maxent::train_maxent(maxent::to_examples(corpus, simplifier, tc.ngram_max), tc, &st);
      if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
      maxent::save_model(model, out_path);
      spdlog::info("trained on {} examples, {} features, {} iterations, objective {:.6f}{}", corpus.size(),
                   model.vocabulary_size(), st.optimizer.iterations, st.optimizer.value,
                   st.optimizer.converged ? "" : " (not converged)");
      return 0;
    }

    if (*train_ner) {
      const auto corpus = ner::load_column_corpus(corpus_path);
      const auto gz = gaz::load_gazetteer(cfg.gazetteer, cfg.resolver.bbox).gazetteer;
      const auto lexicon = cfg.pos_lexicon.empty() ? text::PosLexicon{} : text::load_pos_lexicon(cfg.pos_lexicon);
      ner::TrainConfig tc;
      tc.l2_lambda = lambda;
      tc.max_iters = max_iters;
      tc.use_pos = !no_pos;
      ner::TrainStats st;
      const auto model = ner::train_crf(corpus, gz, lexicon, tc, &st);
      if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
      ner::save_model(model, out_path);
      spdlog::info("trained on {} sequences, {} features, {} iterations, objective {:.6f}{}", corpus.size(),
                   model.vocabulary_size(), st.optimizer.iterations, st.optimizer.value,
                   st.optimizer.converged ? "" : " (not converged)");
      return 0;
    }

    if (*eval_filter) {
      const auto corpus = maxent::load_labeled_corpus(corpus_path);
      const auto keywords = ingest::KeywordList::load(cfg.keywords);
      const auto simplifier = cfg.simplifier.empty() ? text::Simplifier{} : text::Simplifier::load(cfg.simplifier);
      maxent::TrainConfig tc;
      tc.l2_lambda = lambda;
      tc.ngram_max = cfg.ngram_max;
      const auto r = experiments::compare_filters(corpus, keywords, simplifier, tc, folds, seed, cfg.filter_threshold);
      std::cout << folds << "-fold cross-validation, " << corpus.size() << " examples\n"
                << eval::format_table({{"Keyword-based", r.keyword.mean}, {"Max-Ent", r.maxent.mean}});
      if (!json_out.empty()) {
        write_json(json_out, {{"folds", folds},
                              {"examples", corpus.size()},
                              {"keyword", metrics_row(r.keyword.mean)},
                              {"maxent", metrics_row(r.maxent.mean)}});
      }
      return 0;
    }

    if (*eval_ner) {
      const auto corpus = ner::load_column_corpus(corpus_path);
      const auto gz = gaz::load_gazetteer(cfg.gazetteer, cfg.resolver.bbox).gazetteer;
      const auto lexicon = cfg.pos_lexicon.empty() ? text::PosLexicon{} : text::load_pos_lexicon(cfg.pos_lexicon);
      ner::TrainConfig tc;
      tc.l2_lambda = lambda;
      const auto r = experiments::compare_ner(corpus, gz, lexicon, tc, folds, seed);
      std::cout << "Word-level, " << folds << "-fold cross-validation, " << corpus.size() << " sequences\n"
                << eval::format_table({{"Gazetteer", r.gazetteer.micro},
                                       {"CRF", r.crf_pos.micro},
                                       {"CRF (no POS)", r.crf_no_pos.micro}})
                << "\nSpan-level (diagnostic)\n"
                << eval::format_table({{"Gazetteer", r.gazetteer_spans},
                                       {"CRF", r.crf_pos_spans},
                                       {"CRF (no POS)", r.crf_no_pos_spans}});
      if (!json_out.empty()) {
        const auto per_type = [](const eval::NerReport& rep) {
          ordered_json j;
          for (const auto& [t, m] : rep.per_type) j[t] = eval::to_json(m);
          return j;
        };
        write_json(json_out, {{"folds", folds},
                              {"sequences", corpus.size()},
                              {"gazetteer", {{"micro", metrics_row(r.gazetteer.micro)}, {"per_type", per_type(r.gazetteer)}}},
                              {"crf", {{"micro", metrics_row(r.crf_pos.micro)}, {"per_type", per_type(r.crf_pos)}}},
                              {"crf_no_pos", {{"micro", metrics_row(r.crf_no_pos.micro)}, {"per_type", per_type(r.crf_no_pos)}}}});
      }
      return 0;
    }

    if (*resolve_cmd) {
      auto gz = std::make_shared<const gaz::Gazetteer>(gaz::load_gazetteer(cfg.gazetteer, cfg.resolver.bbox).gazetteer);
      geocode::Resolver resolver(gz, config::make_clients(cfg), cfg.resolver);
      std::cout << geocode::serialize_grounding(resolver.resolve(name)).dump(2) << '\n';
      return 0;
    }

    if (*serve) {
      if (!store_path.empty()) cfg.store = store_path;
      if (!stats_path.empty()) cfg.stats = stats_path;
      if (cfg.store.empty()) throw ConfigError("no store path configured");
      auto store = std::make_shared<store::LogStore>(cfg.store);
      std::optional<fs::path> mount;
      if (!static_dir.empty()) mount = static_dir;
      api::Server server(store, api::stats_file_source(cfg.stats), mount);
      const int bound = server.bind(host, port);
      if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("serving {} posts on http://{}:{}", store->size(), host, bound);
      server.serve();
      g_server = nullptr;
      return 0;
    }

    if (*gaz_cmd) {
      const auto loaded = gaz::load_gazetteer(gaz_file, cfg.resolver.bbox);
      std::size_t loc = 0, lmk = 0, with_coord = 0;
      for (const auto& e : loaded.gazetteer.entries()) {
        (e.kind == gaz::EntityKind::Location ? loc : lmk) += 1;
        if (e.coordinate) ++with_coord;
      }
      std::cout << loaded.gazetteer.size() << " entries (" << loc << " locations, " << lmk << " landmarks), "
                << loaded.gazetteer.aliases().size() << " distinct aliases, " << with_coord << " with coordinates, "
                << loaded.warnings.size() << " warnings\n";
      return loaded.warnings.empty() ? 0 : 2;
    }

    if (*synth_cmd) {
      const auto gz = gaz::load_gazetteer(cfg.gazetteer, cfg.resolver.bbox).gazetteer;
      if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
      if (kind == "filter") {
        synth::FilterCorpusOptions o;
        if (size) o.size = size;
        if (app.get_subcommand("synth")->count("--seed")) o.seed = seed;
        const auto corpus = synth::filter_corpus(o, synth::replay_places(gz));
        maxent::save_labeled_corpus(corpus, out_path);
      } else if (kind == "ner") {
        synth::NerCorpusOptions o;
        if (size) o.size = size;
        if (app.get_subcommand("synth")->count("--seed")) o.seed = seed;
        ner::save_column_corpus(synth::ner_corpus(o, gz), out_path);
      } else {
        synth::ReplayOptions o;
        if (size) {
          o.gps = std::max<std::size_t>(1, size / 40);
          o.off_topic = size / 8;
          o.no_keyword = size / 10;
          o.text_groundable = size - o.gps - o.off_topic - o.no_keyword;
        }
        if (app.get_subcommand("synth")->count("--seed")) o.seed = seed;
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot write " + out_path);
        for (const auto& p : synth::replay_posts(o, synth::replay_places(gz, mock_fixture), cfg.resolver.bbox)) {
          out << ingest::serialize_post(p) << '\n';
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
