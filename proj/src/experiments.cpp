#include "ground/experiments.hpp"

namespace ground::experiments {

FilterComparison compare_filters(std::span<const maxent::LabeledText> corpus, const ingest::KeywordList& keywords,
                                 const text::Simplifier& simplifier, const maxent::TrainConfig& config, std::size_t k,
                                 std::uint64_t seed, double threshold) {
  FilterComparison out;
  out.keyword = eval::kfold_cv(corpus, k, seed, [&](const auto&, const std::vector<maxent::LabeledText>& test) {
    std::vector<bool> pred, gold;
    for (const auto& t : test) {
      ingest::RawPost p;
      p.text = t.text;
      pred.push_back(ingest::keyword_match(p, keywords).matched);
      gold.push_back(t.relevant);
    }
    return eval::classification_metrics(pred, gold);
  });
  out.maxent = eval::kfold_cv(corpus, k, seed,
                              [&](const std::vector<maxent::LabeledText>& train, const std::vector<maxent::LabeledText>& test) {
                                const auto model = maxent::train_maxent(
                                    maxent::to_examples(train, simplifier, config.ngram_max), config);
                                std::vector<bool> pred, gold;
                                for (const auto& t : test) {
                                  const auto x = maxent::featurize(t.text, t.has_media, simplifier, config.ngram_max);
                                  pred.push_back(maxent::classify(model, x, threshold));
                                  gold.push_back(t.relevant);
                                }
                                return eval::classification_metrics(pred, gold);
                              });
  return out;
}

NerComparison compare_ner(std::span<const ner::AnnotatedSequence> corpus, const gaz::Gazetteer& gazetteer,
                          const text::PosLexicon& lexicon, const ner::TrainConfig& config, std::size_t k,
                          std::uint64_t seed) {
  if (k < 2 || corpus.size() < k) throw Error("compare_ner: need k >= 2 and at least k sequences");
  const ner::LabelSet labels;
  const auto folds = eval::fold_assignment(corpus.size(), k, seed);

  std::vector<std::vector<std::size_t>> gold, gaz_pred, pos_pred(corpus.size()), nopos_pred(corpus.size());
  for (const auto& s : corpus) {
    gold.push_back(s.labels);
    gaz_pred.push_back(ner::gazetteer_tag(s.tokens, gazetteer, labels));
  }

  for (const bool use_pos : {true, false}) {
    auto cfg = config;
    cfg.use_pos = use_pos;
    auto& pred = use_pos ? pos_pred : nopos_pred;
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<ner::AnnotatedSequence> train;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (folds[i] != f) train.push_back(corpus[i]);
      }
      const auto model = ner::train_crf(train, gazetteer, lexicon, cfg);
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (folds[i] == f) pred[i] = ner::tag(model, corpus[i].tokens, gazetteer, lexicon);
      }
    }
  }

  NerComparison out;
  out.gazetteer = eval::word_level_ner_metrics(gaz_pred, gold, labels);
  out.crf_pos = eval::word_level_ner_metrics(pos_pred, gold, labels);
  out.crf_no_pos = eval::word_level_ner_metrics(nopos_pred, gold, labels);
  out.gazetteer_spans = eval::span_level_ner_metrics(gaz_pred, gold, labels);
  out.crf_pos_spans = eval::span_level_ner_metrics(pos_pred, gold, labels);
  out.crf_no_pos_spans = eval::span_level_ner_metrics(nopos_pred, gold, labels);
  return out;
}

}  // namespace ground::experiments
