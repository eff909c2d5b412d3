#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ground/crf.hpp"
#include "ground/evaluation.hpp"
#include "ground/ingest.hpp"
#include "ground/maxent.hpp"

// The two filter/NER comparisons reported by `ground eval-filter` and
// `ground eval-ner`.
namespace ground::experiments {

struct FilterComparison {
  eval::CvResult keyword;  // "relevant" iff the keyword filter fires
  eval::CvResult maxent;
};

/// k-fold cross-validation of the keyword filter and the Max-Ent classifier on
/// the same folds.
FilterComparison compare_filters(std::span<const maxent::LabeledText> corpus, const ingest::KeywordList& keywords,
                                 const text::Simplifier& simplifier, const maxent::TrainConfig& config, std::size_t k,
                                 std::uint64_t seed, double threshold = 0.5);

struct NerComparison {
  eval::NerReport gazetteer;
  eval::NerReport crf_pos;
  eval::NerReport crf_no_pos;
  eval::Metrics gazetteer_spans;
  eval::Metrics crf_pos_spans;
  eval::Metrics crf_no_pos_spans;
};

/// Every sequence is tagged once by a CRF trained on the other folds; the
/// pooled predictions are scored against gold. The gazetteer baseline needs no
/// training and tags every sequence directly.
NerComparison compare_ner(std::span<const ner::AnnotatedSequence> corpus, const gaz::Gazetteer& gazetteer,
                          const text::PosLexicon& lexicon, const ner::TrainConfig& config, std::size_t k,
                          std::uint64_t seed);

}  // namespace ground::experiments
