#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eventstruct/corpus.hpp"
#include "eventstruct/model.hpp"

namespace eventstruct {

struct SynthConfig {
  Schema schema = default_schema();
  TypeInventory inventory{3, 2, 2, 2};
  int documents = 10;
  int sentences = 3;                 // per document
  int predicates = 2;                // per sentence
  int arguments = 1;                 // per predicate
  double eventive_probability = 0.2;
  int annotator_pool = 8;
  int annotators_per_item = 3;
  int window = 2;
  // Fraction of window pairs that surface as annotated document edges.
  double relation_rate = 1.0;
  std::uint64_t seed = 1;

  // Truth-parameter generation.
  double separation = 4.0;  // logit gap between contrasting types
  double rho_sd = 0.3;      // annotator intercept scale
  double prior_concentration = 1.0;  // role/relation tables: softmax(N(0, c^2))

  // Raw confidence: a constant level, or per-record draws from level_weights.
  int confidence_level = kConfidenceLevels;
  std::optional<std::array<double, kConfidenceLevels>> level_weights;

  void validate() const;
};

struct SynthTruth {
  std::map<std::string, int> labels;  // element id -> latent type
  // Tallies kept while sampling, for cross-checking corpus_stats.
  std::int64_t predicates = 0;
  std::int64_t arguments = 0;
  std::int64_t semantics_edges = 0;
  std::int64_t document_edges = 0;
  std::int64_t annotations = 0;
};

struct SynthResult {
  Corpus corpus;
  SynthTruth truth;
  ModelParams params;
};

// Ground-truth parameters: per-type means with contrasting types at least
// `separation` logits apart on several properties.
ModelParams make_truth_params(const SynthConfig& config);

// The returned corpus is ridit-scored.
SynthResult sample_corpus(const SynthConfig& config);
// Samples with caller-provided parameters (annotator ids must be "a00".."aNN").
SynthResult sample_corpus(const SynthConfig& config, const ModelParams& params);

std::vector<std::string> synth_annotators(int pool);

struct CorpusStats {
  struct Row {
    std::string group;
    std::string property;
    std::string category;
    std::int64_t count = 0;
    double percent = 0.0;  // of the property's records
  };
  std::int64_t documents = 0;
  std::int64_t sentences = 0;
  std::int64_t predicates = 0;
  std::int64_t arguments = 0;
  std::int64_t semantics_edges = 0;
  std::int64_t document_edges = 0;
  std::int64_t annotations = 0;
  std::vector<Row> rows;
};

CorpusStats corpus_stats(const Corpus& corpus, const Schema& schema);
// One "group property category  count (pct%)" line per category, counts with
// thousands separators.
std::string format_stats(const CorpusStats& stats);

}  // namespace eventstruct
