#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eventstruct/corpus.hpp"
#include "eventstruct/factorgraph.hpp"
#include "eventstruct/model.hpp"

namespace eventstruct {

// Gate probability below which a conditional property is reported N/A.
inline constexpr double kNotApplicableThreshold = 0.25;

struct TypeSummary {
  struct Table {
    Group group = Group::event;
    int types = 0;
    std::vector<std::string> properties;  // binary properties of the group, schema order
    // [type][property]: P(true) at zero annotator offset, empty when N/A.
    std::vector<std::vector<std::optional<double>>> probability;
    std::vector<std::vector<double>> applicability;
  };
  std::vector<Table> tables;  // groups with at least one binary property
};

// Conditional properties report P(true | applies); the cell is N/A when the
// gate probability for the branch is below na_threshold.
TypeSummary summarize_types(const ModelParams& params, double na_threshold = kNotApplicableThreshold);
// Same, after checking the checkpoint against an expected schema.
TypeSummary summarize_types(const ModelParams& params, const Schema& schema,
                            double na_threshold = kNotApplicableThreshold);

// Wide: one row per (group, type). Long: group, type, property, value.
std::string format_summary(const TypeSummary& s);
std::string format_summary_long(const TypeSummary& s);

struct Confusion {
  Group group = Group::event;
  // Row-normalized expected co-assignment; columns are B's types reordered
  // by `alignment` (column i shows B-type alignment[i]).
  std::vector<std::vector<double>> matrix;
  std::vector<int> alignment;
  double elements = 0;
};

// Soft counts sum_e pA_e(i) pB_e(j); B's labels are matched to A's by greedy
// maximum overlap. Rows with no mass are uniform.
Confusion confusion(const std::vector<PosteriorSet>& a, const std::vector<PosteriorSet>& b, Group group);
std::string format_confusion(const Confusion& c);

struct EntropyStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t elements = 0;
};

// Entropy of each marginal divided by log K (0 when K = 1).
EntropyStats entropy_stats(const std::vector<PosteriorSet>& posteriors, Group group);

struct FeatureTable {
  struct Row {
    std::string document;
    std::string element;  // semantics edge (argument rows) or predicate
    std::string predicate;
    std::string argument;  // empty on predicate rows
    std::vector<double> values;
    bool empty_pool = false;
  };
  std::vector<std::string> columns;  // names of `values`
  std::vector<Row> rows;
};

struct FeatureExport {
  // [event; role; entity; max(other role; other entity); mean(other role; other entity)]
  FeatureTable arguments;
  // [event; max(role; entity); mean(role; entity)] over the predicate's arguments
  FeatureTable predicates;
};

// Empty pools are filled with zeros and flagged.
FeatureExport export_features(const Corpus& corpus, const std::vector<PosteriorSet>& posteriors,
                              const TypeInventory& inventory);
std::string format_features(const FeatureTable& t);

}  // namespace eventstruct
