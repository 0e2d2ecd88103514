#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eventstruct/corpus.hpp"
#include "eventstruct/interval.hpp"

namespace eventstruct {

// ordinal: Krippendorff's cumulative-margin distance.
// ordinal_rank: squared difference of the level indices.
enum class AlphaMetric { nominal, ordinal, ordinal_rank };
std::string to_string(AlphaMetric m);
AlphaMetric parse_metric(const std::string& s);

// Sparse items x annotators table. Values are category indices or 0-based
// ordinal levels.
class ReliabilityMatrix {
 public:
  struct Cell {
    int item = 0;
    int annotator = 0;
    int value = 0;
    std::optional<double> confidence;
  };

  // categories = size of the response space (0 leaves it unchecked).
  explicit ReliabilityMatrix(int categories = 0) : categories_(categories) {}

  void add(const std::string& item, const std::string& annotator, int value,
           std::optional<double> confidence = std::nullopt);

  int categories() const { return categories_; }
  const std::vector<std::string>& items() const { return items_; }
  const std::vector<std::string>& annotators() const { return annotators_; }
  const std::vector<Cell>& cells() const { return cells_; }
  bool empty() const { return cells_.empty(); }

  // Values per item, items in insertion order.
  std::vector<std::vector<int>> units() const;
  // Items holding at least two values.
  int pairable_items() const;

  // Cells whose confidence exceeds the threshold (all cells need one).
  ReliabilityMatrix above(double threshold) const;
  ReliabilityMatrix with_annotators(const std::vector<std::string>& keep) const;
  // Cells of `other` appended (items and annotators matched by name).
  ReliabilityMatrix merged(const ReliabilityMatrix& other) const;

  // One property's annotations; items are "document/element". Confidences
  // are ridit scores when present.
  static ReliabilityMatrix from_corpus(const Corpus& corpus, const Schema& schema, const std::string& property);

 private:
  int categories_ = 0;
  std::vector<std::string> items_;
  std::vector<std::string> annotators_;
  std::vector<Cell> cells_;
  std::map<std::string, int, std::less<>> item_index_;
  std::map<std::string, int, std::less<>> annotator_index_;
  std::set<std::pair<int, int>> filled_;
};

// Throws UndefinedAgreement when fewer than two items are pairable or the
// expected disagreement is zero.
double krippendorff_alpha(const ReliabilityMatrix& data, AlphaMetric metric);
// Same computation on raw units (values per item).
double krippendorff_alpha(const std::vector<std::vector<int>>& units, AlphaMetric metric);
std::optional<double> try_alpha(const ReliabilityMatrix& data, AlphaMetric metric);

// Percentile interval of alpha over item resamples; resamples where alpha is
// undefined are skipped.
Interval bootstrap_alpha_ci(const ReliabilityMatrix& data, AlphaMetric metric, int resamples = 1000,
                            double level = 0.95, std::uint64_t seed = 0, int threads = 1);

struct CurvePoint {
  double threshold = 0.0;
  std::optional<double> alpha;  // empty when undefined
  double coverage = 0.0;        // share of items keeping >= 2 responses
  std::optional<Interval> ci;
};

// Minimum share of items that must stay pairable for a curve point.
inline constexpr double kMinCoverage = 1.0 / 3.0;

// resamples = 0 skips the bootstrap intervals.
std::vector<CurvePoint> thresholded_alpha(const ReliabilityMatrix& data, const std::vector<double>& thresholds,
                                          AlphaMetric metric, int resamples = 0, double level = 0.95,
                                          std::uint64_t seed = 0, int threads = 1);

struct IndividualAlpha {
  std::string annotator;
  std::optional<double> alpha;
};

// For each individual annotator: alpha over the panel plus that annotator.
std::vector<IndividualAlpha> pairwise_alpha_vs_panel(const ReliabilityMatrix& panel,
                                                     const ReliabilityMatrix& individuals, AlphaMetric metric);

}  // namespace eventstruct
