#include "eventstruct/agreement.hpp"

#include <algorithm>
#include <cmath>

#include "eventstruct/errors.hpp"
#include "eventstruct/likelihoods.hpp"
#include "eventstruct/parallel.hpp"
#include "eventstruct/random.hpp"

namespace eventstruct {

std::string to_string(AlphaMetric m) {
  switch (m) {
    case AlphaMetric::nominal: return "nominal";
    case AlphaMetric::ordinal: return "ordinal";
    case AlphaMetric::ordinal_rank: return "ordinal-rank";
  }
  return "nominal";
}

AlphaMetric parse_metric(const std::string& s) {
  if (s == "nominal") return AlphaMetric::nominal;
  if (s == "ordinal") return AlphaMetric::ordinal;
  if (s == "ordinal-rank") return AlphaMetric::ordinal_rank;
  throw ArgumentError("unknown agreement metric '" + s + "' (nominal, ordinal, ordinal-rank)");
}

void ReliabilityMatrix::add(const std::string& item, const std::string& annotator, int value,
                            std::optional<double> confidence) {
  if (value < 0 || (categories_ > 0 && value >= categories_))
    throw ArgumentError("reliability matrix: response " + std::to_string(value) + " of '" + annotator + "' on '" +
                        item + "' is outside the response space");
  auto [ii, new_item] = item_index_.try_emplace(item, static_cast<int>(items_.size()));
  if (new_item) items_.push_back(item);
  auto [ai, new_ann] = annotator_index_.try_emplace(annotator, static_cast<int>(annotators_.size()));
  if (new_ann) annotators_.push_back(annotator);
  if (!filled_.insert({ii->second, ai->second}).second)
    throw ArgumentError("reliability matrix: duplicate response of '" + annotator + "' on '" + item + "'");
  cells_.push_back({ii->second, ai->second, value, confidence});
}

std::vector<std::vector<int>> ReliabilityMatrix::units() const {
  std::vector<std::vector<int>> out(items_.size());
  for (const auto& c : cells_) out[c.item].push_back(c.value);
  return out;
}

int ReliabilityMatrix::pairable_items() const {
  int n = 0;
  for (const auto& u : units()) n += u.size() >= 2;
  return n;
}

ReliabilityMatrix ReliabilityMatrix::above(double threshold) const {
  ReliabilityMatrix out(categories_);
  out.items_ = items_;
  out.item_index_ = item_index_;
  for (const auto& c : cells_) {
    if (!c.confidence) throw ArgumentError("reliability matrix: confidence filtering needs a confidence on every cell");
    if (*c.confidence > threshold) out.add(items_[c.item], annotators_[c.annotator], c.value, c.confidence);
  }
  return out;
}

ReliabilityMatrix ReliabilityMatrix::with_annotators(const std::vector<std::string>& keep) const {
  const std::set<std::string, std::less<>> k(keep.begin(), keep.end());
  ReliabilityMatrix out(categories_);
  for (const auto& c : cells_)
    if (k.count(annotators_[c.annotator])) out.add(items_[c.item], annotators_[c.annotator], c.value, c.confidence);
  return out;
}

ReliabilityMatrix ReliabilityMatrix::merged(const ReliabilityMatrix& other) const {
  ReliabilityMatrix out = *this;
  out.categories_ = std::max(categories_, other.categories_);
  for (const auto& c : other.cells_) out.add(other.items_[c.item], other.annotators_[c.annotator], c.value, c.confidence);
  return out;
}

ReliabilityMatrix ReliabilityMatrix::from_corpus(const Corpus& corpus, const Schema& schema, const std::string& property) {
  const auto& spec = schema.at(schema.index_of(property));
  if (spec.response.kind == ResponseKind::temporal)
    throw ArgumentError("agreement: temporal property '" + property + "' has no nominal or ordinal scale");
  ReliabilityMatrix out(spec.response.count);
  for (const auto& d : corpus)
    for (const auto& a : d.annotations)
      if (a.property == property)
        out.add(d.id + "/" + a.element, a.annotator, encode_outcome(spec, a.value), a.ridit_confidence);
  return out;
}

double krippendorff_alpha(const std::vector<std::vector<int>>& units, AlphaMetric metric) {
  std::vector<int> values;
  int pairable = 0;
  for (const auto& u : units)
    if (u.size() >= 2) {
      ++pairable;
      values.insert(values.end(), u.begin(), u.end());
    }
  if (pairable < 2) throw UndefinedAgreement("alpha is undefined: fewer than two items with two or more responses");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t V = values.size();
  auto index = [&](int v) { return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin()); };

  // Coincidence matrix.
  std::vector<double> o(V * V, 0.0);
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    const double w = 1.0 / (static_cast<double>(u.size()) - 1.0);
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = 0; j < u.size(); ++j)
        if (i != j) o[index(u[i]) * V + index(u[j])] += w;
  }
  std::vector<double> nc(V, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < V; ++c) {
    for (std::size_t k = 0; k < V; ++k) nc[c] += o[c * V + k];
    n += nc[c];
  }
  std::vector<double> cum(V + 1, 0.0);
  for (std::size_t c = 0; c < V; ++c) cum[c + 1] = cum[c] + nc[c];
  auto delta2 = [&](std::size_t c, std::size_t k) -> double {
    if (c == k) return 0.0;
    switch (metric) {
      case AlphaMetric::nominal: return 1.0;
      case AlphaMetric::ordinal: {
        const std::size_t lo = std::min(c, k), hi = std::max(c, k);
        const double d = cum[hi + 1] - cum[lo] - 0.5 * (nc[lo] + nc[hi]);
        return d * d;
      }
      case AlphaMetric::ordinal_rank: {
        const double d = static_cast<double>(values[c]) - static_cast<double>(values[k]);
        return d * d;
      }
    }
    return 1.0;
  };
  double d_o = 0.0, d_e = 0.0;
  for (std::size_t c = 0; c < V; ++c)
    for (std::size_t k = 0; k < V; ++k) {
      const double d = delta2(c, k);
      d_o += o[c * V + k] * d;
      d_e += nc[c] * nc[k] * d;
    }
  d_o /= n;
  d_e /= n * (n - 1.0);
  if (!(d_e > 0.0)) throw UndefinedAgreement("alpha is undefined: no variation among pairable responses");
  return 1.0 - d_o / d_e;
}

double krippendorff_alpha(const ReliabilityMatrix& data, AlphaMetric metric) {
  return krippendorff_alpha(data.units(), metric);
}

std::optional<double> try_alpha(const ReliabilityMatrix& data, AlphaMetric metric) {
  try {
    return krippendorff_alpha(data, metric);
  } catch (const UndefinedAgreement&) {
    return std::nullopt;
  }
}

namespace {

Interval bootstrap_units(const std::vector<std::vector<int>>& units, AlphaMetric metric, int resamples, double level,
                         std::uint64_t seed, int threads) {
  if (resamples < 1) throw ArgumentError("bootstrap: resamples must be >= 1");
  if (units.empty()) throw UndefinedAgreement("alpha is undefined: no items");
  std::vector<std::optional<double>> draws(resamples);
  parallel_for(draws.size(), threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    std::vector<std::vector<int>> sample;
    sample.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) sample.push_back(units[uniform_index(rng, units.size())]);
    try {
      draws[r] = krippendorff_alpha(sample, metric);
    } catch (const UndefinedAgreement&) {
    }
  });
  std::vector<double> ok;
  for (const auto& d : draws)
    if (d) ok.push_back(*d);
  if (ok.empty()) throw UndefinedAgreement("alpha is undefined on every bootstrap resample");
  return percentile_interval(ok, level);
}

}  // namespace

Interval bootstrap_alpha_ci(const ReliabilityMatrix& data, AlphaMetric metric, int resamples, double level,
                            std::uint64_t seed, int threads) {
  return bootstrap_units(data.units(), metric, resamples, level, seed, threads);
}

std::vector<CurvePoint> thresholded_alpha(const ReliabilityMatrix& data, const std::vector<double>& thresholds,
                                          AlphaMetric metric, int resamples, double level, std::uint64_t seed,
                                          int threads) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] < 1.0)) throw ArgumentError("thresholds must lie in [0, 1)");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw ArgumentError("thresholds must be increasing");
  }
  std::vector<CurvePoint> out(thresholds.size());
  const double items = static_cast<double>(data.items().size());
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const auto kept = data.above(thresholds[i]);
    auto& pt = out[i];
    pt.threshold = thresholds[i];
    pt.coverage = items > 0 ? kept.pairable_items() / items : 0.0;
    if (pt.coverage < kMinCoverage) continue;
    pt.alpha = try_alpha(kept, metric);
    if (pt.alpha && resamples > 0) {
      try {
        pt.ci = bootstrap_units(kept.units(), metric, resamples, level, derive_seed(seed, {i}), threads);
      } catch (const UndefinedAgreement&) {
      }
    }
  }
  return out;
}

std::vector<IndividualAlpha> pairwise_alpha_vs_panel(const ReliabilityMatrix& panel,
                                                     const ReliabilityMatrix& individuals, AlphaMetric metric) {
  if (panel.annotators().size() < 2) throw ArgumentError("agreement: the panel needs at least two annotators");
  for (const auto& a : individuals.annotators())
    if (std::find(panel.annotators().begin(), panel.annotators().end(), a) != panel.annotators().end())
      throw ArgumentError("agreement: annotator '" + a + "' is both in the panel and an individual");
  std::vector<IndividualAlpha> out;
  for (const auto& a : individuals.annotators())
    out.push_back({a, try_alpha(panel.merged(individuals.with_annotators({a})), metric)});
  return out;
}

}  // namespace eventstruct
