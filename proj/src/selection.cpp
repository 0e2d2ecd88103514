#include "eventstruct/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "eventstruct/errors.hpp"
#include "eventstruct/parallel.hpp"
#include "eventstruct/random.hpp"

namespace eventstruct {

namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Log-likelihood of every (property, annotator slot, outcome) for every
// component; items only look values up.
class LoglikTable {
 public:
  explicit LoglikTable(const ModelParams& params) : params_(params), k_(params.inventory.count(params.schema.at(0).group())) {
    for (const auto& p : params.properties) {
      const auto codes = p.layout.outcome_codes();
      const int hi = *std::max_element(codes.begin(), codes.end());
      Block b;
      b.code_index.assign(hi + 2, -1);
      for (std::size_t c = 0; c < codes.size(); ++c) b.code_index[codes[c] + 1] = static_cast<int>(c);
      b.codes = static_cast<int>(codes.size());
      const int slots = static_cast<int>(p.annotators.size()) + 1;
      b.values.resize(static_cast<std::size_t>(slots) * b.codes * k_);
      for (int s = -1; s + 1 < slots; ++s)
        for (std::size_t c = 0; c < codes.size(); ++c)
          for (int t = 0; t < k_; ++t)
            b.values[((static_cast<std::size_t>(s + 1) * b.codes) + c) * k_ + t] = p.loglik(t, s, codes[c]);
      blocks_.push_back(std::move(b));
    }
  }

  // Unnormalized log posterior over components for one item.
  std::vector<double> scores(const std::vector<double>& weights, const MixtureItem& item) const {
    std::vector<double> out(k_);
    for (int t = 0; t < k_; ++t) out[t] = std::log(weights[t]);
    for (const auto& r : item.records) {
      const auto& b = blocks_[r.property];
      const int s = params_.property(r.property).slot(r.annotator);
      const int c = r.code + 1 < static_cast<int>(b.code_index.size()) && r.code >= -1 ? b.code_index[r.code + 1] : -1;
      if (c < 0) throw ArgumentError("mixture: invalid outcome code for '" + params_.property(r.property).name + "'");
      const double* v = b.values.data() + ((static_cast<std::size_t>(s + 1) * b.codes) + c) * k_;
      for (int t = 0; t < k_; ++t) out[t] += r.weight * v[t];
    }
    return out;
  }

 private:
  struct Block {
    std::vector<int> code_index;  // code + 1 -> row
    int codes = 0;
    std::vector<double> values;  // [slot + 1][code row][component]
  };
  const ModelParams& params_;
  int k_;
  std::vector<Block> blocks_;
};

ModelParams init_mixture(const Schema& sub, Group group, int k, const std::vector<MixtureItem>& train,
                         std::uint64_t seed, double init_sd) {
  std::vector<std::set<std::string>> seen(sub.size());
  for (const auto& it : train)
    for (const auto& r : it.records) seen[r.property].insert(r.annotator);
  ModelParams m;
  m.schema = sub;
  m.inventory.count(group) = k;
  m.priors = PriorParams::uniform(m.inventory);
  Rng rng(derive_seed(seed, {0x1417}));
  for (std::size_t i = 0; i < sub.size(); ++i) {
    auto names = seen[i];
    if (const auto& g = sub.at(i).gate) {
      const auto& parent = seen[sub.index_of(g->parent)];
      names.insert(parent.begin(), parent.end());
    }
    PropertyParams p(sub.at(i).name, FamilyLayout::of(sub.at(i)), k, {names.begin(), names.end()});
    for (auto& v : p.mu) v = init_sd * standard_normal(rng);
    m.properties.push_back(std::move(p));
  }
  return m;
}

MixtureFit run_mixture(const std::vector<MixtureItem>& train, const Schema& sub, Group group, int k,
                       const MixtureConfig& config, std::uint64_t seed) {
  MixtureFit fit;
  fit.group = group;
  fit.k = k;
  fit.weights.assign(k, 1.0 / k);
  fit.params = init_mixture(sub, group, k, train, seed, config.fit.init_sd);

  // Observations are resolved against the annotator slots once.
  DocumentLayout layout;
  layout.document = "mixture";
  for (const auto& it : train) {
    LayoutVariable v;
    v.kind = group;
    v.element = it.element;
    for (const auto& r : it.records)
      v.observations.push_back({r.property, fit.params.property(r.property).slot(r.annotator), r.code, r.weight});
    layout.variables.push_back(std::move(v));
  }
  const std::vector<DocumentLayout> layouts{layout};

  FitConfig mcfg = config.fit;
  mcfg.update_priors = false;
  mcfg.threads = 1;
  double prev = 0.0;
  for (int it = 0;; ++it) {
    PosteriorSet post;
    post.document = layout.document;
    double obj = fit.params.rho_log_prior();
    std::vector<double> mass(k, 0.0);
    const LoglikTable table(fit.params);
    for (const auto& item : train) {
      auto s = table.scores(fit.weights, item);
      const double ev = log_sum_exp(s);
      obj += ev;
      for (int t = 0; t < k; ++t) {
        s[t] = std::exp(s[t] - ev);
        mass[t] += s[t];
      }
      post.marginals.push_back({group, item.element, std::move(s)});
    }
    if (!std::isfinite(obj)) throw NumericalError("mixture: non-finite objective at K = " + std::to_string(k));
    fit.objective = obj;
    fit.iterations = it;
    if (it == config.max_em_iters || (it > 0 && obj - prev < config.tol * std::abs(obj))) break;
    prev = obj;
    fit.params = m_step(layouts, {post}, fit.params, mcfg);
    double total = 0.0;
    for (double m : mass) total += m;
    if (total > 0.0)
      for (int t = 0; t < k; ++t) fit.weights[t] = mass[t] / total;
  }
  return fit;
}

}  // namespace

Interval percentile_interval(std::vector<double>& values, double level) {
  if (values.empty()) throw ArgumentError("percentile interval of an empty sample");
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double alpha = 1.0 - level;
  return {q(alpha / 2), q(1.0 - alpha / 2)};
}

Schema group_schema(const Schema& schema, Group group) {
  std::vector<PropertySpec> props;
  for (std::size_t i : schema.group_members(group)) props.push_back(schema.at(i));
  return Schema(std::move(props));
}

std::vector<MixtureItem> mixture_items(const Corpus& corpus, const Schema& schema, Group group,
                                       bool confidence_weighting) {
  const auto sub = group_schema(schema, group);
  std::vector<MixtureItem> out;
  for (const auto& d : corpus) {
    std::map<std::string, std::size_t, std::less<>> at;
    for (const auto& a : d.annotations) {
      const auto idx = sub.find(a.property);
      if (!idx) continue;
      auto [it, fresh] = at.try_emplace(a.element, out.size());
      if (fresh) out.push_back({d.id, a.element, {}});
      double w = 1.0;
      if (confidence_weighting) {
        if (!a.ridit_confidence)
          throw ArgumentError("document '" + d.id + "' is not ridit-scored; run ridit scoring first");
        w = *a.ridit_confidence;
      }
      out[it->second].records.push_back(
          {static_cast<int>(*idx), a.annotator, encode_outcome(sub.at(*idx), a.value), w});
    }
  }
  return out;
}

void MixtureConfig::validate() const {
  if (restarts < 1) throw ArgumentError("mixture: restarts must be >= 1");
  if (max_em_iters < 0) throw ArgumentError("mixture: max EM iterations must be >= 0");
  if (!(tol >= 0.0)) throw ArgumentError("mixture: tolerance must be >= 0");
  if (threads < 1) throw ArgumentError("mixture: threads must be >= 1");
  fit.validate();
}

MixtureFit fit_mixture(const std::vector<MixtureItem>& train, const std::vector<MixtureItem>& dev, const Schema& schema,
                       Group group, int k, const MixtureConfig& config) {
  if (k < 1) throw ArgumentError("mixture: K must be >= 1");
  config.validate();
  if (train.empty()) throw ArgumentError("mixture: no training items");
  const auto sub = group_schema(schema, group);
  std::vector<MixtureFit> runs(config.restarts);
  parallel_for(runs.size(), config.threads, [&](std::size_t r) {
    const std::uint64_t seed =
        r == 0 ? config.fit.seed : derive_seed(config.fit.seed, {0x6d6978u, static_cast<std::uint64_t>(r)});
    runs[r] = run_mixture(train, sub, group, k, config, seed);
    runs[r].restart = static_cast<int>(r);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].objective > runs[best].objective) best = r;
  MixtureFit out = std::move(runs[best]);
  out.dev_evidence = mixture_log_evidence(out, dev);
  return out;
}

std::vector<double> mixture_log_evidence(const MixtureFit& fit, const std::vector<MixtureItem>& items) {
  std::vector<double> out;
  out.reserve(items.size());
  const LoglikTable table(fit.params);
  for (const auto& it : items) out.push_back(log_sum_exp(table.scores(fit.weights, it)));
  return out;
}

std::vector<std::vector<double>> mixture_responsibilities(const MixtureFit& fit, const std::vector<MixtureItem>& items) {
  std::vector<std::vector<double>> out;
  const LoglikTable table(fit.params);
  for (const auto& it : items) {
    auto s = table.scores(fit.weights, it);
    const double ev = log_sum_exp(s);
    for (auto& v : s) v = std::exp(v - ev);
    out.push_back(std::move(s));
  }
  return out;
}

Interval bootstrap_diff_ci(const std::vector<double>& a, const std::vector<double>& b, int resamples, double level,
                           std::uint64_t seed, int threads) {
  if (a.size() != b.size()) throw ArgumentError("bootstrap: evidence lists have different lengths");
  if (a.empty()) throw ArgumentError("bootstrap: no items");
  if (resamples < 1000) throw ArgumentError("bootstrap: at least 1000 resamples are required");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("bootstrap: level must lie in (0, 1)");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = b[i] - a[i];
  std::vector<double> means(resamples);
  parallel_for(means.size(), threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += d[uniform_index(rng, n)];
    means[r] = s / static_cast<double>(n);
  });
  return percentile_interval(means, level);
}

int choose_k(const std::vector<int>& candidates, const std::vector<std::vector<double>>& item_evidence,
             const SelectionConfig& config) {
  if (candidates.empty()) throw ArgumentError("select_k: no candidates");
  if (item_evidence.size() != candidates.size()) throw ArgumentError("select_k: evidence table does not match candidates");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool improved = false;
    for (std::size_t j = i + 1; j < candidates.size() && !improved; ++j) {
      const auto ci = bootstrap_diff_ci(item_evidence[i], item_evidence[j], config.resamples, config.level,
                                        derive_seed(config.seed, {i, j}), config.mixture.threads);
      improved = ci.lo > 0.0;
    }
    if (!improved) return candidates[i];
  }
  return candidates.back();
}

SelectionReport select_k(const std::vector<MixtureItem>& train, const std::vector<MixtureItem>& dev,
                         const Schema& schema, Group group, const std::vector<int>& candidates,
                         const SelectionConfig& config) {
  if (candidates.empty()) throw ArgumentError("select_k: no candidates");
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] < 1 || (i > 0 && candidates[i] <= candidates[i - 1]))
      throw ArgumentError("select_k: candidates must be positive and strictly increasing");
  if (dev.empty()) throw ArgumentError("select_k: no dev items");
  SelectionReport rep;
  rep.group = group;
  rep.candidates = candidates;
  for (int k : candidates) {
    auto f = fit_mixture(train, dev, schema, group, k, config.mixture);
    double s = 0.0;
    for (double v : f.dev_evidence) s += v;
    rep.dev_evidence.push_back(s);
    rep.train_objective.push_back(f.objective);
    rep.item_evidence.push_back(std::move(f.dev_evidence));
  }
  rep.chosen = choose_k(candidates, rep.item_evidence, config);
  const auto c = static_cast<std::size_t>(std::find(candidates.begin(), candidates.end(), rep.chosen) - candidates.begin());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    rep.vs_chosen.push_back(bootstrap_diff_ci(rep.item_evidence[c], rep.item_evidence[i], config.resamples,
                                              config.level, derive_seed(config.seed, {c, i}), config.mixture.threads));
  return rep;
}

std::string format_report(const SelectionReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "group\tK\tdev_evidence\ttrain_objective\tci_lo\tci_hi\tchosen\n";
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    out << to_string(r.group) << '\t' << r.candidates[i] << '\t' << r.dev_evidence[i] << '\t' << r.train_objective[i]
        << '\t' << r.vs_chosen[i].lo << '\t' << r.vs_chosen[i].hi << '\t' << (r.candidates[i] == r.chosen ? "*" : "")
        << '\n';
  return out.str();
}

}  // namespace eventstruct
