#include "eventstruct/learning.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "eventstruct/errors.hpp"
#include "eventstruct/parallel.hpp"
#include "eventstruct/random.hpp"

namespace eventstruct {

void FitConfig::validate() const {
  if (window < 1) throw ArgumentError("fit: window must be >= 1");
  if (max_em_iters < 0) throw ArgumentError("fit: max EM iterations must be >= 0");
  if (!(learning_rate > 0.0)) throw ArgumentError("fit: Adam step size must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ArgumentError("fit: Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ArgumentError("fit: Adam epsilon must be > 0");
  if (m_step_iters < 0) throw ArgumentError("fit: M-step iterations must be >= 0");
  if (!(m_step_tol >= 0.0)) throw ArgumentError("fit: M-step tolerance must be >= 0");
  if (bp.max_iters < 1 || !(bp.tol > 0.0) || !(bp.damping >= 0.0 && bp.damping < 1.0))
    throw ArgumentError("fit: invalid BP options");
  if (!(init_sd >= 0.0)) throw ArgumentError("fit: init sd must be >= 0");
  if (threads < 1) throw ArgumentError("fit: threads must be >= 1");
  if (restarts < 1) throw ArgumentError("fit: restarts must be >= 1");
}

GraphOptions FitConfig::graph_options(bool weighted) const {
  GraphOptions o;
  o.window = window;
  o.confidence_weighting = weighted;
  o.relations = relations;
  return o;
}

std::string to_string(StopReason r) { return r == StopReason::dev_decrease ? "dev-decrease" : "max-iters"; }

std::vector<DocumentLayout> layout_corpus(const Corpus& corpus, const ModelParams& params,
                                          const GraphOptions& options, int threads) {
  std::vector<DocumentLayout> out(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) { out[i] = layout_document(corpus[i], params, options); });
  return out;
}

std::vector<PosteriorSet> e_step(const std::vector<DocumentLayout>& layouts, const ModelParams& params,
                                 const FitConfig& config) {
  std::vector<PosteriorSet> out(layouts.size());
  parallel_for(layouts.size(), config.threads,
               [&](std::size_t i) { out[i] = loopy_bp(instantiate(layouts[i], params), config.bp); });
  return out;
}

std::vector<PosteriorSet> e_step(const Corpus& corpus, const ModelParams& params, const FitConfig& config) {
  return e_step(layout_corpus(corpus, params, config.graph_options(config.confidence_weighting), config.threads),
                params, config);
}

// ---------------------------------------------------------------------------

namespace {

// Ordinal objective with cutpoints computed once per annotator slot; stats
// are ordered by slot, so each slot's entries are contiguous.
double ordinal_objective(const PropertyObjective& obj, const PropertyParams& p, std::vector<double>* g_mu,
                         std::vector<double>* g_shared, std::vector<double>* g_rho) {
  const int rd = p.rho_dim();
  const int nc = p.layout.count - 1;
  std::vector<double> dc(nc), acc(nc);
  double f = 0.0;
  const auto& st = obj.stats;
  for (std::size_t b = 0; b < st.size();) {
    const int slot = st[b].first.first;
    std::size_t e = b;
    while (e < st.size() && st[e].first.first == slot) ++e;
    const auto c = p.cutpoints(slot);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = b; i < e; ++i) {
      const int level = st[i].first.second + 1;
      const auto& w = st[i].second;
      for (int t = 0; t < p.types; ++t) {
        if (w[t] == 0.0) continue;
        const double mu = p.mu_of(t)[0];
        if (!g_mu) {
          f += w[t] * ordinal_loglik(mu, c, level);
          continue;
        }
        double dmu = 0.0;
        f += w[t] * ordinal_loglik(mu, c, level, &dmu, dc);
        (*g_mu)[t] += w[t] * dmu;
        for (int k = 0; k < nc; ++k) acc[k] += w[t] * dc[k];
      }
    }
    if (g_mu) {
      std::span<double> gr;
      if (slot >= 0) gr = std::span<double>(g_rho->data() + static_cast<std::size_t>(slot) * rd, rd);
      p.cutpoint_grad(slot, acc, 1.0, *g_shared, gr);
    }
    b = e;
  }
  return f;
}

}  // namespace

double PropertyObjective::value(const PropertyParams& p, bool with_prior) const {
  double f = 0.0;
  if (p.layout.kind == ResponseKind::ordinal && !p.layout.gated) {
    f = ordinal_objective(*this, p, nullptr, nullptr, nullptr);
  } else {
    for (const auto& [key, w] : stats)
      for (int t = 0; t < p.types; ++t)
        if (w[t] != 0.0) f += w[t] * p.loglik(t, key.first, key.second);
  }
  if (with_prior) f += p.rho_log_prior();
  return f;
}

double PropertyObjective::value_grad(const PropertyParams& p, bool with_prior, std::vector<double>& g_mu,
                                     std::vector<double>& g_shared, std::vector<double>& g_rho) const {
  g_mu.assign(p.mu.size(), 0.0);
  g_shared.assign(p.shared.size(), 0.0);
  g_rho.assign(p.rho.size(), 0.0);
  const int md = p.mu_dim(), rd = p.rho_dim();
  double f = 0.0;
  if (p.layout.kind == ResponseKind::ordinal && !p.layout.gated) {
    f = ordinal_objective(*this, p, &g_mu, &g_shared, &g_rho);
  } else {
    for (const auto& [key, w] : stats) {
      const int slot = key.first;
      std::span<double> gr;
      if (slot >= 0) gr = std::span<double>(g_rho.data() + static_cast<std::size_t>(slot) * rd, rd);
      for (int t = 0; t < p.types; ++t) {
        if (w[t] == 0.0) continue;
        std::span<double> gm(g_mu.data() + static_cast<std::size_t>(t) * md, md);
        f += w[t] * p.loglik_grad(t, slot, key.second, w[t], gm, g_shared, gr);
      }
    }
  }
  if (with_prior) f += p.rho_log_prior(g_rho);
  return f;
}

std::vector<PropertyObjective> property_objectives(const std::vector<DocumentLayout>& layouts,
                                                   const std::vector<PosteriorSet>& posteriors,
                                                   const ModelParams& params) {
  if (layouts.size() != posteriors.size()) throw ArgumentError("m_step: posteriors are not aligned with the corpus");
  std::vector<std::map<std::pair<int, int>, std::vector<double>>> acc(params.properties.size());
  for (std::size_t d = 0; d < layouts.size(); ++d) {
    const auto& lay = layouts[d];
    const auto& post = posteriors[d];
    if (post.marginals.size() != lay.variables.size())
      throw ArgumentError("m_step: posterior set for '" + lay.document + "' does not match its graph");
    for (std::size_t v = 0; v < lay.variables.size(); ++v) {
      const auto& probs = post.marginals[v].probs;
      for (const auto& o : lay.variables[v].observations) {
        auto& w = acc[o.property][{o.slot, o.code}];
        if (w.empty()) w.assign(probs.size(), 0.0);
        for (std::size_t t = 0; t < probs.size(); ++t) w[t] += o.weight * probs[t];
      }
    }
  }
  std::vector<PropertyObjective> out(acc.size());
  for (std::size_t p = 0; p < acc.size(); ++p)
    for (auto& [k, w] : acc[p]) out[p].stats.emplace_back(k, std::move(w));
  return out;
}

namespace {

struct Packed {
  bool with_rho;
  std::size_t size(const PropertyParams& p) const {
    return p.mu.size() + p.shared.size() + (with_rho ? p.rho.size() : 0);
  }
  void pack(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c,
            std::vector<double>& out) const {
    out.clear();
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    if (with_rho) out.insert(out.end(), c.begin(), c.end());
  }
  void unpack(const std::vector<double>& x, PropertyParams& p) const {
    std::size_t i = 0;
    for (auto& v : p.mu) v = x[i++];
    for (auto& v : p.shared) v = x[i++];
    if (with_rho)
      for (auto& v : p.rho) v = x[i++];
  }
};

// Adam ascent that only accepts steps which do not lower the objective,
// halving the step size on rejection and regrowing it after acceptance.
void optimize_property(PropertyParams& p, const PropertyObjective& obj, const FitConfig& cfg,
                       std::vector<double>* trace) {
  const Packed pk{cfg.estimate_rho};
  std::vector<double> gm, gs, gr, g, x;
  double f = obj.value_grad(p, true, gm, gs, gr);
  if (!std::isfinite(f)) throw NumericalError("M-step: non-finite objective for property '" + p.name + "'");
  if (trace) trace->push_back(f);
  pk.pack(gm, gs, gr, g);
  pk.pack(p.mu, p.shared, p.rho, x);
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0), v(n, 0.0), dir(n), cand(n);
  double lr = cfg.learning_rate;
  PropertyParams q = p;
  double b1t = 1.0, b2t = 1.0;
  for (int it = 0; it < cfg.m_step_iters; ++it) {
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    double gnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      dir[i] = (m[i] / (1 - b1t)) / (std::sqrt(v[i] / (1 - b2t)) + cfg.epsilon);
      gnorm = std::max(gnorm, std::abs(g[i]));
    }
    if (gnorm == 0.0) break;
    bool accepted = false;
    double fq = f;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      for (std::size_t i = 0; i < n; ++i) cand[i] = x[i] + lr * dir[i];
      pk.unpack(cand, q);
      fq = obj.value(q, true);
      if (std::isfinite(fq) && fq >= f) {
        accepted = true;
      } else {
        lr *= 0.5;
      }
    }
    if (!accepted) break;
    x.swap(cand);
    p = q;
    const double gain = fq - f;
    f = obj.value_grad(p, true, gm, gs, gr);
    pk.pack(gm, gs, gr, g);
    if (trace) trace->push_back(f);
    if (gain < cfg.m_step_tol * std::max(1.0, std::abs(f))) break;
    lr = std::min(cfg.learning_rate, 2.0 * lr);
  }
  pk.unpack(x, p);
  if (cfg.estimate_rho && cfg.update_sigma && !p.annotators.empty()) p.update_sigma();
}

// Replaces each row of a conditional table with normalized expected counts;
// rows without mass keep their previous values.
void normalize_rows(std::vector<double>& table, const std::vector<double>& counts, int width) {
  for (std::size_t start = 0; start < table.size(); start += width) {
    double s = 0.0;
    for (int i = 0; i < width; ++i) s += counts[start + i];
    if (!(s > 0.0)) continue;
    for (int i = 0; i < width; ++i) table[start + i] = counts[start + i] / s;
  }
}

void update_priors(const std::vector<DocumentLayout>& layouts, const std::vector<PosteriorSet>& posteriors,
                   ModelParams& params) {
  const auto& inv = params.inventory;
  auto& pri = params.priors;
  std::vector<double> ev(pri.event.size(), 0.0), en(pri.entity.size(), 0.0), role(pri.role.size(), 0.0);
  std::array<std::vector<double>, 3> rel;
  for (int b = 0; b < 3; ++b) rel[b].assign(pri.relation[b].size(), 0.0);
  for (std::size_t d = 0; d < layouts.size(); ++d) {
    const auto& lay = layouts[d];
    const auto& post = posteriors[d];
    for (std::size_t v = 0; v < lay.variables.size(); ++v) {
      const auto& probs = post.marginals[v].probs;
      if (lay.variables[v].kind == Group::event)
        for (std::size_t t = 0; t < probs.size(); ++t) ev[t] += probs[t];
      if (lay.variables[v].kind == Group::entity)
        for (std::size_t t = 0; t < probs.size(); ++t) en[t] += probs[t];
    }
    if (post.factor_beliefs.size() != lay.factors.size())
      throw ArgumentError("m_step: factor beliefs for '" + lay.document + "' do not match its graph");
    for (std::size_t f = 0; f < lay.factors.size(); ++f) {
      auto& target = lay.factors[f].kind == FactorKind::role_prior ? role : rel[static_cast<int>(lay.factors[f].block)];
      const auto& b = post.factor_beliefs[f];
      for (std::size_t i = 0; i < b.size(); ++i) target[i] += b[i];
    }
  }
  normalize_rows(pri.event, ev, inv.event);
  normalize_rows(pri.entity, en, inv.entity);
  normalize_rows(pri.role, role, inv.role);
  for (int b = 0; b < 3; ++b) normalize_rows(pri.relation[b], rel[b], inv.relation);
}

}  // namespace

ModelParams m_step(const std::vector<DocumentLayout>& layouts, const std::vector<PosteriorSet>& posteriors,
                   const ModelParams& params, const FitConfig& config, MStepTrace* trace) {
  const auto objectives = property_objectives(layouts, posteriors, params);
  ModelParams out = params;
  if (trace) trace->objective.assign(params.properties.size(), {});
  // Properties are independent given the posteriors.
  parallel_for(out.properties.size(), config.threads, [&](std::size_t i) {
    optimize_property(out.properties[i], objectives[i], config, trace ? &trace->objective[i] : nullptr);
  });
  if (config.update_priors) update_priors(layouts, posteriors, out);
  return out;
}

ModelParams m_step(const Corpus& corpus, const std::vector<PosteriorSet>& posteriors, const ModelParams& params,
                   const FitConfig& config, MStepTrace* trace) {
  return m_step(layout_corpus(corpus, params, config.graph_options(config.confidence_weighting), config.threads),
                posteriors, params, config, trace);
}

// ---------------------------------------------------------------------------

FitResult fit_from(const Corpus& train, const Corpus& dev, ModelParams init, const FitConfig& config,
                   const FitProgress& progress) {
  config.validate();
  if (train.empty()) throw ArgumentError("fit: training corpus is empty");
  const auto train_layouts =
      layout_corpus(train, init, config.graph_options(config.confidence_weighting), config.threads);
  const auto dev_layouts = layout_corpus(
      dev, init, config.graph_options(config.confidence_weighting && config.weight_dev_evidence), config.threads);

  FitResult result;
  ModelParams params = std::move(init);
  ModelParams prev_params;
  std::vector<PosteriorSet> prev_posts;
  for (int it = 0;; ++it) {
    auto posts = e_step(train_layouts, params, config);
    double train_ev = params.rho_log_prior();
    for (const auto& p : posts) train_ev += p.evidence;
    double dev_ev = 0.0;
    for (const auto& p : e_step(dev_layouts, params, config)) dev_ev += p.evidence;
    result.train_evidence.push_back(train_ev);
    result.dev_evidence.push_back(dev_ev);
    if (progress) progress(it, train_ev, dev_ev);

    if (it > 0 && dev_ev < result.dev_evidence[it - 1]) {
      result.params = std::move(prev_params);
      result.posteriors = std::move(prev_posts);
      result.stopped_reason = StopReason::dev_decrease;
      result.iterations = it - 1;
      return result;
    }
    if (it == config.max_em_iters) {
      result.params = std::move(params);
      result.posteriors = std::move(posts);
      result.stopped_reason = StopReason::max_iters;
      result.iterations = it;
      return result;
    }
    auto next = m_step(train_layouts, posts, params, config);
    prev_params = std::move(params);
    prev_posts = std::move(posts);
    params = std::move(next);
  }
}

FitResult fit(const Corpus& train, const Corpus& dev, const Schema& schema, const TypeInventory& inventory,
              const FitConfig& config, const FitProgress& progress) {
  config.validate();
  if (train.empty()) throw ArgumentError("fit: training corpus is empty");
  std::optional<FitResult> best;
  for (int r = 0; r < config.restarts; ++r) {
    const std::uint64_t seed = r == 0 ? config.seed : derive_seed(config.seed, {0x7265u, static_cast<std::uint64_t>(r)});
    auto res = fit_from(train, dev, initialize_params(schema, inventory, train, seed, config.init_sd), config, progress);
    res.restart = r;
    if (!best || res.train_evidence[res.iterations] > best->train_evidence[best->iterations]) best = std::move(res);
  }
  return std::move(*best);
}

std::vector<int> map_types(const PosteriorSet& posteriors) {
  std::vector<int> out;
  out.reserve(posteriors.marginals.size());
  for (const auto& m : posteriors.marginals)
    out.push_back(static_cast<int>(std::max_element(m.probs.begin(), m.probs.end()) - m.probs.begin()));
  return out;
}

}  // namespace eventstruct
