#include "eventstruct/factorgraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

#include "eventstruct/errors.hpp"

namespace eventstruct {

namespace {

constexpr double kLogFloor = -690.0;  // ~log(1e-300); keeps messages finite

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void normalize_log(std::vector<double>& v) {
  const double z = log_sum_exp(v);
  for (auto& x : v) x = std::max(x - z, kLogFloor);
}

std::vector<double> probs_from_log(const std::vector<double>& v) {
  const double z = log_sum_exp(v);
  std::vector<double> p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = std::exp(v[i] - z);
  return p;
}

}  // namespace

std::vector<RelationPair> relation_pairs(const DocumentGraph& doc, int window) {
  if (window < 1) throw ArgumentError("sentence window must be >= 1");
  struct Queued {
    std::string id;
    bool argument;
  };
  std::deque<std::vector<Queued>> queue;
  std::vector<RelationPair> pairs;
  for (int s = 0; s < static_cast<int>(doc.sentences.size()); ++s) {
    const auto& sent = doc.sentences[s];
    queue.emplace_back();
    if (static_cast<int>(queue.size()) > window) queue.pop_front();
    auto& current = queue.back();
    for (int v = 0; v < static_cast<int>(sent.predicates.size()); ++v) {
      const auto& pid = sent.predicates[v].id;
      current.push_back({pid, false});
      for (int a : doc.arguments_of(s, v)) {
        const auto& arg = sent.arguments[a];
        if (!arg.eventive) continue;
        auto seen = std::find_if(current.begin(), current.end(), [&](const Queued& q) { return q.id == arg.id; });
        if (seen == current.end()) current.push_back({arg.id, true});
      }
      for (const auto& q : queue)
        for (const auto& x : q)
          if (x.id != pid) pairs.push_back({pid, x.id, x.argument});
    }
  }
  return pairs;
}

DocumentLayout layout_document(const DocumentGraph& doc, const ModelParams& params, const GraphOptions& options) {
  const auto& schema = params.schema;
  DocumentLayout layout;
  layout.document = doc.id;
  std::map<std::string, int, std::less<>> var_of;
  auto add_var = [&](Group g, const std::string& element) {
    var_of.emplace(element, static_cast<int>(layout.variables.size()));
    layout.variables.push_back({g, element, {}});
    return static_cast<int>(layout.variables.size()) - 1;
  };

  for (const auto& sent : doc.sentences)
    for (const auto& p : sent.predicates) add_var(Group::event, p.id);
  for (const auto& sent : doc.sentences)
    for (const auto& a : sent.arguments) add_var(Group::entity, a.id);
  for (const auto& sent : doc.sentences) {
    for (const auto& e : sent.edges) {
      const int r = add_var(Group::role, e.id);
      layout.factors.push_back({FactorKind::role_prior, {var_of.at(e.predicate), var_of.at(e.argument), r},
                                RelationBlock::event_event});
    }
  }
  std::map<std::pair<std::string_view, std::string_view>, const DocumentEdge*> edge_of;
  for (const auto& e : doc.doc_edges) {
    edge_of.emplace(std::pair<std::string_view, std::string_view>(e.source, e.target), &e);
    edge_of.emplace(std::pair<std::string_view, std::string_view>(e.target, e.source), &e);
  }
  for (const auto& pair : relation_pairs(doc, options.window)) {
    auto edge = edge_of.find({pair.first, pair.second});
    if (edge == edge_of.end() && options.relations == RelationScope::document_edges) continue;
    const std::string element = edge != edge_of.end() ? edge->second->id : pair.first + "~" + pair.second;
    if (var_of.count(element)) continue;
    const int r = add_var(Group::relation, element);
    layout.factors.push_back({FactorKind::relation_prior,
                              {var_of.at(pair.first), var_of.at(pair.second), r},
                              pair.second_is_argument ? RelationBlock::event_entity : RelationBlock::event_event});
  }

  for (const auto& rec : doc.annotations) {
    const auto pidx = schema.find(rec.property);
    if (!pidx) throw ConstructionError("document '" + doc.id + "': unknown property '" + rec.property + "'");
    const auto& spec = schema.at(*pidx);
    auto it = var_of.find(rec.element);
    if (it == var_of.end())
      throw ConstructionError("document '" + doc.id + "': annotation of '" + rec.property + "' on '" + rec.element +
                              "' has no type variable (outside the sentence window?)");
    auto& var = layout.variables[it->second];
    if (var.kind != spec.group())
      throw ConstructionError("document '" + doc.id + "': property '" + rec.property + "' annotated on a " +
                              to_string(var.kind) + " variable");
    double weight = 1.0;
    if (options.confidence_weighting) {
      if (!rec.ridit_confidence)
        throw ArgumentError("document '" + doc.id + "' is not ridit-scored; run ridit scoring first");
      weight = *rec.ridit_confidence;
    }
    const auto& pp = params.property(*pidx);
    var.observations.push_back({static_cast<int>(*pidx), pp.slot(rec.annotator), encode_outcome(spec, rec.value), weight});
  }
  return layout;
}

double FactorGraph::log_score(const std::vector<int>& x) const {
  double s = 0.0;
  for (std::size_t v = 0; v < variables.size(); ++v)
    s += variables[v].log_prior[x[v]] + variables[v].log_likelihood[x[v]];
  for (const auto& f : factors) {
    const std::size_t idx =
        (static_cast<std::size_t>(x[f.vars[0]]) * f.dims[1] + x[f.vars[1]]) * f.dims[2] + x[f.vars[2]];
    s += std::log(f.potential[idx]);
  }
  return s;
}

FactorGraph instantiate(const DocumentLayout& layout, const ModelParams& params) {
  const auto& inv = params.inventory;
  const auto& pri = params.priors;
  FactorGraph g;
  g.document = layout.document;
  g.variables.reserve(layout.variables.size());
  for (const auto& lv : layout.variables) {
    GraphVariable v;
    v.kind = lv.kind;
    v.element = lv.element;
    v.cardinality = inv.count(lv.kind);
    v.log_prior.assign(v.cardinality, 0.0);
    if (lv.kind == Group::event)
      for (int t = 0; t < v.cardinality; ++t) v.log_prior[t] = std::log(pri.event[t]);
    if (lv.kind == Group::entity)
      for (int t = 0; t < v.cardinality; ++t) v.log_prior[t] = std::log(pri.entity[t]);
    v.log_likelihood.assign(v.cardinality, 0.0);
    for (const auto& o : lv.observations) {
      if (o.weight == 0.0) continue;
      const auto& pp = params.property(o.property);
      for (int t = 0; t < v.cardinality; ++t) v.log_likelihood[t] += o.weight * pp.loglik(t, o.slot, o.code);
    }
    g.variables.push_back(std::move(v));
  }
  for (const auto& lf : layout.factors) {
    GraphFactor f;
    f.kind = lf.kind;
    f.vars = lf.vars;
    for (int s = 0; s < 3; ++s) f.dims[s] = g.variables[lf.vars[s]].cardinality;
    if (lf.kind == FactorKind::role_prior) {
      f.potential = pri.role;
      f.label = "role(" + g.variables[lf.vars[2]].element + ")";
    } else {
      f.potential = pri.relation[static_cast<int>(lf.block)];
      f.label = "relation(" + g.variables[lf.vars[2]].element + ")";
    }
    const int fi = static_cast<int>(g.factors.size());
    for (int s = 0; s < 3; ++s) g.variables[lf.vars[s]].neighbors.emplace_back(fi, s);
    g.factors.push_back(std::move(f));
  }
  return g;
}

FactorGraph build_graph(const DocumentGraph& doc, const ModelParams& params, const GraphOptions& options) {
  return instantiate(layout_document(doc, params, options), params);
}

namespace {

using Messages = std::vector<std::array<std::vector<double>, 3>>;

void compute_var_to_factor(const FactorGraph& g, const Messages& f2v, Messages& v2f) {
  for (const auto& v : g.variables) {
    std::vector<double> total(v.cardinality);
    for (int t = 0; t < v.cardinality; ++t) total[t] = v.log_prior[t] + v.log_likelihood[t];
    for (auto [f, s] : v.neighbors)
      for (int t = 0; t < v.cardinality; ++t) total[t] += f2v[f][s][t];
    for (auto [f, s] : v.neighbors) {
      auto& out = v2f[f][s];
      for (int t = 0; t < v.cardinality; ++t) out[t] = total[t] - f2v[f][s][t];
      normalize_log(out);
    }
  }
}

// Unnormalized factor-to-variable messages for all three slots.
std::array<std::vector<double>, 3> factor_outgoing(const GraphFactor& f, const std::array<std::vector<double>, 3>& in) {
  std::array<std::vector<double>, 3> e;
  for (int s = 0; s < 3; ++s) {
    const double m = *std::max_element(in[s].begin(), in[s].end());
    e[s].resize(f.dims[s]);
    for (int t = 0; t < f.dims[s]; ++t) e[s][t] = std::exp(in[s][t] - m);
  }
  std::array<std::vector<double>, 3> out;
  for (int s = 0; s < 3; ++s) out[s].assign(f.dims[s], 0.0);
  std::size_t idx = 0;
  for (int a = 0; a < f.dims[0]; ++a)
    for (int b = 0; b < f.dims[1]; ++b)
      for (int c = 0; c < f.dims[2]; ++c, ++idx) {
        const double w = f.potential[idx];
        out[0][a] += w * e[1][b] * e[2][c];
        out[1][b] += w * e[0][a] * e[2][c];
        out[2][c] += w * e[0][a] * e[1][b];
      }
  for (auto& o : out)
    for (auto& x : o) x = x > 0.0 ? std::log(x) : kLogFloor;
  return out;
}

}  // namespace

PosteriorSet loopy_bp(const FactorGraph& g, const BpOptions& options) {
  if (!(options.damping >= 0.0 && options.damping < 1.0)) throw ArgumentError("BP damping must lie in [0, 1)");
  const std::size_t F = g.factors.size();
  Messages f2v(F), v2f(F);
  for (std::size_t f = 0; f < F; ++f)
    for (int s = 0; s < 3; ++s) {
      const int d = g.factors[f].dims[s];
      f2v[f][s].assign(d, -std::log(static_cast<double>(d)));
      v2f[f][s].assign(d, -std::log(static_cast<double>(d)));
    }
  for (const auto& v : g.variables)
    for (int t = 0; t < v.cardinality; ++t)
      if (!std::isfinite(v.log_prior[t] + v.log_likelihood[t]) && v.log_prior[t] + v.log_likelihood[t] > 0)
        throw NumericalError("document '" + g.document + "': non-finite potential on '" + v.element + "'");

  PosteriorSet out;
  out.document = g.document;
  out.converged = true;
  out.iterations = 0;
  if (F > 0) {
    out.converged = false;
    for (int it = 1; it <= options.max_iters; ++it) {
      compute_var_to_factor(g, f2v, v2f);
      double delta = 0.0;
      Messages next(F);
      for (std::size_t f = 0; f < F; ++f) {
        auto msgs = factor_outgoing(g.factors[f], v2f[f]);
        for (int s = 0; s < 3; ++s) {
          auto& m = msgs[s];
          normalize_log(m);
          const auto& old = f2v[f][s];
          for (std::size_t t = 0; t < m.size(); ++t) m[t] = (1.0 - options.damping) * m[t] + options.damping * old[t];
          normalize_log(m);
          for (std::size_t t = 0; t < m.size(); ++t) {
            if (!std::isfinite(m[t]))
              throw NumericalError("document '" + g.document + "': non-finite message from factor " +
                                   g.factors[f].label);
            delta = std::max(delta, std::abs(std::exp(m[t]) - std::exp(old[t])));
          }
        }
        next[f] = std::move(msgs);
      }
      f2v = std::move(next);
      out.iterations = it;
      if (delta < options.tol) {
        out.converged = true;
        break;
      }
    }
    compute_var_to_factor(g, f2v, v2f);
  }

  // Beliefs and Bethe free energy.
  double log_z = 0.0;
  out.marginals.reserve(g.variables.size());
  for (const auto& v : g.variables) {
    std::vector<double> total(v.cardinality);
    for (int t = 0; t < v.cardinality; ++t) total[t] = v.log_prior[t] + v.log_likelihood[t];
    for (auto [f, s] : v.neighbors)
      for (int t = 0; t < v.cardinality; ++t) total[t] += f2v[f][s][t];
    auto b = probs_from_log(total);
    const double degree = static_cast<double>(v.neighbors.size());
    for (int t = 0; t < v.cardinality; ++t) {
      if (b[t] <= 0.0) continue;
      log_z += b[t] * (v.log_prior[t] + v.log_likelihood[t]) - (1.0 - degree) * b[t] * std::log(b[t]);
    }
    out.marginals.push_back({v.kind, v.element, std::move(b)});
  }
  out.factor_beliefs.reserve(F);
  for (std::size_t f = 0; f < F; ++f) {
    const auto& fac = g.factors[f];
    std::vector<double> logb(fac.potential.size());
    std::size_t idx = 0;
    for (int a = 0; a < fac.dims[0]; ++a)
      for (int b = 0; b < fac.dims[1]; ++b)
        for (int c = 0; c < fac.dims[2]; ++c, ++idx) {
          const double w = fac.potential[idx];
          logb[idx] = w > 0.0 ? std::log(w) + v2f[f][0][a] + v2f[f][1][b] + v2f[f][2][c]
                              : -std::numeric_limits<double>::infinity();
        }
    auto bel = probs_from_log(logb);
    for (std::size_t i = 0; i < bel.size(); ++i)
      if (bel[i] > 0.0) log_z += bel[i] * (std::log(fac.potential[i]) - std::log(bel[i]));
    out.factor_beliefs.push_back(std::move(bel));
  }
  if (!std::isfinite(log_z)) throw NumericalError("document '" + g.document + "': non-finite Bethe evidence");
  out.evidence = log_z;
  return out;
}

PosteriorSet brute_force(const FactorGraph& g) {
  const std::size_t V = g.variables.size();
  std::uint64_t states = 1;
  for (const auto& v : g.variables) {
    states *= static_cast<std::uint64_t>(v.cardinality);
    if (states > kBruteForceLimit)
      throw CapacityError("document '" + g.document + "': joint state space exceeds 10^7 assignments");
  }

  std::vector<std::vector<double>> marg(V);
  for (std::size_t v = 0; v < V; ++v) marg[v].assign(g.variables[v].cardinality, 0.0);
  std::vector<std::vector<double>> fac(g.factors.size());
  for (std::size_t f = 0; f < g.factors.size(); ++f) fac[f].assign(g.factors[f].potential.size(), 0.0);

  // Running sums are kept relative to the reference score ref.
  double ref = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  std::vector<int> x(V, 0);
  for (std::uint64_t n = 0; n < states; ++n) {
    const double s = g.log_score(x);
    if (s > -std::numeric_limits<double>::infinity()) {
      if (s > ref) {
        const double scale = std::isfinite(ref) ? std::exp(ref - s) : 0.0;
        total *= scale;
        for (auto& m : marg)
          for (auto& p : m) p *= scale;
        for (auto& m : fac)
          for (auto& p : m) p *= scale;
        ref = s;
      }
      const double w = std::exp(s - ref);
      total += w;
      for (std::size_t v = 0; v < V; ++v) marg[v][x[v]] += w;
      for (std::size_t f = 0; f < g.factors.size(); ++f) {
        const auto& fc = g.factors[f];
        fac[f][(static_cast<std::size_t>(x[fc.vars[0]]) * fc.dims[1] + x[fc.vars[1]]) * fc.dims[2] + x[fc.vars[2]]] += w;
      }
    }
    for (std::size_t v = 0; v < V; ++v) {
      if (++x[v] < g.variables[v].cardinality) break;
      x[v] = 0;
    }
  }
  if (!(total > 0.0)) throw NumericalError("document '" + g.document + "': every assignment has zero probability");

  PosteriorSet out;
  out.document = g.document;
  out.evidence = ref + std::log(total);
  for (std::size_t v = 0; v < V; ++v) {
    for (auto& p : marg[v]) p /= total;
    out.marginals.push_back({g.variables[v].kind, g.variables[v].element, std::move(marg[v])});
  }
  for (auto& m : fac) {
    for (auto& p : m) p /= total;
    out.factor_beliefs.push_back(std::move(m));
  }
  return out;
}

PosteriorSet brute_force(const DocumentGraph& doc, const ModelParams& params, const GraphOptions& options) {
  return brute_force(build_graph(doc, params, options));
}

std::string to_dot(const FactorGraph& g, const PosteriorSet* post) {
  std::ostringstream os;
  os << "graph \"" << g.document << "\" {\n";
  for (std::size_t v = 0; v < g.variables.size(); ++v) {
    const auto& var = g.variables[v];
    os << "  v" << v << " [shape=ellipse,label=\"" << to_string(var.kind) << ": " << var.element;
    if (post && v < post->marginals.size()) {
      os << "\\n[";
      const auto& p = post->marginals[v].probs;
      for (std::size_t t = 0; t < p.size(); ++t) os << (t ? " " : "") << p[t];
      os << "]";
    }
    os << "\"];\n";
  }
  for (std::size_t f = 0; f < g.factors.size(); ++f) {
    os << "  f" << f << " [shape=box,label=\"" << g.factors[f].label << "\"];\n";
    for (int s = 0; s < 3; ++s) os << "  f" << f << " -- v" << g.factors[f].vars[s] << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace eventstruct
