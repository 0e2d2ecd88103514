#include "eventstruct/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "eventstruct/errors.hpp"

namespace eventstruct {

namespace {

using Key = std::pair<std::string, std::string>;  // document, element

std::map<Key, const std::vector<double>*> index_marginals(const std::vector<PosteriorSet>& sets,
                                                          std::optional<Group> group) {
  std::map<Key, const std::vector<double>*> out;
  for (const auto& s : sets)
    for (const auto& m : s.marginals) {
      if (group && m.kind != *group) continue;
      if (!out.emplace(Key{s.document, m.element}, &m.probs).second)
        throw ArgumentError("posteriors: duplicate element '" + m.element + "' in document '" + s.document + "'");
    }
  return out;
}

void check_params(const ModelParams& params) {
  if (params.properties.size() != params.schema.size())
    throw ArgumentError("checkpoint has " + std::to_string(params.properties.size()) + " property blocks for " +
                        std::to_string(params.schema.size()) + " schema properties");
  for (std::size_t i = 0; i < params.schema.size(); ++i) {
    const auto& p = params.property(i);
    if (p.name != params.schema.at(i).name)
      throw ArgumentError("checkpoint property '" + p.name + "' does not match schema property '" +
                          params.schema.at(i).name + "'");
    if (p.types != params.types_for(i) || p.mu.size() != static_cast<std::size_t>(p.types * p.mu_dim()))
      throw ArgumentError("checkpoint property '" + p.name + "' has the wrong number of types");
  }
}

}  // namespace

TypeSummary summarize_types(const ModelParams& params, double na_threshold) {
  if (!(na_threshold >= 0.0 && na_threshold <= 1.0)) throw ArgumentError("N/A threshold must lie in [0, 1]");
  check_params(params);
  TypeSummary out;
  for (int g = 0; g < kGroupCount; ++g) {
    const auto group = static_cast<Group>(g);
    TypeSummary::Table t;
    t.group = group;
    t.types = params.inventory.count(group);
    std::vector<std::size_t> props;
    for (std::size_t i : params.schema.group_members(group))
      if (params.schema.at(i).response.kind == ResponseKind::binary) {
        props.push_back(i);
        t.properties.push_back(params.schema.at(i).name);
      }
    if (props.empty()) continue;
    t.probability.assign(t.types, std::vector<std::optional<double>>(props.size()));
    t.applicability.assign(t.types, std::vector<double>(props.size(), 1.0));
    for (int type = 0; type < t.types; ++type)
      for (std::size_t c = 0; c < props.size(); ++c) {
        const double a = params.applicability(props[c], type);
        t.applicability[type][c] = a;
        if (a >= na_threshold) t.probability[type][c] = std::exp(params.property(props[c]).loglik(type, -1, 1));
      }
    out.tables.push_back(std::move(t));
  }
  return out;
}

TypeSummary summarize_types(const ModelParams& params, const Schema& schema, double na_threshold) {
  if (schema_to_json(params.schema) != schema_to_json(schema))
    throw ArgumentError("checkpoint schema does not match the given schema");
  return summarize_types(params, na_threshold);
}

std::string format_summary(const TypeSummary& s) {
  std::ostringstream out;
  out.precision(6);
  for (const auto& t : s.tables) {
    out << "group\ttype";
    for (const auto& p : t.properties) out << '\t' << p;
    out << '\n';
    for (int k = 0; k < t.types; ++k) {
      out << to_string(t.group) << '\t' << k;
      for (const auto& v : t.probability[k]) {
        out << '\t';
        if (v)
          out << *v;
        else
          out << "NA";
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string format_summary_long(const TypeSummary& s) {
  std::ostringstream out;
  out.precision(10);
  out << "group\ttype\tproperty\tprobability\tapplicability\n";
  for (const auto& t : s.tables)
    for (int k = 0; k < t.types; ++k)
      for (std::size_t c = 0; c < t.properties.size(); ++c) {
        out << to_string(t.group) << '\t' << k << '\t' << t.properties[c] << '\t';
        if (t.probability[k][c])
          out << *t.probability[k][c];
        else
          out << "NA";
        out << '\t' << t.applicability[k][c] << '\n';
      }
  return out.str();
}

Confusion confusion(const std::vector<PosteriorSet>& a, const std::vector<PosteriorSet>& b, Group group) {
  const auto ia = index_marginals(a, group);
  const auto ib = index_marginals(b, group);
  if (ia.size() != ib.size()) throw ArgumentError("confusion: posterior sets cover different elements");
  if (ia.empty()) throw ArgumentError("confusion: no " + to_string(group) + " posteriors");
  const std::size_t k = ia.begin()->second->size();
  std::vector<std::vector<double>> counts(k, std::vector<double>(k, 0.0));
  for (const auto& [key, pa] : ia) {
    auto it = ib.find(key);
    if (it == ib.end())
      throw ArgumentError("confusion: element '" + key.second + "' of document '" + key.first + "' missing from B");
    const auto& pb = *it->second;
    if (pa->size() != k || pb.size() != k) throw ArgumentError("confusion: type counts differ");
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) counts[i][j] += (*pa)[i] * pb[j];
  }

  Confusion out;
  out.group = group;
  out.elements = static_cast<double>(ia.size());
  out.alignment.assign(k, -1);
  std::vector<bool> used(k, false);
  for (std::size_t step = 0; step < k; ++step) {
    int bi = -1, bj = -1;
    for (std::size_t i = 0; i < k; ++i) {
      if (out.alignment[i] >= 0) continue;
      for (std::size_t j = 0; j < k; ++j)
        if (!used[j] && (bi < 0 || counts[i][j] > counts[bi][bj])) {
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
    }
    out.alignment[bi] = bj;
    used[bj] = true;
  }
  out.matrix.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += counts[i][out.alignment[c]];
    for (std::size_t c = 0; c < k; ++c)
      out.matrix[i][c] = total > 0.0 ? counts[i][out.alignment[c]] / total : 1.0 / static_cast<double>(k);
  }
  return out;
}

std::string format_confusion(const Confusion& c) {
  std::ostringstream out;
  out.precision(6);
  out << "a_type";
  for (int j : c.alignment) out << "\tb_type_" << j;
  out << '\n';
  for (std::size_t i = 0; i < c.matrix.size(); ++i) {
    out << i;
    for (double v : c.matrix[i]) out << '\t' << v;
    out << '\n';
  }
  return out.str();
}

EntropyStats entropy_stats(const std::vector<PosteriorSet>& posteriors, Group group) {
  std::vector<double> h;
  for (const auto& s : posteriors)
    for (const auto& m : s.marginals) {
      if (m.kind != group) continue;
      double e = 0.0;
      for (double p : m.probs)
        if (p > 0.0) e -= p * std::log(p);
      const double norm = m.probs.size() > 1 ? std::log(static_cast<double>(m.probs.size())) : 1.0;
      h.push_back(m.probs.size() > 1 ? std::clamp(e / norm, 0.0, 1.0) : 0.0);
    }
  if (h.empty()) throw ArgumentError("entropy: no " + to_string(group) + " posteriors");
  EntropyStats out;
  out.elements = h.size();
  for (double v : h) out.mean += v;
  out.mean /= static_cast<double>(h.size());
  std::sort(h.begin(), h.end());
  const std::size_t n = h.size();
  out.median = n % 2 ? h[n / 2] : 0.5 * (h[n / 2 - 1] + h[n / 2]);
  return out;
}

FeatureExport export_features(const Corpus& corpus, const std::vector<PosteriorSet>& posteriors,
                              const TypeInventory& inventory) {
  const auto idx = index_marginals(posteriors, std::nullopt);
  const int ke = inventory.event, kr = inventory.role, kn = inventory.entity;
  auto get = [&](const std::string& doc, const std::string& element, int k) -> const std::vector<double>& {
    auto it = idx.find({doc, element});
    if (it == idx.end())
      throw ArgumentError("features: no posterior for '" + element + "' in document '" + doc + "'");
    if (static_cast<int>(it->second->size()) != k)
      throw ArgumentError("features: posterior for '" + element + "' has the wrong number of types");
    return *it->second;
  };

  auto names = [](const std::string& prefix, int k, std::vector<std::string>& out) {
    for (int i = 0; i < k; ++i) out.push_back(prefix + "_" + std::to_string(i));
  };
  FeatureExport out;
  names("event", ke, out.arguments.columns);
  names("role", kr, out.arguments.columns);
  names("entity", kn, out.arguments.columns);
  names("event", ke, out.predicates.columns);
  for (const char* pool : {"max", "mean"}) {
    names(std::string(pool) + "_other_role", kr, out.arguments.columns);
    names(std::string(pool) + "_other_entity", kn, out.arguments.columns);
    names(std::string(pool) + "_role", kr, out.predicates.columns);
    names(std::string(pool) + "_entity", kn, out.predicates.columns);
  }

  // Max and mean of the [role; entity] blocks; zeros when empty.
  const std::size_t block = static_cast<std::size_t>(kr + kn);
  auto pool = [&](const std::vector<std::vector<double>>& blocks, std::vector<double>& row) {
    std::vector<double> mx(block, 0.0), mean(block, 0.0);
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (std::size_t i = 0; i < block; ++i) {
        mx[i] = b == 0 ? blocks[b][i] : std::max(mx[i], blocks[b][i]);
        mean[i] += blocks[b][i] / static_cast<double>(blocks.size());
      }
    row.insert(row.end(), mx.begin(), mx.end());
    row.insert(row.end(), mean.begin(), mean.end());
  };

  for (const auto& doc : corpus)
    for (const auto& sent : doc.sentences)
      for (const auto& p : sent.predicates) {
        const auto& ev = get(doc.id, p.id, ke);
        std::vector<const SemanticsEdge*> edges;
        std::vector<std::vector<double>> blocks;
        for (const auto& e : sent.edges) {
          if (e.predicate != p.id) continue;
          edges.push_back(&e);
          auto b = get(doc.id, e.id, kr);
          const auto& ent = get(doc.id, e.argument, kn);
          b.insert(b.end(), ent.begin(), ent.end());
          blocks.push_back(std::move(b));
        }
        for (std::size_t a = 0; a < edges.size(); ++a) {
          FeatureTable::Row row{doc.id, edges[a]->id, p.id, edges[a]->argument, ev, edges.size() == 1};
          row.values.insert(row.values.end(), blocks[a].begin(), blocks[a].end());
          std::vector<std::vector<double>> others;
          for (std::size_t o = 0; o < edges.size(); ++o)
            if (o != a) others.push_back(blocks[o]);
          pool(others, row.values);
          out.arguments.rows.push_back(std::move(row));
        }
        FeatureTable::Row row{doc.id, p.id, p.id, "", ev, edges.empty()};
        pool(blocks, row.values);
        out.predicates.rows.push_back(std::move(row));
      }
  return out;
}

std::string format_features(const FeatureTable& t) {
  std::ostringstream out;
  out.precision(10);
  out << "document\telement\tpredicate\targument";
  for (const auto& c : t.columns) out << '\t' << c;
  out << "\tempty_pool\n";
  for (const auto& r : t.rows) {
    out << r.document << '\t' << r.element << '\t' << r.predicate << '\t' << r.argument;
    for (double v : r.values) out << '\t' << v;
    out << '\t' << (r.empty_pool ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace eventstruct
