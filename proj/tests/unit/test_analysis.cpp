#include <doctest.h>

#include <cmath>

#include "eventstruct/analysis.hpp"
#include "eventstruct/errors.hpp"
#include "eventstruct/learning.hpp"
#include "eventstruct/synth.hpp"

using namespace eventstruct;
using doctest::Approx;

namespace {

PosteriorSet point_masses(const std::vector<int>& labels, int k, std::vector<int> relabel = {}) {
  PosteriorSet s;
  s.document = "d";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<double> p(k, 0.0);
    p[relabel.empty() ? labels[i] : relabel[labels[i]]] = 1.0;
    s.marginals.push_back({Group::event, "p" + std::to_string(i), p});
  }
  return s;
}

const TypeSummary::Table& table(const TypeSummary& s, Group g) {
  for (const auto& t : s.tables)
    if (t.group == g) return t;
  FAIL("missing table");
  return s.tables.front();
}

int column(const TypeSummary::Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.properties.size(); ++i)
    if (t.properties[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace

TEST_CASE("type summaries") {
  SynthConfig cfg;
  cfg.documents = 3;
  const auto r = sample_corpus(cfg);
  auto flat = initialize_params(cfg.schema, cfg.inventory, r.corpus, 1, 0.0);
  const auto s0 = summarize_types(flat);
  CHECK(s0.tables.size() == 4);
  for (const auto& t : s0.tables)
    for (const auto& row : t.probability)
      for (const auto& v : row) {
        REQUIRE(v);
        CHECK(*v == Approx(0.5).epsilon(1e-12));
      }
  CHECK(column(table(s0, Group::event), "avg_part_duration") < 0);

  const auto np = cfg.schema.index_of("natural_parts");
  const auto telic = cfg.schema.index_of("telic");
  flat.properties[telic].mu[1] = 25.0;
  flat.properties[np].mu[2] = -20.0;
  const auto s1 = summarize_types(flat);
  const auto& ev = table(s1, Group::event);
  CHECK(*ev.probability[1][column(ev, "telic")] > 1 - 1e-9);
  CHECK(*ev.probability[0][column(ev, "telic")] == 0.5);
  // Type 2 has no natural parts: part similarity is N/A, dynamicity applies.
  CHECK_FALSE(ev.probability[2][column(ev, "part_similarity")].has_value());
  CHECK(ev.applicability[2][column(ev, "part_similarity")] < 1e-8);
  REQUIRE(ev.probability[2][column(ev, "dynamic")]);
  CHECK(ev.applicability[2][column(ev, "dynamic")] > 1 - 1e-8);
  CHECK(summarize_types(flat, 0.0).tables[0].probability[2][column(ev, "part_similarity")].has_value());
  CHECK(format_summary(s1).find("NA") != std::string::npos);
  CHECK(format_summary_long(s1).find("event\t2\tpart_similarity\tNA") != std::string::npos);

  // Truth parameters: cells are the logistic of the means.
  const auto sr = summarize_types(r.params);
  const auto& tev = table(sr, Group::event);
  for (int t = 0; t < cfg.inventory.event; ++t)
    CHECK(*tev.probability[t][column(tev, "telic")] == Approx(sigmoid(r.params.property(telic).mu[t])).epsilon(1e-12));
  CHECK(summarize_types(r.params).tables[0].probability == sr.tables[0].probability);

  auto broken = flat;
  broken.properties.pop_back();
  CHECK_THROWS_AS(summarize_types(broken), ArgumentError);
  broken = flat;
  broken.properties[telic].mu.pop_back();
  CHECK_THROWS_AS(summarize_types(broken), ArgumentError);
  CHECK_THROWS_AS(summarize_types(flat, Schema({cfg.schema.at(0)})), ArgumentError);
  CHECK_NOTHROW(summarize_types(flat, cfg.schema));
}

TEST_CASE("confusion matrices") {
  const std::vector<int> labels{0, 1, 2, 2, 1, 0, 0};
  const auto a = point_masses(labels, 3);
  const auto b = point_masses(labels, 3, {2, 0, 1});
  const auto c = confusion({a}, {b}, Group::event);
  CHECK(c.alignment == std::vector<int>{2, 0, 1});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(c.matrix[i][j] == Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
  CHECK(format_confusion(c).find("b_type_2") != std::string::npos);

  auto uniform = a;
  for (auto& m : uniform.marginals) m.probs.assign(3, 1.0 / 3);
  for (const auto& row : confusion({a}, {uniform}, Group::event).matrix)
    for (double v : row) CHECK(v == Approx(1.0 / 3).epsilon(1e-12));

  PosteriorSet ha{"d", {{Group::event, "x", {1.0, 0.0}}, {Group::event, "y", {0.5, 0.5}}}, {}, 0, true, 0};
  PosteriorSet hb{"d", {{Group::event, "x", {0.8, 0.2}}, {Group::event, "y", {0.4, 0.6}}}, {}, 0, true, 0};
  const auto h = confusion({ha}, {hb}, Group::event);
  CHECK(h.alignment == std::vector<int>{0, 1});
  CHECK(h.matrix[0][0] == Approx(2.0 / 3).epsilon(1e-12));
  CHECK(h.matrix[0][1] == Approx(1.0 / 3).epsilon(1e-12));
  CHECK(h.matrix[1][0] == Approx(0.4).epsilon(1e-12));
  CHECK(h.matrix[1][1] == Approx(0.6).epsilon(1e-12));

  // Type 1 of A never used: its row is uniform.
  PosteriorSet za{"d", {{Group::event, "x", {1.0, 0.0}}}, {}, 0, true, 0};
  const auto z = confusion({za}, {za}, Group::event);
  CHECK(z.matrix[1][0] == 0.5);

  auto missing = hb;
  missing.marginals[1].element = "w";
  CHECK_THROWS_AS(confusion({ha}, {missing}, Group::event), ArgumentError);
  CHECK_THROWS_AS(confusion({ha}, {za}, Group::event), ArgumentError);
  CHECK_THROWS_AS(confusion({ha}, {hb}, Group::role), ArgumentError);
}

TEST_CASE("entropy statistics") {
  const auto e0 = entropy_stats({point_masses({0, 1, 3}, 4)}, Group::event);
  CHECK(e0.mean == 0.0);
  CHECK(e0.median == 0.0);
  CHECK(e0.elements == 3);
  auto u = point_masses({0, 1}, 4);
  for (auto& m : u.marginals) m.probs.assign(4, 0.25);
  const auto e1 = entropy_stats({u}, Group::event);
  CHECK(e1.mean == Approx(1.0).epsilon(1e-12));
  CHECK(e1.median == Approx(1.0).epsilon(1e-12));
  const auto e2 = entropy_stats({u, point_masses({0, 1, 2}, 4)}, Group::event);
  CHECK(e2.mean == Approx(0.4).epsilon(1e-12));
  CHECK(e2.median == 0.0);
  PosteriorSet two{"d", {{Group::event, "x", {0.5, 0.5}}, {Group::event, "y", {0.9, 0.1}}}, {}, 0, true, 0};
  const double hy = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1)) / std::log(2.0);
  CHECK(entropy_stats({two}, Group::event).median == Approx((1.0 + hy) / 2).epsilon(1e-12));
  CHECK_THROWS_AS(entropy_stats({two}, Group::role), ArgumentError);
}

TEST_CASE("posterior feature export") {
  SynthConfig cfg;
  cfg.documents = 2;
  cfg.arguments = 2;
  auto r = sample_corpus(cfg);
  // One predicate keeps a single argument.
  auto& s0 = r.corpus[0].sentences[0];
  const std::string lone = s0.predicates[0].id;
  const std::string dropped_edge = s0.edges[1].id;
  REQUIRE(s0.edges[1].predicate == lone);
  s0.edges.erase(s0.edges.begin() + 1);
  std::erase_if(r.corpus[0].annotations, [&](const AnnotationRecord& a) { return a.element == dropped_edge; });
  r.corpus[0].finalize();

  const auto post = e_step(r.corpus, r.params, FitConfig{});
  const auto f = export_features(r.corpus, post, cfg.inventory);
  const auto& inv = cfg.inventory;
  const std::size_t width = inv.event + inv.role + inv.entity + 2 * (inv.role + inv.entity);
  CHECK(f.arguments.columns.size() == width);
  CHECK(f.predicates.columns.size() == static_cast<std::size_t>(inv.event + 2 * (inv.role + inv.entity)));

  std::int64_t edges = 0;
  for (const auto& d : r.corpus)
    for (const auto& s : d.sentences) edges += static_cast<std::int64_t>(s.edges.size());
  CHECK(static_cast<std::int64_t>(f.arguments.rows.size()) == edges);
  CHECK(static_cast<std::int64_t>(f.predicates.rows.size()) == r.truth.predicates);

  int flagged = 0;
  for (std::size_t i = 0; i < f.arguments.rows.size(); ++i) {
    const auto& row = f.arguments.rows[i];
    REQUIRE(row.values.size() == width);
    const std::size_t own = inv.event, block = inv.role + inv.entity, pooled = inv.event + block;
    if (row.empty_pool) {
      ++flagged;
      CHECK(row.predicate == lone);
      for (std::size_t j = pooled; j < width; ++j) CHECK(row.values[j] == 0.0);
      continue;
    }
    // Two-argument predicates: both pools equal the other argument's block.
    const auto& other = f.arguments.rows[i > 0 && f.arguments.rows[i - 1].predicate == row.predicate ? i - 1 : i + 1];
    REQUIRE(other.predicate == row.predicate);
    REQUIRE(other.element != row.element);
    for (std::size_t j = 0; j < block; ++j) {
      CHECK(row.values[pooled + j] == other.values[own + j]);
      CHECK(row.values[pooled + block + j] == other.values[own + j]);
    }
  }
  CHECK(flagged == 1);
  for (const auto& row : f.predicates.rows) CHECK_FALSE(row.empty_pool);
  CHECK(format_features(f.arguments).find("\tempty_pool\n") != std::string::npos);

  auto partial = post;
  partial[1].marginals.erase(partial[1].marginals.begin());
  CHECK_THROWS_AS(export_features(r.corpus, partial, cfg.inventory), ArgumentError);
}
