#include <doctest.h>

#include <cmath>

#include "eventstruct/errors.hpp"
#include "eventstruct/factorgraph.hpp"
#include "eventstruct/random.hpp"
#include "eventstruct/synth.hpp"

using namespace eventstruct;
using doctest::Approx;

namespace {

// Sentences given as predicate counts; predicate i of sentence s is "s<s>p<i>".
DocumentGraph chain_doc(const std::vector<int>& preds) {
  DocumentGraph d;
  d.id = "t";
  for (std::size_t s = 0; s < preds.size(); ++s) {
    Sentence sent;
    for (int i = 0; i < preds[s]; ++i) sent.predicates.push_back({"s" + std::to_string(s) + "p" + std::to_string(i), ""});
    d.sentences.push_back(sent);
  }
  d.finalize();
  return d;
}

ModelParams random_params(const TypeInventory& inv, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.inventory = inv;
  cfg.seed = seed;
  cfg.prior_concentration = 1.0;
  auto p = make_truth_params(cfg);
  Rng rng(seed);
  double s = 0;
  for (auto& v : p.priors.event) s += (v = 0.2 + uniform01(rng));
  for (auto& v : p.priors.event) v /= s;
  return p;
}

double max_diff(const PosteriorSet& a, const PosteriorSet& b) {
  double m = 0;
  for (std::size_t v = 0; v < a.marginals.size(); ++v)
    for (std::size_t t = 0; t < a.marginals[v].probs.size(); ++t)
      m = std::max(m, std::abs(a.marginals[v].probs[t] - b.marginals[v].probs[t]));
  return m;
}

GraphOptions unweighted(int window = 2, RelationScope scope = RelationScope::document_edges) {
  GraphOptions o;
  o.window = window;
  o.confidence_weighting = false;
  o.relations = scope;
  return o;
}

}  // namespace

TEST_CASE("graph construction counts") {
  const auto params = random_params({3, 2, 2, 2}, 1);
  SUBCASE("single predicate") {
    const auto g = build_graph(chain_doc({1}), params, unweighted());
    CHECK(g.variables.size() == 1);
    CHECK(g.factors.empty());
    const auto post = loopy_bp(g);
    for (int t = 0; t < 3; ++t) CHECK(post.marginals[0].probs[t] == Approx(params.priors.event[t]).epsilon(1e-12));
    const auto exact = brute_force(g);
    CHECK(exact.evidence == Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("two sentences, window 2") {
    const auto g = build_graph(chain_doc({1, 1}), params, unweighted(2, RelationScope::window_pairs));
    CHECK(g.variables.size() == 3);
    REQUIRE(g.factors.size() == 1);
    CHECK(g.factors[0].kind == FactorKind::relation_prior);
    CHECK(g.variables[2].element == "s1p0~s0p0");
    CHECK(build_graph(chain_doc({1, 1}), params, unweighted(1, RelationScope::window_pairs)).factors.empty());
    CHECK(build_graph(chain_doc({1, 1}), params, unweighted(2)).factors.empty());
  }
  SUBCASE("window 1 keeps within-sentence pairs only") {
    const auto pairs = relation_pairs(chain_doc({2, 2}), 1);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].first == "s0p1");
    CHECK(pairs[0].second == "s0p0");
    CHECK(pairs[1].first == "s1p1");
    CHECK(relation_pairs(chain_doc({2, 2}), 2).size() == 1 + 2 + 3);
  }
}

TEST_CASE("relation pairs enqueue eventive arguments") {
  DocumentGraph d;
  d.id = "e";
  Sentence s0;
  s0.predicates = {{"p0", ""}};
  s0.arguments = {{"a0", "", true, "noun.event"}, {"a1", "", false, "noun.person"}};
  s0.edges = {{"r0", "p0", "a0"}, {"r1", "p0", "a1"}};
  Sentence s1;
  s1.predicates = {{"p1", ""}};
  d.sentences = {s0, s1};
  d.finalize();
  const auto pairs = relation_pairs(d, 2);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].first == "p0");
  CHECK(pairs[0].second == "a0");
  CHECK(pairs[0].second_is_argument);
  CHECK(pairs[1].second == "p0");
  CHECK(pairs[2].second == "a0");
  CHECK_THROWS_AS(relation_pairs(d, 0), ArgumentError);
}

TEST_CASE("annotation outside the window has no variable") {
  auto d = chain_doc({1, 1, 1});
  d.doc_edges.push_back({"far", "s0p0", "s2p0"});
  d.finalize();
  TemporalTuple t = normalize_temporal({0, 0, 1, 1});
  d.annotations.push_back({"far", "temporal_relation", "x", t, 5, 0.5, 0.5});
  const auto params = random_params({2, 2, 2, 2}, 2);
  CHECK_THROWS_AS(build_graph(d, params, unweighted(2)), ConstructionError);
  CHECK_NOTHROW(build_graph(d, params, unweighted(3)));
}

TEST_CASE("tree exactness against enumeration") {
  SynthConfig cfg;
  cfg.documents = 6;
  cfg.sentences = 2;
  cfg.predicates = 2;
  cfg.arguments = 1;
  cfg.relation_rate = 0.0;
  cfg.inventory = {3, 2, 2, 2};
  const auto sr = sample_corpus(cfg);
  BpOptions bp;
  bp.tol = 1e-12;
  for (const auto& doc : sr.corpus) {
    const auto g = build_graph(doc, sr.params, unweighted());
    const auto approx = loopy_bp(g, bp);
    const auto exact = brute_force(g);
    CHECK(approx.converged);
    CHECK(max_diff(approx, exact) < 1e-8);
    CHECK(approx.evidence == Approx(exact.evidence).epsilon(1e-10));
    for (const auto& m : approx.marginals) {
      double s = 0;
      for (double p : m.probs) s += p;
      CHECK(s == Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("unannotated relation variables sum out") {
  SynthConfig cfg;
  cfg.documents = 2;
  cfg.sentences = 2;
  cfg.predicates = 2;
  cfg.arguments = 1;
  cfg.relation_rate = 0.0;
  cfg.inventory = {2, 2, 2, 2};
  const auto sr = sample_corpus(cfg);
  for (const auto& doc : sr.corpus) {
    const auto small = brute_force(doc, sr.params, unweighted());
    const auto full = brute_force(doc, sr.params, unweighted(2, RelationScope::window_pairs));
    CHECK(full.marginals.size() > small.marginals.size());
    CHECK(full.evidence == Approx(small.evidence).epsilon(1e-10));
    for (std::size_t v = 0; v < small.marginals.size(); ++v)
      for (std::size_t t = 0; t < small.marginals[v].probs.size(); ++t)
        CHECK(full.marginals[v].probs[t] == Approx(small.marginals[v].probs[t]).epsilon(1e-10));
  }
}

TEST_CASE("relation cycle over three predicates") {
  auto params = random_params({2, 1, 1, 3}, 5);
  // Near-uniform relation tables.
  for (auto& block : params.priors.relation)
    for (std::size_t i = 0; i < block.size(); i += 3) {
      block[i] = 0.3;
      block[i + 1] = 0.33;
      block[i + 2] = 0.37;
    }
  const auto g = build_graph(chain_doc({3}), params, unweighted(1, RelationScope::window_pairs));
  CHECK(g.factors.size() == 3);
  const auto post = loopy_bp(g, {50, 0.1, 1e-8});
  CHECK(post.converged);
  CHECK(post.iterations <= 50);
  CHECK(max_diff(post, brute_force(g)) < 1e-3);
}

TEST_CASE("zero weights give prior marginals") {
  SynthConfig cfg;
  cfg.documents = 1;
  cfg.sentences = 1;
  cfg.predicates = 1;
  cfg.arguments = 0;
  const auto sr = sample_corpus(cfg);
  auto layout = layout_document(sr.corpus[0], sr.params, unweighted());
  REQUIRE_FALSE(layout.variables[0].observations.empty());
  for (auto& v : layout.variables)
    for (auto& o : v.observations) o.weight = 0.0;
  const auto post = loopy_bp(instantiate(layout, sr.params));
  for (int t = 0; t < 3; ++t) CHECK(post.marginals[0].probs[t] == Approx(sr.params.priors.event[t]).epsilon(1e-12));
}

TEST_CASE("contradicting annotation lowers evidence") {
  const auto params = random_params({2, 1, 1, 1}, 8);
  auto d = chain_doc({1});
  d.annotations.push_back({"s0p0", "telic", "a00", true, 5, 0.5, 1.0});
  const auto before = brute_force(d, params, unweighted());
  const int map_type = before.marginals[0].probs[0] > 0.5 ? 0 : 1;
  const bool map_answer = params.properties[params.schema.index_of("telic")].mu_of(map_type)[0] > 0;
  d.annotations.push_back({"s0p0", "telic", "a01", !map_answer, 5, 0.5, 1.0});
  const auto after = brute_force(d, params, unweighted());
  CHECK(after.evidence < before.evidence);
}

TEST_CASE("label permutation permutes marginals") {
  SynthConfig cfg;
  cfg.documents = 1;
  cfg.sentences = 2;
  cfg.predicates = 2;
  cfg.inventory = {2, 2, 2, 2};
  const auto sr = sample_corpus(cfg);
  auto swapped = sr.params;
  // Swap the two event types everywhere they index a table.
  std::swap(swapped.priors.event[0], swapped.priors.event[1]);
  const int E = 2, N = 2, R = 2;
  auto role = swapped.priors.role;
  for (int e = 0; e < E; ++e)
    for (int n = 0; n < N; ++n)
      for (int r = 0; r < R; ++r) swapped.priors.role[(e * N + n) * R + r] = role[((1 - e) * N + n) * R + r];
  auto ee = swapped.priors.relation[0];
  for (int a = 0; a < E; ++a)
    for (int b = 0; b < E; ++b)
      for (int q = 0; q < 2; ++q) swapped.priors.relation[0][(a * E + b) * 2 + q] = ee[((1 - a) * E + (1 - b)) * 2 + q];
  auto en = swapped.priors.relation[1];
  for (int a = 0; a < E; ++a)
    for (int b = 0; b < N; ++b)
      for (int q = 0; q < 2; ++q) swapped.priors.relation[1][(a * N + b) * 2 + q] = en[((1 - a) * N + b) * 2 + q];
  for (std::size_t i = 0; i < swapped.schema.size(); ++i) {
    if (swapped.schema.at(i).group() != Group::event) continue;
    auto& p = swapped.properties[i];
    const int d = p.mu_dim();
    for (int k = 0; k < d; ++k) std::swap(p.mu[k], p.mu[d + k]);
  }
  const auto a = loopy_bp(build_graph(sr.corpus[0], sr.params, unweighted()));
  const auto b = loopy_bp(build_graph(sr.corpus[0], swapped, unweighted()));
  CHECK(a.evidence == Approx(b.evidence).epsilon(1e-10));
  for (std::size_t v = 0; v < a.marginals.size(); ++v) {
    const auto& pa = a.marginals[v].probs;
    const auto& pb = b.marginals[v].probs;
    if (a.marginals[v].kind == Group::event) {
      CHECK(pa[0] == Approx(pb[1]).epsilon(1e-9));
    } else {
      CHECK(pa[0] == Approx(pb[0]).epsilon(1e-9));
    }
  }
}

TEST_CASE("enumeration capacity and dot dump") {
  const auto params = random_params({10, 1, 1, 1}, 3);
  const auto g = build_graph(chain_doc({1, 1, 1, 1, 1, 1, 1, 1}), params, unweighted());
  CHECK_THROWS_AS(brute_force(g), CapacityError);
  const auto small = build_graph(chain_doc({1, 1}), params, unweighted(2, RelationScope::window_pairs));
  const auto post = loopy_bp(small);
  const auto dot = to_dot(small, &post);
  CHECK(dot.find("graph \"t\"") == 0);
  CHECK(dot.find("relation(s1p0~s0p0)") != std::string::npos);
}
