#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eventstruct/corpus.hpp"
#include "eventstruct/model.hpp"

namespace eventstruct {

// One weighted annotation as seen by a type variable: the outcome code of a
// property under one annotator's intercepts.
struct Observation {
  int property = 0;
  int slot = -1;  // annotator slot in that property's parameter table
  int code = 0;
  double weight = 1.0;
};

// Which window pairs get a relation variable. An unannotated relation
// variable sums out exactly (each theta_rel slice is a distribution), so
// document_edges gives the same posterior as window_pairs with fewer loops.
enum class RelationScope { document_edges, window_pairs };

struct GraphOptions {
  int window = 2;  // sentences whose nodes pair with the current predicate
  bool confidence_weighting = true;
  RelationScope relations = RelationScope::document_edges;
};

// (current predicate, earlier predicate or eventive argument), in the order
// the generative story visits them.
struct RelationPair {
  std::string first;
  std::string second;
  bool second_is_argument = false;
};

std::vector<RelationPair> relation_pairs(const DocumentGraph& doc, int window);

enum class FactorKind { role_prior, relation_prior };

// Parameter-independent structure of one document's factor graph.
struct LayoutVariable {
  Group kind = Group::event;
  std::string element;
  std::vector<Observation> observations;
};

// role_prior vars: (event, entity, role); relation_prior vars: (first, second, relation)
struct LayoutFactor {
  FactorKind kind = FactorKind::role_prior;
  std::array<int, 3> vars{};
  RelationBlock block = RelationBlock::event_event;
};

struct DocumentLayout {
  std::string document;
  std::vector<LayoutVariable> variables;
  std::vector<LayoutFactor> factors;
};

// Resolves annotator slots against params; throws ConstructionError when an
// annotation has no variable to attach to.
DocumentLayout layout_document(const DocumentGraph& doc, const ModelParams& params, const GraphOptions& options);

struct GraphVariable {
  Group kind = Group::event;
  std::string element;
  int cardinality = 1;
  std::vector<double> log_prior;       // unary prior (zero for role/relation variables)
  std::vector<double> log_likelihood;  // folded, weighted annotation factor
  std::vector<std::pair<int, int>> neighbors;  // (factor, slot in factor)
};

struct GraphFactor {
  FactorKind kind = FactorKind::role_prior;
  std::array<int, 3> vars{};
  std::array<int, 3> dims{};
  std::vector<double> potential;  // row-major over dims, probabilities
  std::string label;
};

struct FactorGraph {
  std::string document;
  std::vector<GraphVariable> variables;
  std::vector<GraphFactor> factors;

  // Unnormalized log joint of one full assignment (variable order).
  double log_score(const std::vector<int>& assignment) const;
};

FactorGraph instantiate(const DocumentLayout& layout, const ModelParams& params);
FactorGraph build_graph(const DocumentGraph& doc, const ModelParams& params, const GraphOptions& options);

struct VariableMarginal {
  Group kind = Group::event;
  std::string element;
  std::vector<double> probs;
};

struct PosteriorSet {
  std::string document;
  std::vector<VariableMarginal> marginals;
  std::vector<std::vector<double>> factor_beliefs;  // aligned with the graph's factors
  double evidence = 0.0;                            // log scale
  bool converged = true;
  int iterations = 0;
};

struct BpOptions {
  int max_iters = 200;
  double damping = 0.1;
  double tol = 1e-8;
};

// Synchronous damped sum-product in log space. Evidence is the Bethe
// approximation, exact on acyclic graphs.
PosteriorSet loopy_bp(const FactorGraph& graph, const BpOptions& options = {});

inline constexpr std::uint64_t kBruteForceLimit = 10'000'000;

// Exact marginals and log-evidence by enumerating every joint assignment.
PosteriorSet brute_force(const FactorGraph& graph);
PosteriorSet brute_force(const DocumentGraph& doc, const ModelParams& params, const GraphOptions& options);

// Graphviz description of the graph, with marginals when given.
std::string to_dot(const FactorGraph& graph, const PosteriorSet* posteriors = nullptr);

}  // namespace eventstruct
