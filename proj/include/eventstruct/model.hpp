#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eventstruct/corpus.hpp"
#include "eventstruct/likelihoods.hpp"
#include "eventstruct/schema.hpp"

namespace eventstruct {

struct TypeInventory {
  int event = 1;
  int entity = 1;
  int role = 1;
  int relation = 1;

  int count(Group g) const;
  int& count(Group g);
  void validate() const;
  friend bool operator==(const TypeInventory&, const TypeInventory&) = default;
};

// Which endpoint kinds a relation-prior table is indexed by. Relation pairs
// always start at a predicate; the earlier endpoint is a predicate or an
// eventive argument.
enum class RelationBlock { event_event = 0, event_entity = 1, entity_entity = 2 };

// Categorical type priors. Conditional tables are row-major with the type
// being generated innermost:
//   role[event][entity][role], relation blocks [first][second][relation].
struct PriorParams {
  std::vector<double> event;
  std::vector<double> entity;
  std::vector<double> role;
  std::array<std::vector<double>, 3> relation;

  static PriorParams uniform(const TypeInventory& inv);
  // First/second endpoint cardinalities of a relation block.
  static std::pair<int, int> block_shape(const TypeInventory& inv, RelationBlock b);
  void validate(const TypeInventory& inv) const;  // every slice a simplex
};

struct ModelParams {
  Schema schema;
  TypeInventory inventory;
  PriorParams priors;
  std::vector<PropertyParams> properties;  // aligned with schema order

  const PropertyParams& property(std::size_t i) const { return properties.at(i); }
  int types_for(std::size_t property_index) const {
    return inventory.count(schema.at(property_index).group());
  }
  // Probability that a property applies to a type at zero annotator offset:
  // the chance the gate's parent is answered with the gating value, 1 when
  // the property has no gate.
  double applicability(std::size_t property_index, int type) const;
  // Hurdle view of a gated property: the parent's logit (sign-flipped for a
  // false gate) as the gate, the property's own parameters as the base.
  HurdleParams hurdle(std::size_t property_index) const;
  // Sum over properties of the annotator-intercept log prior.
  double rho_log_prior() const;
};

inline constexpr int kCheckpointVersion = 1;

// Annotators are registered per property from the corpus: everyone who
// answered the property, plus everyone who answered a gate's parent.
std::vector<std::vector<std::string>> annotators_by_property(const Corpus& corpus, const Schema& schema);

// Uniform priors, mu ~ N(0, init_sd^2), zero intercepts, identity covariance.
ModelParams initialize_params(const Schema& schema, const TypeInventory& inv, const Corpus& corpus,
                              std::uint64_t seed, double init_sd = 0.5);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace eventstruct
