#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace eventstruct {

// Graph element a property is annotated on.
enum class ElementKind { predicate, argument, semantics_edge, document_edge };

// Latent classification an element kind feeds: predicates carry event types,
// arguments entity types, predicate-argument edges role types and document
// edges relation types.
enum class Group { event = 0, entity = 1, role = 2, relation = 3 };
inline constexpr int kGroupCount = 4;

enum class ResponseKind { binary, categorical, ordinal, temporal };

inline constexpr int kDurationLevels = 12;

struct ResponseType {
  ResponseKind kind = ResponseKind::binary;
  int count = 2;  // categories for categorical, levels for ordinal

  static ResponseType binary() { return {ResponseKind::binary, 2}; }
  static ResponseType categorical(int k) { return {ResponseKind::categorical, k}; }
  static ResponseType ordinal(int levels) { return {ResponseKind::ordinal, levels}; }
  static ResponseType temporal() { return {ResponseKind::temporal, 0}; }

  friend bool operator==(const ResponseType&, const ResponseType&) = default;
};

struct Gate {
  std::string parent;
  bool value = true;
  friend bool operator==(const Gate&, const Gate&) = default;
};

struct PropertySpec {
  std::string name;
  std::string subspace;
  ElementKind attaches_to = ElementKind::predicate;
  ResponseType response;
  std::optional<Gate> gate;

  Group group() const;
  friend bool operator==(const PropertySpec&, const PropertySpec&) = default;
};

// Validated, ordered list of properties. Property order is the order used by
// parameter tables and output columns.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<PropertySpec> properties);

  const std::vector<PropertySpec>& properties() const { return properties_; }
  std::size_t size() const { return properties_.size(); }
  const PropertySpec& at(std::size_t i) const { return properties_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws SchemaError
  std::vector<std::size_t> group_members(Group g) const;

  friend bool operator==(const Schema& a, const Schema& b) { return a.properties_ == b.properties_; }

 private:
  std::vector<PropertySpec> properties_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

ElementKind element_kind_for(Group g);
Group group_for(ElementKind k);

std::string to_string(ElementKind k);
std::string to_string(Group g);
std::string to_string(ResponseKind k);
ElementKind parse_element_kind(std::string_view s);
Group parse_group(std::string_view s);

nlohmann::json schema_to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);
Schema load_schema(const std::string& path);
void save_schema(const Schema& schema, const std::string& path);

// Event-subevent, genericity, protorole, distributivity, mereology and
// fine-grained temporal properties, grouped by the element they attach to.
Schema default_schema();

}  // namespace eventstruct
