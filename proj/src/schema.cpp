#include "eventstruct/schema.hpp"

#include <fstream>
#include <set>

#include "eventstruct/errors.hpp"

namespace eventstruct {

using nlohmann::json;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

Group group_for(ElementKind k) {
  switch (k) {
    case ElementKind::predicate: return Group::event;
    case ElementKind::argument: return Group::entity;
    case ElementKind::semantics_edge: return Group::role;
    case ElementKind::document_edge: return Group::relation;
  }
  return Group::event;
}

ElementKind element_kind_for(Group g) {
  switch (g) {
    case Group::event: return ElementKind::predicate;
    case Group::entity: return ElementKind::argument;
    case Group::role: return ElementKind::semantics_edge;
    case Group::relation: return ElementKind::document_edge;
  }
  return ElementKind::predicate;
}

Group PropertySpec::group() const { return group_for(attaches_to); }

std::string to_string(ElementKind k) {
  switch (k) {
    case ElementKind::predicate: return "predicate-node";
    case ElementKind::argument: return "argument-node";
    case ElementKind::semantics_edge: return "predicate-argument-edge";
    case ElementKind::document_edge: return "document-edge";
  }
  return "?";
}

std::string to_string(Group g) {
  switch (g) {
    case Group::event: return "event";
    case Group::entity: return "entity";
    case Group::role: return "role";
    case Group::relation: return "relation";
  }
  return "?";
}

std::string to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::binary: return "binary";
    case ResponseKind::categorical: return "categorical";
    case ResponseKind::ordinal: return "ordinal";
    case ResponseKind::temporal: return "temporal-tuple";
  }
  return "?";
}

ElementKind parse_element_kind(std::string_view s) {
  for (auto k : {ElementKind::predicate, ElementKind::argument, ElementKind::semantics_edge,
                 ElementKind::document_edge}) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("unknown element kind '" + std::string(s) + "'");
}

Group parse_group(std::string_view s) {
  for (auto g : {Group::event, Group::entity, Group::role, Group::relation}) {
    if (to_string(g) == s) return g;
  }
  throw ArgumentError("unknown classification '" + std::string(s) +
                      "' (expected event, entity, role or relation)");
}

Schema::Schema(std::vector<PropertySpec> properties) : properties_(std::move(properties)) {
  for (std::size_t i = 0; i < properties_.size(); ++i) {
    const auto& p = properties_[i];
    if (p.name.empty()) throw SchemaError("property with empty name");
    if (!index_.emplace(p.name, i).second) throw SchemaError("duplicate property '" + p.name + "'");
  }
  for (const auto& p : properties_) {
    const auto& r = p.response;
    switch (r.kind) {
      case ResponseKind::binary:
        if (r.count != 2) throw SchemaError(p.name + ": binary response must have 2 values");
        break;
      case ResponseKind::categorical:
        if (r.count < 2) throw SchemaError(p.name + ": categorical response needs k >= 2");
        break;
      case ResponseKind::ordinal:
        if (r.count < 2) throw SchemaError(p.name + ": ordinal response needs J >= 2");
        if (ends_with(p.name, "duration") && r.count != kDurationLevels)
          throw SchemaError(p.name + ": duration scale must have exactly 12 levels");
        break;
      case ResponseKind::temporal:
        if (p.attaches_to != ElementKind::document_edge)
          throw SchemaError(p.name + ": temporal tuples attach to document edges");
        break;
    }
    if (p.gate) {
      auto it = index_.find(p.gate->parent);
      if (it == index_.end())
        throw SchemaError(p.name + ": gate parent '" + p.gate->parent + "' is not in the schema");
      const auto& parent = properties_[it->second];
      if (parent.attaches_to != p.attaches_to)
        throw SchemaError(p.name + ": gate parent attaches to a different element kind");
      if (parent.response.kind != ResponseKind::binary)
        throw SchemaError(p.name + ": gate parent must be binary");
      if (parent.gate) throw SchemaError(p.name + ": gate parent may not itself be gated");
      if (it->second >= static_cast<std::size_t>(&p - properties_.data()))
        throw SchemaError(p.name + ": gate parent must precede the gated property");
    }
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Schema::index_of(std::string_view name) const {
  auto i = find(name);
  if (!i) throw SchemaError("unknown property '" + std::string(name) + "'");
  return *i;
}

std::vector<std::size_t> Schema::group_members(Group g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < properties_.size(); ++i)
    if (properties_[i].group() == g) out.push_back(i);
  return out;
}

json schema_to_json(const Schema& schema) {
  json out = json::array();
  for (const auto& p : schema.properties()) {
    json r = {{"type", to_string(p.response.kind)}};
    if (p.response.kind == ResponseKind::categorical) r["categories"] = p.response.count;
    if (p.response.kind == ResponseKind::ordinal) r["levels"] = p.response.count;
    json e = {{"name", p.name},
              {"subspace", p.subspace},
              {"attaches_to", to_string(p.attaches_to)},
              {"response", r}};
    if (p.gate) e["gate"] = {{"parent", p.gate->parent}, {"value", p.gate->value}};
    out.push_back(std::move(e));
  }
  return out;
}

Schema schema_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("schema must be a list of property entries");
  std::vector<PropertySpec> props;
  for (const auto& e : j) {
    try {
      PropertySpec p;
      p.name = e.at("name").get<std::string>();
      p.subspace = e.value("subspace", std::string{});
      p.attaches_to = parse_element_kind(e.at("attaches_to").get<std::string>());
      const auto& r = e.at("response");
      const auto type = r.at("type").get<std::string>();
      if (type == "binary") {
        p.response = ResponseType::binary();
      } else if (type == "categorical") {
        p.response = ResponseType::categorical(r.at("categories").get<int>());
      } else if (type == "ordinal") {
        p.response = ResponseType::ordinal(r.at("levels").get<int>());
      } else if (type == "temporal-tuple") {
        p.response = ResponseType::temporal();
      } else {
        throw SchemaError("unknown response type '" + type + "'");
      }
      if (e.contains("gate") && !e["gate"].is_null())
        p.gate = Gate{e["gate"].at("parent").get<std::string>(), e["gate"].at("value").get<bool>()};
      props.push_back(std::move(p));
    } catch (const json::exception& ex) {
      throw SchemaError(std::string("malformed schema entry: ") + ex.what());
    }
  }
  return Schema(std::move(props));
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open schema file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ParseError(std::string("schema file: ") + ex.what());
  }
  return schema_from_json(j);
}

void save_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write schema file '" + path + "'");
  out << schema_to_json(schema).dump(2) << '\n';
}

Schema default_schema() {
  using RT = ResponseType;
  const auto pred = ElementKind::predicate;
  const auto arg = ElementKind::argument;
  const auto edge = ElementKind::semantics_edge;
  const auto doc = ElementKind::document_edge;
  return Schema({
      {"natural_parts", "event_structure", pred, RT::binary(), std::nullopt},
      {"telic", "event_structure", pred, RT::binary(), std::nullopt},
      {"part_similarity", "event_structure", pred, RT::binary(), Gate{"natural_parts", true}},
      {"avg_part_duration", "event_structure", pred, RT::ordinal(kDurationLevels),
       Gate{"natural_parts", true}},
      {"dynamic", "event_structure", pred, RT::binary(), Gate{"natural_parts", false}},
      {"situation_duration", "event_structure", pred, RT::ordinal(kDurationLevels),
       Gate{"natural_parts", false}},
      {"factual", "factuality", pred, RT::binary(), std::nullopt},
      {"pred_particular", "genericity", pred, RT::binary(), std::nullopt},
      {"pred_hypothetical", "genericity", pred, RT::binary(), std::nullopt},
      {"arg_particular", "genericity", arg, RT::binary(), std::nullopt},
      {"arg_kind", "genericity", arg, RT::binary(), std::nullopt},
      {"arg_abstract", "genericity", arg, RT::binary(), std::nullopt},
      {"volition", "protoroles", edge, RT::binary(), std::nullopt},
      {"instigation", "protoroles", edge, RT::binary(), std::nullopt},
      {"change_of_state", "protoroles", edge, RT::binary(), std::nullopt},
      {"existed_before", "protoroles", edge, RT::binary(), std::nullopt},
      {"distributive", "distributivity", edge, RT::binary(), std::nullopt},
      {"e1_part_of_e2", "mereology", doc, RT::binary(), std::nullopt},
      {"e2_part_of_e1", "mereology", doc, RT::binary(), std::nullopt},
      {"temporal_relation", "time", doc, RT::temporal(), std::nullopt},
  });
}

}  // namespace eventstruct
