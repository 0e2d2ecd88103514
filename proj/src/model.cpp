#include "eventstruct/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "eventstruct/errors.hpp"
#include "eventstruct/random.hpp"

namespace eventstruct {

using nlohmann::json;

int TypeInventory::count(Group g) const {
  switch (g) {
    case Group::event: return event;
    case Group::entity: return entity;
    case Group::role: return role;
    case Group::relation: return relation;
  }
  return 1;
}

int& TypeInventory::count(Group g) {
  switch (g) {
    case Group::event: return event;
    case Group::entity: return entity;
    case Group::role: return role;
    case Group::relation: return relation;
  }
  return event;
}

void TypeInventory::validate() const {
  if (event < 1 || entity < 1 || role < 1 || relation < 1)
    throw ArgumentError("type inventory counts must all be >= 1");
}

std::pair<int, int> PriorParams::block_shape(const TypeInventory& inv, RelationBlock b) {
  switch (b) {
    case RelationBlock::event_event: return {inv.event, inv.event};
    case RelationBlock::event_entity: return {inv.event, inv.entity};
    case RelationBlock::entity_entity: return {inv.entity, inv.entity};
  }
  return {1, 1};
}

PriorParams PriorParams::uniform(const TypeInventory& inv) {
  inv.validate();
  PriorParams p;
  p.event.assign(inv.event, 1.0 / inv.event);
  p.entity.assign(inv.entity, 1.0 / inv.entity);
  p.role.assign(static_cast<std::size_t>(inv.event) * inv.entity * inv.role, 1.0 / inv.role);
  for (int b = 0; b < 3; ++b) {
    auto [n1, n2] = block_shape(inv, static_cast<RelationBlock>(b));
    p.relation[b].assign(static_cast<std::size_t>(n1) * n2 * inv.relation, 1.0 / inv.relation);
  }
  return p;
}

namespace {

void check_simplices(const std::vector<double>& table, std::size_t expected, int width, const char* what) {
  if (table.size() != expected) throw ParameterError(std::string(what) + ": wrong table size");
  for (std::size_t start = 0; start < table.size(); start += width) {
    double s = 0.0;
    for (int i = 0; i < width; ++i) {
      const double v = table[start + i];
      if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError(std::string(what) + ": negative or non-finite entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ParameterError(std::string(what) + ": slice does not sum to 1");
  }
}

}  // namespace

void PriorParams::validate(const TypeInventory& inv) const {
  check_simplices(event, inv.event, inv.event, "theta_event");
  check_simplices(entity, inv.entity, inv.entity, "theta_entity");
  check_simplices(role, static_cast<std::size_t>(inv.event) * inv.entity * inv.role, inv.role, "theta_role");
  for (int b = 0; b < 3; ++b) {
    auto [n1, n2] = block_shape(inv, static_cast<RelationBlock>(b));
    check_simplices(relation[b], static_cast<std::size_t>(n1) * n2 * inv.relation, inv.relation, "theta_rel");
  }
}

double ModelParams::rho_log_prior() const {
  double s = 0.0;
  for (const auto& p : properties) s += p.rho_log_prior();
  return s;
}

double ModelParams::applicability(std::size_t i, int type) const {
  const auto& g = schema.at(i).gate;
  if (!g) return 1.0;
  const double p = sigmoid(std::clamp(properties.at(schema.index_of(g->parent)).mu_of(type)[0], -kLogitClamp, kLogitClamp));
  return g->value ? p : 1.0 - p;
}

HurdleParams ModelParams::hurdle(std::size_t i) const {
  const auto& g = schema.at(i).gate;
  if (!g) throw ArgumentError("property '" + schema.at(i).name + "' has no gate");
  const auto& parent = properties.at(schema.index_of(g->parent));
  const double flip = g->value ? 1.0 : -1.0;
  HurdleParams h;
  h.base = properties.at(i);
  for (int t = 0; t < parent.types; ++t) h.gate_mu.push_back(flip * parent.mu_of(t)[0]);
  for (const auto& a : h.base.annotators) h.gate_rho.push_back(flip * parent.rho_of(parent.slot(a))[0]);
  return h;
}

std::vector<std::vector<std::string>> annotators_by_property(const Corpus& corpus, const Schema& schema) {
  std::vector<std::set<std::string>> sets(schema.size());
  for (const auto& d : corpus)
    for (const auto& a : d.annotations) sets[schema.index_of(a.property)].insert(a.annotator);
  std::vector<std::vector<std::string>> out(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    auto s = sets[i];
    if (const auto& g = schema.at(i).gate) {
      const auto& parent = sets[schema.index_of(g->parent)];
      s.insert(parent.begin(), parent.end());
    }
    out[i].assign(s.begin(), s.end());
  }
  return out;
}

ModelParams initialize_params(const Schema& schema, const TypeInventory& inv, const Corpus& corpus,
                              std::uint64_t seed, double init_sd) {
  inv.validate();
  ModelParams m;
  m.schema = schema;
  m.inventory = inv;
  m.priors = PriorParams::uniform(inv);
  const auto annotators = annotators_by_property(corpus, schema);
  Rng rng(derive_seed(seed, {0x1417}));
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& spec = schema.at(i);
    PropertyParams p(spec.name, FamilyLayout::of(spec), inv.count(spec.group()), annotators[i]);
    for (auto& v : p.mu) v = init_sd * standard_normal(rng);
    m.properties.push_back(std::move(p));
  }
  return m;
}

json params_to_json(const ModelParams& params) {
  const auto& inv = params.inventory;
  json props = json::array();
  for (const auto& p : params.properties) {
    json rho = json::object();
    for (std::size_t a = 0; a < p.annotators.size(); ++a) rho[p.annotators[a]] = p.rho_of(static_cast<int>(a));
    props.push_back({{"name", p.name},
                     {"types", p.types},
                     {"mu", p.mu},
                     {"shared", p.shared},
                     {"rho", rho},
                     {"sigma", p.sigma}});
  }
  return {{"schema_version", kCheckpointVersion},
          {"schema", schema_to_json(params.schema)},
          {"inventory", {{"event", inv.event}, {"entity", inv.entity}, {"role", inv.role}, {"relation", inv.relation}}},
          {"sigma_scope", "per-property"},
          {"priors",
           {{"event", params.priors.event},
            {"entity", params.priors.entity},
            {"role", params.priors.role},
            {"relation",
             {{"event_event", params.priors.relation[0]},
              {"event_entity", params.priors.relation[1]},
              {"entity_entity", params.priors.relation[2]}}}}},
          {"properties", props}};
}

ModelParams params_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kCheckpointVersion)
      throw SchemaError("unsupported checkpoint version");
    ModelParams m;
    m.schema = schema_from_json(j.at("schema"));
    const auto& inv = j.at("inventory");
    m.inventory = {inv.at("event").get<int>(), inv.at("entity").get<int>(), inv.at("role").get<int>(),
                   inv.at("relation").get<int>()};
    m.inventory.validate();
    const auto& pr = j.at("priors");
    m.priors.event = pr.at("event").get<std::vector<double>>();
    m.priors.entity = pr.at("entity").get<std::vector<double>>();
    m.priors.role = pr.at("role").get<std::vector<double>>();
    m.priors.relation[0] = pr.at("relation").at("event_event").get<std::vector<double>>();
    m.priors.relation[1] = pr.at("relation").at("event_entity").get<std::vector<double>>();
    m.priors.relation[2] = pr.at("relation").at("entity_entity").get<std::vector<double>>();
    m.priors.validate(m.inventory);

    const auto& props = j.at("properties");
    if (props.size() != m.schema.size()) throw SchemaError("checkpoint property list does not match its schema");
    for (std::size_t i = 0; i < props.size(); ++i) {
      const auto& e = props[i];
      const auto& spec = m.schema.at(i);
      if (e.at("name").get<std::string>() != spec.name)
        throw SchemaError("checkpoint property order does not match its schema");
      std::vector<std::string> annotators;
      for (const auto& [k, v] : e.at("rho").items()) annotators.push_back(k);
      PropertyParams p(spec.name, FamilyLayout::of(spec), e.at("types").get<int>(), annotators);
      if (p.types != m.inventory.count(spec.group()))
        throw SchemaError("property '" + spec.name + "': type count disagrees with the inventory");
      auto mu = e.at("mu").get<std::vector<double>>();
      auto shared = e.at("shared").get<std::vector<double>>();
      auto sigma = e.at("sigma").get<std::vector<double>>();
      if (mu.size() != p.mu.size() || shared.size() != p.shared.size() || sigma.size() != p.sigma.size())
        throw SchemaError("property '" + spec.name + "': parameter shapes do not match the schema");
      p.mu = std::move(mu);
      p.shared = std::move(shared);
      p.sigma = std::move(sigma);
      for (std::size_t a = 0; a < p.annotators.size(); ++a) {
        auto r = e.at("rho").at(p.annotators[a]).get<std::vector<double>>();
        if (static_cast<int>(r.size()) != p.rho_dim())
          throw SchemaError("property '" + spec.name + "': intercept length mismatch");
        std::copy(r.begin(), r.end(), p.rho.begin() + static_cast<std::ptrdiff_t>(a) * p.rho_dim());
      }
      m.properties.push_back(std::move(p));
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write checkpoint '" + path + "'");
  out << params_to_json(params).dump(1) << '\n';
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return params_from_json(j);
}

}  // namespace eventstruct
