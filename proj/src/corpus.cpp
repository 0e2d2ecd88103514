#include "eventstruct/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "eventstruct/errors.hpp"

namespace eventstruct {

using nlohmann::json;

TemporalTuple normalize_temporal(const std::array<double, 4>& raw, double tolerance) {
  for (double v : raw)
    if (!std::isfinite(v)) throw ConsistencyError("temporal tuple has a non-finite point");
  const double s1 = raw[0], s2 = raw[1], e1 = raw[2], e2 = raw[3];
  if (s1 > e1 || s2 > e2) throw ConsistencyError("temporal tuple has an event that ends before it starts");
  const double lo = std::min(s1, s2);
  const double hi = std::max(e1, e2);
  if (!(hi > lo)) throw ConsistencyError("degenerate temporal span: all four points are equal");

  TemporalTuple t;
  const double width = hi - lo;
  for (int i = 0; i < 4; ++i) t.points[i] = (raw[i] - lo) / width;

  auto lock = [&](double a, double b, bool earlier_wins) {
    if (std::abs(a - b) <= tolerance) return Lock::both;
    return ((a < b) == earlier_wins) ? Lock::e1 : Lock::e2;
  };
  t.lock_start = lock(t.start1(), t.start2(), true);
  t.lock_end = lock(t.end1(), t.end2(), false);

  // A free start of one event and a free end of the other.
  auto order = [&](double p_e1, double p_e2) {
    if (std::abs(p_e1 - p_e2) <= tolerance) return FreeOrder::tie;
    return p_e1 < p_e2 ? FreeOrder::e1_earlier : FreeOrder::e2_earlier;
  };
  if (t.lock_start == Lock::e1 && t.lock_end == Lock::e2) {
    t.free_order = order(t.end1(), t.start2());
  } else if (t.lock_start == Lock::e2 && t.lock_end == Lock::e1) {
    t.free_order = order(t.start1(), t.end2());
  }
  return t;
}

bool is_eventive_supersense(std::string_view s) {
  return s == "noun.event" || s == "noun.state" || s == "noun.process";
}

void DocumentGraph::finalize() {
  index_.clear();
  auto add = [&](const std::string& element, ElementRef ref) {
    if (element.empty()) throw ConsistencyError("document '" + id + "': element with empty id");
    if (!index_.emplace(element, ref).second)
      throw ConsistencyError("document '" + id + "': duplicate element id '" + element + "'");
  };
  for (int s = 0; s < static_cast<int>(sentences.size()); ++s) {
    const auto& sent = sentences[s];
    for (int i = 0; i < static_cast<int>(sent.predicates.size()); ++i)
      add(sent.predicates[i].id, {ElementKind::predicate, s, i});
    for (int i = 0; i < static_cast<int>(sent.arguments.size()); ++i) {
      const auto& a = sent.arguments[i];
      if (a.eventive && !is_eventive_supersense(a.supersense))
        throw ConsistencyError("argument '" + a.id + "' is flagged eventive but has supersense '" +
                               a.supersense + "'");
      add(a.id, {ElementKind::argument, s, i});
    }
  }
  for (int s = 0; s < static_cast<int>(sentences.size()); ++s) {
    for (int i = 0; i < static_cast<int>(sentences[s].edges.size()); ++i) {
      const auto& e = sentences[s].edges[i];
      const auto* p = find(e.predicate);
      const auto* a = find(e.argument);
      if (!p || p->kind != ElementKind::predicate || p->sentence != s ||
          !a || a->kind != ElementKind::argument || a->sentence != s)
        throw ConsistencyError("semantics edge '" + e.id +
                               "' must join a predicate and an argument of its own sentence");
      add(e.id, {ElementKind::semantics_edge, s, i});
    }
  }
  for (int i = 0; i < static_cast<int>(doc_edges.size()); ++i) {
    const auto& e = doc_edges[i];
    for (const auto* end : {&e.source, &e.target}) {
      const auto* r = find(*end);
      if (!r || (r->kind != ElementKind::predicate && r->kind != ElementKind::argument))
        throw ConsistencyError("document edge '" + e.id + "' endpoint '" + *end +
                               "' is not a semantics node");
    }
    if (e.source == e.target) throw ConsistencyError("document edge '" + e.id + "' is a self loop");
    add(e.id, {ElementKind::document_edge, -1, i});
  }
}

const ElementRef* DocumentGraph::find(std::string_view element) const {
  auto it = index_.find(element);
  return it == index_.end() ? nullptr : &it->second;
}

const ElementRef& DocumentGraph::at(std::string_view element) const {
  const auto* r = find(element);
  if (!r) throw SchemaError("document '" + id + "' has no element '" + std::string(element) + "'");
  return *r;
}

const ArgumentNode& DocumentGraph::argument(const ElementRef& ref) const {
  return sentences.at(ref.sentence).arguments.at(ref.index);
}

std::vector<int> DocumentGraph::arguments_of(int sentence, int predicate) const {
  const auto& sent = sentences.at(sentence);
  const auto& pid = sent.predicates.at(predicate).id;
  std::vector<int> out;
  for (const auto& e : sent.edges) {
    if (e.predicate != pid) continue;
    int idx = at(e.argument).index;
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

std::optional<std::size_t> DocumentGraph::find_doc_edge(std::string_view a, std::string_view b) const {
  for (std::size_t i = 0; i < doc_edges.size(); ++i) {
    const auto& e = doc_edges[i];
    if ((e.source == a && e.target == b) || (e.source == b && e.target == a)) return i;
  }
  return std::nullopt;
}

namespace {

AnnotationValue parse_value(const json& v, const PropertySpec& spec) {
  const auto& r = spec.response;
  switch (r.kind) {
    case ResponseKind::binary:
      if (!v.is_boolean()) throw SchemaError("property '" + spec.name + "' expects a boolean value");
      return v.get<bool>();
    case ResponseKind::categorical: {
      if (!v.is_number_integer()) throw SchemaError("property '" + spec.name + "' expects a category index");
      int c = v.get<int>();
      if (c < 0 || c >= r.count)
        throw SchemaError("property '" + spec.name + "': category " + std::to_string(c) + " out of range");
      return c;
    }
    case ResponseKind::ordinal: {
      if (!v.is_number_integer()) throw SchemaError("property '" + spec.name + "' expects an ordinal level");
      int j = v.get<int>();
      if (j < 1 || j > r.count)
        throw SchemaError("property '" + spec.name + "': level " + std::to_string(j) + " out of range");
      return j;
    }
    case ResponseKind::temporal: {
      if (!v.is_array() || v.size() != 4)
        throw SchemaError("property '" + spec.name + "' expects a 4-tuple of reals");
      std::array<double, 4> raw{};
      for (int i = 0; i < 4; ++i) {
        if (!v[i].is_number()) throw SchemaError("property '" + spec.name + "' expects a 4-tuple of reals");
        raw[i] = v[i].get<double>();
        if (raw[i] < 0.0 || raw[i] > 1.0)
          throw SchemaError("property '" + spec.name + "': temporal points must lie in [0, 1]");
      }
      return normalize_temporal(raw);
    }
  }
  throw SchemaError("unsupported response type");
}

json value_to_json(const AnnotationValue& v) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TemporalTuple>) {
          return json(x.points);
        } else {
          return json(x);
        }
      },
      v);
}

// Error wrapper so every failure while reading a document carries its line.
template <class F>
auto with_line(std::size_t line, F&& f) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const SchemaError& e) {
    throw SchemaError(line ? "line " + std::to_string(line) + ": " + e.what() : std::string(e.what()));
  } catch (const ConsistencyError& e) {
    throw ConsistencyError(line ? "line " + std::to_string(line) + ": " + e.what() : std::string(e.what()));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed document: ") + e.what(), line);
  }
}

using RecordKey = std::tuple<std::string_view, std::string_view, std::string_view>;  // element, annotator, property

std::map<RecordKey, const AnnotationRecord*> index_records(const std::vector<AnnotationRecord>& records) {
  std::map<RecordKey, const AnnotationRecord*> out;
  for (const auto& a : records) out.emplace(RecordKey{a.element, a.annotator, a.property}, &a);
  return out;
}

void check_annotations(const DocumentGraph& doc, const Schema& schema) {
  const auto index = index_records(doc.annotations);
  if (index.size() != doc.annotations.size()) {
    std::set<RecordKey> seen;
    for (const auto& a : doc.annotations)
      if (!seen.emplace(a.element, a.annotator, a.property).second)
        throw ConsistencyError("duplicate annotation of '" + a.property + "' on '" + a.element + "' by '" +
                               a.annotator + "'");
  }
  for (const auto& a : doc.annotations) {
    const auto& spec = schema.at(schema.index_of(a.property));
    if (!spec.gate) continue;
    auto it = index.find({a.element, a.annotator, spec.gate->parent});
    if (it == index.end() || std::get<bool>(it->second->value) != spec.gate->value)
      throw ConsistencyError("annotation of gated property '" + a.property + "' on '" + a.element +
                             "' by '" + a.annotator + "' has no parent answer opening the gate");
  }
}

}  // namespace

DocumentGraph document_from_json(const json& j, const Schema& schema, std::size_t line) {
  return with_line(line, [&] {
    if (!j.is_object()) throw ParseError("document must be an object", line);
    DocumentGraph doc;
    doc.id = j.at("id").get<std::string>();
    for (const auto& s : j.at("sentences")) {
      Sentence sent;
      for (const auto& p : s.at("predicates"))
        sent.predicates.push_back({p.at("id").get<std::string>(), p.value("span", std::string{})});
      for (const auto& a : s.at("arguments"))
        sent.arguments.push_back({a.at("id").get<std::string>(), a.value("span", std::string{}),
                                  a.value("eventive", false), a.value("supersense", std::string{})});
      for (const auto& e : s.at("edges"))
        sent.edges.push_back({e.at("id").get<std::string>(), e.at("predicate").get<std::string>(),
                              e.at("argument").get<std::string>()});
      doc.sentences.push_back(std::move(sent));
    }
    if (j.contains("doc_edges"))
      for (const auto& e : j.at("doc_edges"))
        doc.doc_edges.push_back({e.at("id").get<std::string>(), e.at("source").get<std::string>(),
                                 e.at("target").get<std::string>()});
    doc.finalize();

    if (j.contains("annotations")) {
      for (const auto& a : j.at("annotations")) {
        AnnotationRecord rec;
        rec.element = a.at("element").get<std::string>();
        rec.property = a.at("property").get<std::string>();
        rec.annotator = a.at("annotator").get<std::string>();
        const auto& conf = a.at("confidence");
        if (!conf.is_number_integer()) throw ParseError("confidence must be an integer 1..5", line);
        rec.raw_confidence = conf.get<int>();
        if (rec.raw_confidence < 1 || rec.raw_confidence > kConfidenceLevels)
          throw ParseError("confidence must be in 1..5", line);
        const auto pidx = schema.find(rec.property);
        if (!pidx) throw SchemaError("unknown property '" + rec.property + "'");
        const auto& spec = schema.at(*pidx);
        const auto* ref = doc.find(rec.element);
        if (!ref) throw SchemaError("annotation references unknown element '" + rec.element + "'");
        if (ref->kind != spec.attaches_to)
          throw SchemaError("property '" + spec.name + "' attaches to " + to_string(spec.attaches_to) +
                            " but '" + rec.element + "' is a " + to_string(ref->kind));
        rec.value = parse_value(a.at("value"), spec);
        doc.annotations.push_back(std::move(rec));
      }
    }
    check_annotations(doc, schema);
    return doc;
  });
}

json document_to_json(const DocumentGraph& doc) {
  json sentences = json::array();
  for (const auto& s : doc.sentences) {
    json preds = json::array(), args = json::array(), edges = json::array();
    for (const auto& p : s.predicates) preds.push_back({{"id", p.id}, {"span", p.span}});
    for (const auto& a : s.arguments)
      args.push_back({{"id", a.id}, {"span", a.span}, {"eventive", a.eventive}, {"supersense", a.supersense}});
    for (const auto& e : s.edges)
      edges.push_back({{"id", e.id}, {"predicate", e.predicate}, {"argument", e.argument}});
    sentences.push_back({{"predicates", preds}, {"arguments", args}, {"edges", edges}});
  }
  json doc_edges = json::array();
  for (const auto& e : doc.doc_edges)
    doc_edges.push_back({{"id", e.id}, {"source", e.source}, {"target", e.target}});
  json annotations = json::array();
  for (const auto& a : doc.annotations)
    annotations.push_back({{"element", a.element},
                           {"property", a.property},
                           {"annotator", a.annotator},
                           {"value", value_to_json(a.value)},
                           {"confidence", a.raw_confidence}});
  return {{"id", doc.id}, {"sentences", sentences}, {"doc_edges", doc_edges}, {"annotations", annotations}};
}

Corpus parse_corpus(std::istream& in, const Schema& schema) {
  Corpus out;
  std::string line;
  std::size_t n = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), n);
    }
    auto doc = document_from_json(j, schema, n);
    if (!ids.insert(doc.id).second) throw ConsistencyError("line " + std::to_string(n) + ": duplicate document id '" + doc.id + "'");
    out.push_back(std::move(doc));
  }
  return out;
}

Corpus load_corpus(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, schema);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& d : corpus) out << document_to_json(d).dump() << '\n';
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write corpus file '" + path + "'");
  write_corpus(corpus, out);
}

std::array<double, kConfidenceLevels> ridit_table(const std::array<std::int64_t, kConfidenceLevels>& counts) {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (total <= 0) throw std::logic_error("ridit_table: empty confidence histogram");
  std::array<double, kConfidenceLevels> out{};
  double below = 0.0;
  for (int j = 0; j < kConfidenceLevels; ++j) {
    const double p = static_cast<double>(counts[j]) / static_cast<double>(total);
    out[j] = below + 0.5 * p;
    below += p;
  }
  return out;
}

Corpus ridit_score_corpus(const Corpus& corpus, const Schema& schema) {
  std::map<std::string, std::array<std::int64_t, kConfidenceLevels>> hist;
  for (const auto& d : corpus)
    for (const auto& a : d.annotations) hist[a.annotator][a.raw_confidence - 1] += 1;
  std::map<std::string, std::array<double, kConfidenceLevels>> tables;
  for (const auto& [annotator, counts] : hist) tables.emplace(annotator, ridit_table(counts));

  Corpus out = corpus;
  for (auto& d : out) {
    for (auto& a : d.annotations) a.own_ridit = tables.at(a.annotator)[a.raw_confidence - 1];
    const auto index = index_records(d.annotations);
    for (auto& a : d.annotations) {
      const auto& spec = schema.at(schema.index_of(a.property));
      a.ridit_confidence = a.own_ridit;
      if (!spec.gate) continue;
      auto it = index.find({a.element, a.annotator, spec.gate->parent});
      if (it != index.end()) a.ridit_confidence = 0.5 * (*a.own_ridit + *it->second->own_ridit);
    }
  }
  return out;
}

}  // namespace eventstruct
