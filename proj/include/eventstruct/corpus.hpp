#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "eventstruct/schema.hpp"

namespace eventstruct {

// Points on the normalized scale closer than this count as locked together.
inline constexpr double kLockTolerance = 1e-6;

enum class Lock { e1 = 0, e2 = 1, both = 2 };
// Relative order of the two free interior points, named by whose point comes first.
enum class FreeOrder { e1_earlier = 0, tie = 1, e2_earlier = 2 };

// Start/end points of two events, rescaled so the earlier start sits at 0 and
// the later end at 1. Layout: (start1, start2, end1, end2).
struct TemporalTuple {
  std::array<double, 4> points{};
  Lock lock_start = Lock::both;
  Lock lock_end = Lock::both;
  std::optional<FreeOrder> free_order;

  double start1() const { return points[0]; }
  double start2() const { return points[1]; }
  double end1() const { return points[2]; }
  double end2() const { return points[3]; }

  friend bool operator==(const TemporalTuple&, const TemporalTuple&) = default;
};

TemporalTuple normalize_temporal(const std::array<double, 4>& raw, double tolerance = kLockTolerance);

// bool for binary, int for a category index (0-based) or an ordinal level
// (1-based), TemporalTuple for temporal relations.
using AnnotationValue = std::variant<bool, int, TemporalTuple>;

inline constexpr int kConfidenceLevels = 5;

struct AnnotationRecord {
  std::string element;
  std::string property;
  std::string annotator;
  AnnotationValue value;
  int raw_confidence = kConfidenceLevels;
  // Filled by ridit_score_corpus. own_ridit is the annotator-level ridit of
  // raw_confidence; ridit_confidence additionally averages in the parent
  // record's score for gated properties.
  std::optional<double> own_ridit;
  std::optional<double> ridit_confidence;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct PredicateNode {
  std::string id;
  std::string span;
  friend bool operator==(const PredicateNode&, const PredicateNode&) = default;
};

struct ArgumentNode {
  std::string id;
  std::string span;
  bool eventive = false;
  std::string supersense;
  friend bool operator==(const ArgumentNode&, const ArgumentNode&) = default;
};

struct SemanticsEdge {
  std::string id;
  std::string predicate;
  std::string argument;
  friend bool operator==(const SemanticsEdge&, const SemanticsEdge&) = default;
};

struct Sentence {
  std::vector<PredicateNode> predicates;
  std::vector<ArgumentNode> arguments;
  std::vector<SemanticsEdge> edges;
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

// source plays e1 and target e2 in any temporal annotation on the edge.
struct DocumentEdge {
  std::string id;
  std::string source;
  std::string target;
  friend bool operator==(const DocumentEdge&, const DocumentEdge&) = default;
};

struct ElementRef {
  ElementKind kind;
  int sentence;  // -1 for document edges
  int index;     // position within the owning list
};

bool is_eventive_supersense(std::string_view supersense);

class DocumentGraph {
 public:
  std::string id;
  std::vector<Sentence> sentences;
  std::vector<DocumentEdge> doc_edges;
  std::vector<AnnotationRecord> annotations;

  // Checks structural invariants and builds the element index. Must be
  // called after the public fields are filled in and before lookups.
  void finalize();

  const ElementRef* find(std::string_view element) const;
  const ElementRef& at(std::string_view element) const;
  const ArgumentNode& argument(const ElementRef& ref) const;
  // Arguments reached from a predicate through semantics edges, in edge order.
  std::vector<int> arguments_of(int sentence, int predicate) const;
  std::optional<std::size_t> find_doc_edge(std::string_view a, std::string_view b) const;

  friend bool operator==(const DocumentGraph& a, const DocumentGraph& b) {
    return a.id == b.id && a.sentences == b.sentences && a.doc_edges == b.doc_edges &&
           a.annotations == b.annotations;
  }

 private:
  std::map<std::string, ElementRef, std::less<>> index_;
};

using Corpus = std::vector<DocumentGraph>;

// Parses one document object, checking it against the schema. line is used
// in error messages only.
DocumentGraph document_from_json(const nlohmann::json& j, const Schema& schema, std::size_t line = 0);
nlohmann::json document_to_json(const DocumentGraph& doc);

Corpus load_corpus(const std::string& path, const Schema& schema);
Corpus parse_corpus(std::istream& in, const Schema& schema);
void save_corpus(const Corpus& corpus, const std::string& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

// Per-annotator mid-CDF ridit of a confidence histogram (levels 1..5).
std::array<double, kConfidenceLevels> ridit_table(const std::array<std::int64_t, kConfidenceLevels>& counts);

Corpus ridit_score_corpus(const Corpus& corpus, const Schema& schema);

}  // namespace eventstruct
