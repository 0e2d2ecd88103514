#include "eventstruct/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "eventstruct/errors.hpp"
#include "eventstruct/factorgraph.hpp"
#include "eventstruct/random.hpp"

namespace eventstruct {

void SynthConfig::validate() const {
  inventory.validate();
  if (documents < 0 || sentences < 0 || predicates < 0 || arguments < 0)
    throw ArgumentError("synth: counts must be >= 0");
  if (annotator_pool < 1) throw ArgumentError("synth: annotator pool must be >= 1");
  if (annotators_per_item < 1 || annotators_per_item > annotator_pool)
    throw ArgumentError("synth: annotators per item must lie in [1, pool]");
  if (window < 1) throw ArgumentError("synth: window must be >= 1");
  if (!(eventive_probability >= 0.0 && eventive_probability <= 1.0) || !(relation_rate >= 0.0 && relation_rate <= 1.0))
    throw ArgumentError("synth: probabilities must lie in [0, 1]");
  if (!(separation >= 0.0) || !(rho_sd >= 0.0) || !(prior_concentration >= 0.0))
    throw ArgumentError("synth: scales must be >= 0");
  if (confidence_level < 1 || confidence_level > kConfidenceLevels)
    throw ArgumentError("synth: confidence level must lie in 1..5");
  if (level_weights) {
    double s = 0.0;
    for (double w : *level_weights) {
      if (!(w >= 0.0)) throw ArgumentError("synth: level weights must be >= 0");
      s += w;
    }
    if (!(s > 0.0)) throw ArgumentError("synth: level weights sum to zero");
  }
}

std::vector<std::string> synth_annotators(int pool) {
  std::vector<std::string> out;
  for (int i = 0; i < pool; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "a%02d", i);
    out.emplace_back(buf);
  }
  return out;
}

namespace {

std::vector<double> random_simplex(Rng& rng, int n, double concentration) {
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) {
    x = std::exp(concentration * standard_normal(rng));
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

// +-1 sign patterns (types x columns) whose rows differ in at least
// min(3, columns) places, so every pair of types is separated.
std::vector<std::vector<int>> separated_signs(Rng& rng, int types, int columns) {
  const int need = std::min(3, columns);
  std::vector<std::vector<int>> best;
  int best_gap = -1;
  for (int attempt = 0; attempt < 2000; ++attempt) {
    std::vector<std::vector<int>> s(types, std::vector<int>(columns));
    for (auto& row : s)
      for (auto& v : row) v = (rng() >> 63) ? 1 : -1;
    int gap = columns;
    for (int a = 0; a < types; ++a)
      for (int b = a + 1; b < types; ++b) {
        int d = 0;
        for (int c = 0; c < columns; ++c) d += s[a][c] != s[b][c];
        gap = std::min(gap, d);
      }
    if (gap > best_gap) {
      best_gap = gap;
      best = std::move(s);
    }
    if (best_gap >= need) break;
  }
  return best;
}

}  // namespace

ModelParams make_truth_params(const SynthConfig& config) {
  config.validate();
  const auto& schema = config.schema;
  const auto& inv = config.inventory;
  ModelParams m;
  m.schema = schema;
  m.inventory = inv;
  Rng rng(derive_seed(config.seed, {0x7a11}));
  const double half = config.separation / 2.0;

  m.priors = PriorParams::uniform(inv);
  auto fill_table = [&](std::vector<double>& table, int width) {
    for (std::size_t start = 0; start < table.size(); start += width) {
      auto p = random_simplex(rng, width, config.prior_concentration);
      std::copy(p.begin(), p.end(), table.begin() + static_cast<std::ptrdiff_t>(start));
    }
  };
  fill_table(m.priors.role, inv.role);
  for (auto& block : m.priors.relation) fill_table(block, inv.relation);

  // One sign column per scalar-mean property within each group.
  std::map<Group, std::vector<std::size_t>> columns;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto k = schema.at(i).response.kind;
    if (k == ResponseKind::binary || k == ResponseKind::ordinal) columns[schema.at(i).group()].push_back(i);
  }
  std::map<std::size_t, std::vector<int>> sign_of;  // property -> per-type sign
  for (const auto& [g, props] : columns) {
    const auto signs = separated_signs(rng, inv.count(g), static_cast<int>(props.size()));
    for (std::size_t c = 0; c < props.size(); ++c) {
      std::vector<int> col;
      for (int t = 0; t < inv.count(g); ++t) col.push_back(signs[t][c]);
      sign_of[props[c]] = col;
    }
  }

  const auto annotators = synth_annotators(config.annotator_pool);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& spec = schema.at(i);
    PropertyParams p(spec.name, FamilyLayout::of(spec), inv.count(spec.group()), annotators);
    for (int t = 0; t < p.types; ++t) {
      auto mu = p.mu_of(t);
      switch (spec.response.kind) {
        case ResponseKind::binary:
        case ResponseKind::ordinal:
          mu[0] = half * sign_of.at(i)[t];
          break;
        case ResponseKind::categorical: {
          const int fav = static_cast<int>((t + uniform_index(rng, spec.response.count)) % spec.response.count);
          for (int c = 0; c < spec.response.count; ++c) mu[c] = c == fav ? half : -half;
          break;
        }
        case ResponseKind::temporal:
          for (int b = 0; b < 3; ++b) {
            const int fav = static_cast<int>(uniform_index(rng, 3));
            for (int c = 0; c < 3; ++c) mu[3 * b + c] = c == fav ? half : -half;
          }
          break;
      }
    }
    for (auto& r : p.rho) r = config.rho_sd * standard_normal(rng);
    const int d = p.rho_dim();
    const double var = std::max(config.rho_sd * config.rho_sd, kSigmaFloor);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) p.sigma[r * d + c] = r == c ? var : 0.0;
    m.properties.push_back(std::move(p));
  }
  return m;
}

namespace {

int draw_categorical(Rng& rng, const std::vector<double>& probs) {
  double u = uniform01(rng);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    u -= probs[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  return 0;
}

int draw_slice(Rng& rng, const std::vector<double>& table, std::size_t row, int width) {
  std::vector<double> p(table.begin() + static_cast<std::ptrdiff_t>(row * width),
                        table.begin() + static_cast<std::ptrdiff_t>((row + 1) * width));
  return draw_categorical(rng, p);
}

// Draws a present outcome code (the gate, if any, is decided by the caller).
int draw_code(Rng& rng, const PropertyParams& p, int type, int slot) {
  std::vector<int> codes;
  std::vector<double> logp;
  for (int c : p.layout.outcome_codes()) {
    if (c == kAbsent) continue;
    codes.push_back(c);
    logp.push_back(p.loglik(type, slot, c));
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double s = 0.0;
  for (auto& v : logp) s += (v = std::exp(v - mx));
  for (auto& v : logp) v /= s;
  return codes[draw_categorical(rng, logp)];
}

// Two interior points in (0.1, 0.9) with a clear gap, returned ascending.
std::pair<double, double> interior_pair(Rng& rng) {
  const double a = 0.1 + 0.35 * uniform01(rng);
  const double b = a + 0.1 + 0.3 * uniform01(rng);
  return {a, b};
}

TemporalTuple tuple_for(Rng& rng, const TemporalOutcome& o) {
  auto [lo, hi] = interior_pair(rng);
  // Free start and free end of the unlocked event(s); by default the start
  // comes first, which also keeps a doubly-free event well formed.
  double fs = lo, fe = hi;
  if (o.order) {
    // (e1, e2) compares end1 with start2; (e2, e1) compares start1 with end2.
    const bool e1_first = *o.order == FreeOrder::e1_earlier;
    const bool start_is_e1 = o.start == Lock::e2;
    if (*o.order == FreeOrder::tie) {
      fe = fs;
    } else if (e1_first == start_is_e1) {
      fs = lo, fe = hi;
    } else {
      fs = hi, fe = lo;
    }
  }
  std::array<double, 4> pt{};  // start1, start2, end1, end2
  switch (o.start) {
    case Lock::both: pt[0] = pt[1] = 0.0; break;
    case Lock::e1: pt[0] = 0.0; pt[1] = fs; break;
    case Lock::e2: pt[1] = 0.0; pt[0] = fs; break;
  }
  switch (o.end) {
    case Lock::both: pt[2] = pt[3] = 1.0; break;
    case Lock::e1: pt[2] = 1.0; pt[3] = fe; break;
    case Lock::e2: pt[3] = 1.0; pt[2] = fe; break;
  }
  return normalize_temporal(pt);
}

AnnotationValue decode_value(Rng& rng, const PropertySpec& spec, int code) {
  switch (spec.response.kind) {
    case ResponseKind::binary: return code == 1;
    case ResponseKind::categorical: return code;
    case ResponseKind::ordinal: return code + 1;
    case ResponseKind::temporal: return tuple_for(rng, decode_temporal(code));
  }
  return false;
}

const char* const kPlainSupersenses[] = {"noun.person", "noun.artifact", "noun.group", "noun.location"};
const char* const kEventiveSupersenses[] = {"noun.event", "noun.state", "noun.process"};

struct DocumentSample {
  DocumentGraph doc;
  std::vector<std::pair<std::string, int>> labels;
};

DocumentSample sample_document(const SynthConfig& cfg, const ModelParams& params, int index) {
  Rng rng(derive_seed(cfg.seed, {0xd0c, static_cast<std::uint64_t>(index)}));
  const auto& pri = params.priors;
  const auto& inv = params.inventory;
  const auto& schema = params.schema;
  DocumentSample out;
  auto& doc = out.doc;
  char buf[64];
  std::snprintf(buf, sizeof buf, "doc%05d", index);
  doc.id = buf;

  std::map<std::string, int> type_of;
  auto label = [&](const std::string& id, int t) {
    type_of[id] = t;
    out.labels.emplace_back(id, t);
  };
  for (int s = 0; s < cfg.sentences; ++s) {
    Sentence sent;
    for (int v = 0; v < cfg.predicates; ++v) {
      std::snprintf(buf, sizeof buf, "%s.s%d.p%d", doc.id.c_str(), s, v);
      const std::string pid = buf;
      sent.predicates.push_back({pid, "pred" + std::to_string(v)});
      const int tv = draw_categorical(rng, pri.event);
      label(pid, tv);
      for (int a = 0; a < cfg.arguments; ++a) {
        std::snprintf(buf, sizeof buf, "%s.s%d.p%da%d", doc.id.c_str(), s, v, a);
        const std::string aid = buf;
        ArgumentNode arg{aid, "arg" + std::to_string(a), false, ""};
        arg.eventive = uniform01(rng) < cfg.eventive_probability;
        arg.supersense = arg.eventive ? kEventiveSupersenses[uniform_index(rng, 3)]
                                      : kPlainSupersenses[uniform_index(rng, 4)];
        const int te = draw_categorical(rng, pri.entity);
        label(aid, te);
        sent.arguments.push_back(arg);
        const std::string eid = pid + ">" + aid.substr(aid.rfind('.') + 1);
        sent.edges.push_back({eid, pid, aid});
        label(eid, draw_slice(rng, pri.role, static_cast<std::size_t>(tv) * inv.entity + te, inv.role));
      }
    }
    doc.sentences.push_back(std::move(sent));
  }
  doc.finalize();

  int rel = 0;
  for (const auto& pair : relation_pairs(doc, cfg.window)) {
    const auto block = pair.second_is_argument ? RelationBlock::event_entity : RelationBlock::event_event;
    const int width = pair.second_is_argument ? inv.entity : inv.event;
    const std::size_t row = static_cast<std::size_t>(type_of.at(pair.first)) * width + type_of.at(pair.second);
    const int q = draw_slice(rng, pri.relation[static_cast<int>(block)], row, inv.relation);
    if (uniform01(rng) < cfg.relation_rate) {
      std::snprintf(buf, sizeof buf, "%s.r%d", doc.id.c_str(), rel++);
      doc.doc_edges.push_back({buf, pair.second, pair.first});
      label(buf, q);
    } else {
      out.labels.emplace_back(pair.first + "~" + pair.second, q);
    }
  }
  doc.finalize();

  // Annotations, element by element in document order.
  const int pool = static_cast<int>(params.properties.empty() ? cfg.annotator_pool
                                                              : params.properties.front().annotators.size());
  std::vector<int> order(pool);
  auto annotate = [&](const std::string& element, ElementKind kind) {
    const int t = type_of.at(element);
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < cfg.annotators_per_item; ++i) std::swap(order[i], order[i + uniform_index(rng, pool - i)]);
    std::vector<int> chosen(order.begin(), order.begin() + cfg.annotators_per_item);
    std::sort(chosen.begin(), chosen.end());
    std::map<std::pair<std::size_t, int>, bool> answers;  // (property, annotator slot) -> binary answer
    for (std::size_t i = 0; i < schema.size(); ++i) {
      const auto& spec = schema.at(i);
      if (spec.attaches_to != kind) continue;
      const auto& p = params.property(i);
      for (int a : chosen) {
        if (spec.gate) {
          auto it = answers.find({schema.index_of(spec.gate->parent), a});
          if (it == answers.end() || it->second != spec.gate->value) continue;
        }
        const int code = draw_code(rng, p, t, a);
        AnnotationRecord rec;
        rec.element = element;
        rec.property = spec.name;
        rec.annotator = p.annotators[a];
        rec.value = decode_value(rng, spec, code);
        rec.raw_confidence = cfg.level_weights
                                 ? 1 + draw_categorical(rng, std::vector<double>(cfg.level_weights->begin(),
                                                                                  cfg.level_weights->end()))
                                 : cfg.confidence_level;
        if (spec.response.kind == ResponseKind::binary) answers[{i, a}] = code == 1;
        doc.annotations.push_back(std::move(rec));
      }
    }
  };
  for (const auto& sent : doc.sentences) {
    for (const auto& p : sent.predicates) annotate(p.id, ElementKind::predicate);
    for (const auto& a : sent.arguments) annotate(a.id, ElementKind::argument);
    for (const auto& e : sent.edges) annotate(e.id, ElementKind::semantics_edge);
  }
  for (const auto& e : doc.doc_edges) annotate(e.id, ElementKind::document_edge);
  return out;
}

}  // namespace

SynthResult sample_corpus(const SynthConfig& config, const ModelParams& params) {
  config.validate();
  params.priors.validate(params.inventory);
  const auto expected = synth_annotators(config.annotator_pool);
  for (const auto& p : params.properties)
    if (p.annotators != expected)
      throw ArgumentError("synth: parameter annotators must be the configured synthetic pool");
  SynthResult r;
  r.params = params;
  for (int d = 0; d < config.documents; ++d) {
    auto s = sample_document(config, params, d);
    for (const auto& sent : s.doc.sentences) {
      r.truth.predicates += static_cast<std::int64_t>(sent.predicates.size());
      r.truth.arguments += static_cast<std::int64_t>(sent.arguments.size());
      r.truth.semantics_edges += static_cast<std::int64_t>(sent.edges.size());
    }
    r.truth.document_edges += static_cast<std::int64_t>(s.doc.doc_edges.size());
    r.truth.annotations += static_cast<std::int64_t>(s.doc.annotations.size());
    for (auto& [id, t] : s.labels) r.truth.labels[id] = t;
    r.corpus.push_back(std::move(s.doc));
  }
  r.corpus = ridit_score_corpus(r.corpus, params.schema);
  return r;
}

SynthResult sample_corpus(const SynthConfig& config) { return sample_corpus(config, make_truth_params(config)); }

CorpusStats corpus_stats(const Corpus& corpus, const Schema& schema) {
  CorpusStats st;
  std::vector<std::vector<std::int64_t>> counts(schema.size());
  std::vector<std::vector<std::string>> names(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& r = schema.at(i).response;
    switch (r.kind) {
      case ResponseKind::binary: names[i] = {"false", "true"}; break;
      case ResponseKind::categorical:
        for (int c = 0; c < r.count; ++c) names[i].push_back(std::to_string(c));
        break;
      case ResponseKind::ordinal:
        for (int c = 1; c <= r.count; ++c) names[i].push_back(std::to_string(c));
        break;
      case ResponseKind::temporal:
        for (const char* part : {"start", "end"})
          for (const char* who : {"e1", "e2", "both"}) names[i].push_back(std::string(part) + "-locked:" + who);
        for (const char* o : {"e1-earlier", "tie", "e2-earlier"}) names[i].push_back(std::string("order:") + o);
        break;
    }
    counts[i].assign(names[i].size(), 0);
  }
  st.documents = static_cast<std::int64_t>(corpus.size());
  for (const auto& d : corpus) {
    st.sentences += static_cast<std::int64_t>(d.sentences.size());
    for (const auto& s : d.sentences) {
      st.predicates += static_cast<std::int64_t>(s.predicates.size());
      st.arguments += static_cast<std::int64_t>(s.arguments.size());
      st.semantics_edges += static_cast<std::int64_t>(s.edges.size());
    }
    st.document_edges += static_cast<std::int64_t>(d.doc_edges.size());
    st.annotations += static_cast<std::int64_t>(d.annotations.size());
    for (const auto& a : d.annotations) {
      const auto i = schema.index_of(a.property);
      const auto& r = schema.at(i).response;
      switch (r.kind) {
        case ResponseKind::binary: ++counts[i][std::get<bool>(a.value) ? 1 : 0]; break;
        case ResponseKind::categorical: ++counts[i][std::get<int>(a.value)]; break;
        case ResponseKind::ordinal: ++counts[i][std::get<int>(a.value) - 1]; break;
        case ResponseKind::temporal: {
          const auto& t = std::get<TemporalTuple>(a.value);
          ++counts[i][static_cast<int>(t.lock_start)];
          ++counts[i][3 + static_cast<int>(t.lock_end)];
          if (t.free_order) ++counts[i][6 + static_cast<int>(*t.free_order)];
          break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& spec = schema.at(i);
    // Temporal categories overlap; percentages use the record count.
    std::int64_t records = 0;
    if (spec.response.kind == ResponseKind::temporal) {
      records = counts[i][0] + counts[i][1] + counts[i][2];
    } else {
      for (auto c : counts[i]) records += c;
    }
    for (std::size_t c = 0; c < names[i].size(); ++c) {
      const double pct = records > 0 ? 100.0 * static_cast<double>(counts[i][c]) / static_cast<double>(records) : 0.0;
      st.rows.push_back({to_string(spec.group()), spec.name, names[i][c], counts[i][c], pct});
    }
  }
  return st;
}

namespace {

std::string with_commas(std::int64_t n) {
  std::string digits = std::to_string(n < 0 ? -n : n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return n < 0 ? "-" + out : out;
}

}  // namespace

std::string format_stats(const CorpusStats& st) {
  std::ostringstream os;
  os << "documents " << with_commas(st.documents) << '\n'
     << "sentences " << with_commas(st.sentences) << '\n'
     << "predicates " << with_commas(st.predicates) << '\n'
     << "arguments " << with_commas(st.arguments) << '\n'
     << "semantics_edges " << with_commas(st.semantics_edges) << '\n'
     << "document_edges " << with_commas(st.document_edges) << '\n'
     << "annotations " << with_commas(st.annotations) << '\n';
  char pct[32];
  for (const auto& r : st.rows) {
    std::snprintf(pct, sizeof pct, "%.0f%%", r.percent);
    os << r.group << '\t' << r.property << '\t' << r.category << '\t' << with_commas(r.count) << " (" << pct << ")\n";
  }
  return os.str();
}

}  // namespace eventstruct
