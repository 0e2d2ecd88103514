#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eventstruct/agreement.hpp"
#include "eventstruct/analysis.hpp"
#include "eventstruct/errors.hpp"
#include "eventstruct/learning.hpp"
#include "eventstruct/synth.hpp"

namespace py = pybind11;
using namespace eventstruct;

namespace {

py::list posteriors_to_py(const std::vector<PosteriorSet>& sets) {
  py::list out;
  for (const auto& s : sets)
    for (const auto& m : s.marginals) {
      py::dict row;
      row["document"] = s.document;
      row["element"] = m.element;
      row["group"] = to_string(m.kind);
      row["probs"] = m.probs;
      out.append(row);
    }
  return out;
}

TypeInventory inventory_from(const py::dict& d) {
  TypeInventory inv;
  for (auto [k, v] : d) inv.count(parse_group(py::cast<std::string>(k))) = py::cast<int>(v);
  return inv;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Latent type induction over decompositional semantic annotations";

  static py::exception<Error> base(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UndefinedAgreement& e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(e.category() == ErrorCategory::data ? PyExc_ValueError : PyExc_RuntimeError, e.what());
    }
  });

  py::class_<Schema>(m, "Schema")
      .def("__len__", &Schema::size)
      .def_property_readonly("names",
                             [](const Schema& s) {
                               std::vector<std::string> out;
                               for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s.at(i).name);
                               return out;
                             })
      .def("to_json", [](const Schema& s) { return schema_to_json(s).dump(); });
  m.def("default_schema", &default_schema);
  m.def("load_schema", &load_schema, py::arg("path"));

  py::class_<DocumentGraph>(m, "Document")
      .def_readonly("id", &DocumentGraph::id)
      .def_property_readonly("annotation_count", [](const DocumentGraph& d) { return d.annotations.size(); });

  m.def("load_corpus",
        [](const std::string& path, const Schema& schema) { return ridit_score_corpus(load_corpus(path, schema), schema); },
        py::arg("path"), py::arg("schema"), "Load and ridit-score a corpus file.");
  m.def("save_corpus", &save_corpus, py::arg("corpus"), py::arg("path"));
  m.def(
      "corpus_stats",
      [](const Corpus& c, const Schema& s) {
        const auto st = corpus_stats(c, s);
        py::dict d;
        d["documents"] = st.documents;
        d["predicates"] = st.predicates;
        d["arguments"] = st.arguments;
        d["semantics_edges"] = st.semantics_edges;
        d["document_edges"] = st.document_edges;
        d["annotations"] = st.annotations;
        return d;
      },
      py::arg("corpus"), py::arg("schema"));

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly("schema", [](const ModelParams& p) { return p.schema; })
      .def_property_readonly("inventory",
                             [](const ModelParams& p) {
                               py::dict d;
                               for (int g = 0; g < kGroupCount; ++g)
                                 d[py::str(to_string(static_cast<Group>(g)))] = p.inventory.count(static_cast<Group>(g));
                               return d;
                             })
      .def("mu", [](const ModelParams& p, const std::string& property) { return p.property(p.schema.index_of(property)).mu; })
      .def("to_json", [](const ModelParams& p) { return params_to_json(p).dump(); });
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("path"));

  m.def(
      "synth",
      [](std::uint64_t seed, int documents, const py::dict& inventory, double separation, int annotators_per_item) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.documents = documents;
        if (!inventory.empty()) cfg.inventory = inventory_from(inventory);
        cfg.separation = separation;
        cfg.annotators_per_item = annotators_per_item;
        auto r = sample_corpus(cfg);
        py::dict out;
        out["corpus"] = std::move(r.corpus);
        out["labels"] = r.truth.labels;
        out["params"] = std::move(r.params);
        out["schema"] = cfg.schema;
        return out;
      },
      py::arg("seed") = 1, py::arg("documents") = 10, py::arg("inventory") = py::dict(), py::arg("separation") = 4.0,
      py::arg("annotators_per_item") = 3, "Sample a synthetic corpus; returns corpus, labels, params and schema.");

  m.def(
      "fit",
      [](const Corpus& train, const Corpus& dev, const Schema& schema, const py::dict& inventory, std::uint64_t seed,
         int max_iters, int restarts, bool confidence_weighting, int threads) {
        FitConfig cfg;
        cfg.seed = seed;
        cfg.max_em_iters = max_iters;
        cfg.restarts = restarts;
        cfg.confidence_weighting = confidence_weighting;
        cfg.threads = threads;
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(train, dev, schema, inventory_from(inventory), cfg);
        }
        py::dict out;
        out["params"] = r.params;
        out["train_evidence"] = r.train_evidence;
        out["dev_evidence"] = r.dev_evidence;
        out["posteriors"] = posteriors_to_py(r.posteriors);
        out["iterations"] = r.iterations;
        out["stopped"] = to_string(r.stopped_reason);
        return out;
      },
      py::arg("train"), py::arg("dev"), py::arg("schema"), py::arg("inventory"), py::arg("seed") = 0,
      py::arg("max_iters") = 50, py::arg("restarts") = 1, py::arg("confidence_weighting") = true,
      py::arg("threads") = 1);

  m.def(
      "posteriors",
      [](const Corpus& corpus, const ModelParams& params, bool confidence_weighting, int threads) {
        FitConfig cfg;
        cfg.confidence_weighting = confidence_weighting;
        cfg.threads = threads;
        return posteriors_to_py(e_step(corpus, params, cfg));
      },
      py::arg("corpus"), py::arg("params"), py::arg("confidence_weighting") = true, py::arg("threads") = 1);

  m.def(
      "krippendorff_alpha",
      [](const std::vector<std::vector<int>>& units, const std::string& metric) {
        return krippendorff_alpha(units, parse_metric(metric));
      },
      py::arg("units"), py::arg("metric") = "nominal", "Alpha over per-item value lists.");

  m.def(
      "ridit_table",
      [](const std::array<std::int64_t, kConfidenceLevels>& counts) { return ridit_table(counts); },
      py::arg("counts"));

  m.def(
      "summarize_types",
      [](const ModelParams& params, double na_threshold) {
        py::list out;
        for (const auto& t : summarize_types(params, na_threshold).tables) {
          py::dict d;
          d["group"] = to_string(t.group);
          d["properties"] = t.properties;
          d["probability"] = t.probability;
          out.append(d);
        }
        return out;
      },
      py::arg("params"), py::arg("na_threshold") = kNotApplicableThreshold);

  m.attr("__version__") = EVENTSTRUCT_VERSION;
}
