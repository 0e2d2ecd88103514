#include <CLI11.hpp>

#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "eventstruct/agreement.hpp"
#include "eventstruct/analysis.hpp"
#include "eventstruct/errors.hpp"
#include "eventstruct/learning.hpp"
#include "eventstruct/selection.hpp"
#include "eventstruct/synth.hpp"
#include "io.hpp"

using namespace eventstruct;
using namespace eventstruct::cli;

namespace {

constexpr int kUsageExit = 2;
constexpr int kDataExit = 3;
constexpr int kComputeExit = 4;

struct Command {
  CLI::App* app = nullptr;
  std::function<void(Manifest&)> run;
  std::string out;
};

nlohmann::json resolved_config(const CLI::App& sub) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
    const auto& name = opt->get_lnames()[0];
    if (opt->count() > 0) {
      const auto res = opt->results();
      j[name] = res.size() == 1 ? nlohmann::json(res[0]) : nlohmann::json(res);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

Schema schema_or_default(const std::string& path, Manifest& m) {
  if (path.empty()) return default_schema();
  m.input(path);
  return load_schema(path);
}

Corpus scored_corpus(const std::string& path, const Schema& schema, Manifest& m) {
  m.input(path);
  return ridit_score_corpus(load_corpus(path, schema), schema);
}

void add_inventory(CLI::App* app, TypeInventory& inv) {
  app->add_option("--k-event", inv.event, "Event types");
  app->add_option("--k-entity", inv.entity, "Entity types");
  app->add_option("--k-role", inv.role, "Role types");
  app->add_option("--k-relation", inv.relation, "Relation types");
}

Group group_option(const std::string& s) {
  try {
    return parse_group(s);
  } catch (const std::exception&) {
    throw ArgumentError("unknown group '" + s + "'");
  }
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream o;
  o.precision(10);
  o << *v;
  return o.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event, entity, role and relation type induction from decompositional annotations"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML config file; [subcommand] sections set that subcommand's flags")
      ->envname("EVENTSTRUCT_CONFIG");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", EVENTSTRUCT_VERSION);

  std::deque<Command> commands;  // stable addresses: options bind to members
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    commands.push_back({app.add_subcommand(name, help), {}, {}});
    Command& c = commands.back();
    c.app->add_option("--out", c.out, "Output directory")->required();
    return c;
  };

  // ingest
  std::string in_corpus, in_schema;
  {
    auto& c = add("ingest", "Validate a corpus, ridit-score it and write the canonical form");
    c.app->add_option("--corpus", in_corpus, "Corpus file (one document per line)")->required()->check(CLI::ExistingFile);
    c.app->add_option("--schema", in_schema, "Schema file (default: built-in schema)")->check(CLI::ExistingFile);
    c.run = [&](Manifest& m) {
      const auto schema = schema_or_default(in_schema, m);
      const auto corpus = scored_corpus(in_corpus, schema, m);
      save_corpus(corpus, m.output("corpus.jsonl"));
      write_text(m.output("stats.txt"), format_stats(corpus_stats(corpus, schema)));
    };
  }

  // synth
  SynthConfig sc;
  std::string sy_schema;
  {
    auto& c = add("synth", "Sample a synthetic corpus with known types and parameters");
    c.app->add_option("--seed", sc.seed, "Random seed");
    c.app->add_option("--docs", sc.documents, "Documents");
    c.app->add_option("--sentences", sc.sentences, "Sentences per document");
    c.app->add_option("--predicates", sc.predicates, "Predicates per sentence");
    c.app->add_option("--arguments", sc.arguments, "Arguments per predicate");
    c.app->add_option("--eventive-probability", sc.eventive_probability, "Chance an argument is eventive");
    c.app->add_option("--annotator-pool", sc.annotator_pool, "Annotators available");
    c.app->add_option("--annotators-per-item", sc.annotators_per_item, "Annotators per item");
    c.app->add_option("--window", sc.window, "Relation window in sentences");
    c.app->add_option("--relation-rate", sc.relation_rate, "Share of window pairs with a document edge");
    c.app->add_option("--separation", sc.separation, "Logit gap between contrasting types");
    c.app->add_option("--rho-sd", sc.rho_sd, "Annotator intercept scale");
    c.app->add_option("--confidence-level", sc.confidence_level, "Constant raw confidence level");
    c.app->add_option("--schema", sy_schema, "Schema file (default: built-in schema)")->check(CLI::ExistingFile);
    add_inventory(c.app, sc.inventory);
    c.run = [&](Manifest& m) {
      if (!sy_schema.empty()) sc.schema = schema_or_default(sy_schema, m);
      m.set_seed(sc.seed);
      const auto r = sample_corpus(sc);
      save_schema(sc.schema, m.output("schema.json"));
      save_corpus(r.corpus, m.output("corpus.jsonl"));
      save_checkpoint(r.params, m.output("truth_params.json"));
      std::ostringstream truth;
      truth << "element\ttype\n";
      for (const auto& [element, type] : r.truth.labels) truth << element << '\t' << type << '\n';
      write_text(m.output("truth.tsv"), truth.str());
      write_text(m.output("stats.txt"), format_stats(corpus_stats(r.corpus, sc.schema)));
    };
  }

  // fit
  FitConfig fc;
  fc.restarts = 5;
  TypeInventory fit_inv{3, 2, 2, 2};
  std::string fit_corpus, fit_dev, fit_schema, fit_relations = "document-edges";
  bool fit_unweighted = false;
  {
    auto& c = add("fit", "Fit the model by EM with loopy belief propagation");
    c.app->add_option("--corpus", fit_corpus, "Training corpus")->required()->check(CLI::ExistingFile);
    c.app->add_option("--dev", fit_dev, "Development corpus for early stopping")->check(CLI::ExistingFile);
    c.app->add_option("--schema", fit_schema, "Schema file (default: built-in schema)")->check(CLI::ExistingFile);
    add_inventory(c.app, fit_inv);
    c.app->add_option("--seed", fc.seed, "Random seed");
    c.app->add_option("--restarts", fc.restarts, "Independent initializations");
    c.app->add_option("--max-iters", fc.max_em_iters, "EM iterations");
    c.app->add_option("--m-step-iters", fc.m_step_iters, "Adam steps per M-step");
    c.app->add_option("--learning-rate", fc.learning_rate, "Adam learning rate");
    c.app->add_option("--init-sd", fc.init_sd, "Initial spread of type means");
    c.app->add_option("--window", fc.window, "Relation window in sentences");
    c.app->add_option("--relations", fit_relations, "Relation variables: document-edges or window-pairs")
        ->check(CLI::IsMember({"document-edges", "window-pairs"}));
    c.app->add_option("--bp-max-iters", fc.bp.max_iters, "BP iterations");
    c.app->add_option("--bp-damping", fc.bp.damping, "BP damping");
    c.app->add_option("--bp-tol", fc.bp.tol, "BP convergence tolerance");
    c.app->add_flag("--no-confidence-weighting", fit_unweighted, "Weight every annotation by 1");
    c.app->add_option("--threads", fc.threads, "Worker threads");
    c.run = [&](Manifest& m) {
      const auto schema = schema_or_default(fit_schema, m);
      const auto train = scored_corpus(fit_corpus, schema, m);
      const auto dev = fit_dev.empty() ? Corpus{} : scored_corpus(fit_dev, schema, m);
      fc.confidence_weighting = !fit_unweighted;
      fc.relations = fit_relations == "window-pairs" ? RelationScope::window_pairs : RelationScope::document_edges;
      m.set_seed(fc.seed);
      const auto res = fit(train, dev, schema, fit_inv, fc, [](int it, double tr, double dv) {
        std::cerr << "iter " << it << " train " << tr << " dev " << dv << '\n';
      });
      save_checkpoint(res.params, m.output("checkpoint.json"));
      std::ostringstream trace;
      trace.precision(17);
      trace << "iteration\ttrain_evidence\tdev_evidence\n";
      for (std::size_t i = 0; i < res.train_evidence.size(); ++i)
        trace << i << '\t' << res.train_evidence[i] << '\t' << res.dev_evidence[i] << '\n';
      write_text(m.output("trace.tsv"), trace.str());
      write_posteriors(res.posteriors, m.output("posteriors.tsv"));
      std::cerr << "kept restart " << res.restart << ", " << res.iterations << " M-steps, stopped on "
                << to_string(res.stopped_reason) << '\n';
    };
  }

  // posteriors
  std::string po_ckpt, po_corpus, po_relations = "document-edges";
  FitConfig pc;
  bool po_unweighted = false;
  {
    auto& c = add("posteriors", "Posterior type marginals for a corpus under a checkpoint");
    c.app->add_option("--checkpoint", po_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--corpus", po_corpus, "Corpus file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--window", pc.window, "Relation window in sentences");
    c.app->add_option("--relations", po_relations, "Relation variables: document-edges or window-pairs")
        ->check(CLI::IsMember({"document-edges", "window-pairs"}));
    c.app->add_option("--bp-max-iters", pc.bp.max_iters, "BP iterations");
    c.app->add_option("--bp-damping", pc.bp.damping, "BP damping");
    c.app->add_option("--bp-tol", pc.bp.tol, "BP convergence tolerance");
    c.app->add_flag("--no-confidence-weighting", po_unweighted, "Weight every annotation by 1");
    c.app->add_option("--threads", pc.threads, "Worker threads");
    c.run = [&](Manifest& m) {
      m.input(po_ckpt);
      const auto params = load_checkpoint(po_ckpt);
      const auto corpus = scored_corpus(po_corpus, params.schema, m);
      pc.confidence_weighting = !po_unweighted;
      pc.relations = po_relations == "window-pairs" ? RelationScope::window_pairs : RelationScope::document_edges;
      write_posteriors(e_step(corpus, params, pc), m.output("posteriors.tsv"));
    };
  }

  // select-k
  SelectionConfig sel;
  std::string sk_corpus, sk_dev, sk_schema, sk_group = "event";
  std::vector<int> sk_candidates{1, 2, 3, 4, 5, 6};
  bool sk_unweighted = false;
  {
    auto& c = add("select-k", "Choose a type count per group by held-out evidence");
    c.app->add_option("--corpus", sk_corpus, "Training corpus")->required()->check(CLI::ExistingFile);
    c.app->add_option("--dev", sk_dev, "Development corpus")->required()->check(CLI::ExistingFile);
    c.app->add_option("--schema", sk_schema, "Schema file (default: built-in schema)")->check(CLI::ExistingFile);
    c.app->add_option("--group", sk_group, "event, entity, role or relation");
    c.app->add_option("--candidates", sk_candidates, "Candidate type counts")->delimiter(',');
    c.app->add_option("--restarts", sel.mixture.restarts, "Initializations per candidate");
    c.app->add_option("--max-em-iters", sel.mixture.max_em_iters, "EM iterations per fit");
    c.app->add_option("--resamples", sel.resamples, "Bootstrap resamples");
    c.app->add_option("--level", sel.level, "Interval level");
    c.app->add_option("--seed", sel.seed, "Random seed");
    c.app->add_flag("--no-confidence-weighting", sk_unweighted, "Weight every annotation by 1");
    c.app->add_option("--threads", sel.mixture.threads, "Worker threads");
    c.run = [&](Manifest& m) {
      const auto schema = schema_or_default(sk_schema, m);
      const auto group = group_option(sk_group);
      const auto train = mixture_items(scored_corpus(sk_corpus, schema, m), schema, group, !sk_unweighted);
      const auto dev = mixture_items(scored_corpus(sk_dev, schema, m), schema, group, !sk_unweighted);
      m.set_seed(sel.seed);
      sel.mixture.fit.seed = sel.seed;
      const auto rep = select_k(train, dev, schema, group, sk_candidates, sel);
      nlohmann::ordered_json j;
      j["group"] = to_string(rep.group);
      j["chosen"] = rep.chosen;
      j["candidates"] = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < rep.candidates.size(); ++i)
        j["candidates"].push_back({{"k", rep.candidates[i]},
                                   {"dev_evidence", rep.dev_evidence[i]},
                                   {"train_objective", rep.train_objective[i]},
                                   {"ci_vs_chosen", {rep.vs_chosen[i].lo, rep.vs_chosen[i].hi}}});
      write_text(m.output("selection.json"), j.dump(2) + "\n");
      write_text(m.output("selection.tsv"), format_report(rep));
    };
  }

  // summarize
  std::string su_ckpt, su_schema;
  double su_na = kNotApplicableThreshold;
  bool su_long = false;
  {
    auto& c = add("summarize", "Per-type property probabilities from a checkpoint");
    c.app->add_option("--checkpoint", su_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--schema", su_schema, "Expected schema file")->check(CLI::ExistingFile);
    c.app->add_option("--na-threshold", su_na, "Gate probability below which a cell is NA");
    c.app->add_flag("--long", su_long, "Also write a long-format table");
    c.run = [&](Manifest& m) {
      m.input(su_ckpt);
      const auto params = load_checkpoint(su_ckpt);
      const auto s = su_schema.empty() ? summarize_types(params, su_na)
                                       : summarize_types(params, schema_or_default(su_schema, m), su_na);
      write_text(m.output("summary.tsv"), format_summary(s));
      if (su_long) write_text(m.output("summary_long.tsv"), format_summary_long(s));
    };
  }

  // compare-fits
  std::string cf_a, cf_b;
  std::vector<std::string> cf_groups{"event", "entity", "role", "relation"};
  {
    auto& c = add("compare-fits", "Row-normalized confusion between two posterior tables");
    c.app->add_option("--a", cf_a, "Posterior table A")->required()->check(CLI::ExistingFile);
    c.app->add_option("--b", cf_b, "Posterior table B")->required()->check(CLI::ExistingFile);
    c.app->add_option("--groups", cf_groups, "Groups to compare")->delimiter(',');
    c.run = [&](Manifest& m) {
      m.input(cf_a);
      m.input(cf_b);
      const auto a = read_posteriors(cf_a);
      const auto b = read_posteriors(cf_b);
      for (const auto& g : cf_groups) {
        const auto group = group_option(g);
        bool present = false;
        for (const auto& s : a)
          for (const auto& v : s.marginals) present = present || v.kind == group;
        if (!present) continue;
        write_text(m.output("confusion_" + g + ".tsv"), format_confusion(confusion(a, b, group)));
      }
    };
  }

  // entropy
  std::string en_post;
  {
    auto& c = add("entropy", "Mean and median normalized posterior entropy per group");
    c.app->add_option("--posteriors", en_post, "Posterior table")->required()->check(CLI::ExistingFile);
    c.run = [&](Manifest& m) {
      m.input(en_post);
      const auto post = read_posteriors(en_post);
      std::ostringstream out;
      out.precision(10);
      out << "group\tmean\tmedian\telements\n";
      for (int g = 0; g < kGroupCount; ++g) {
        const auto group = static_cast<Group>(g);
        bool present = false;
        for (const auto& s : post)
          for (const auto& v : s.marginals) present = present || v.kind == group;
        if (!present) continue;
        const auto e = entropy_stats(post, group);
        out << to_string(group) << '\t' << e.mean << '\t' << e.median << '\t' << e.elements << '\n';
      }
      write_text(m.output("entropy.tsv"), out.str());
    };
  }

  // agreement
  std::string ag_table, ag_corpus, ag_schema, ag_property, ag_metric = "nominal";
  int ag_categories = 0, ag_resamples = 1000, ag_threads = 1;
  double ag_level = 0.95;
  std::uint64_t ag_seed = 0;
  std::vector<double> ag_thresholds{0.0};
  std::vector<std::string> ag_panel;
  {
    auto& c = add("agreement", "Krippendorff's alpha, confidence-thresholded curves and panel comparisons");
    auto* table = c.app->add_option("--table", ag_table, "Long-format table: item, annotator, value[, confidence]")
                      ->check(CLI::ExistingFile);
    auto* corpus = c.app->add_option("--corpus", ag_corpus, "Corpus file")->check(CLI::ExistingFile);
    table->excludes(corpus);
    c.app->add_option("--schema", ag_schema, "Schema file (with --corpus)")->check(CLI::ExistingFile);
    c.app->add_option("--property", ag_property, "Property to read (with --corpus)")->needs(corpus);
    c.app->add_option("--categories", ag_categories, "Response space size for --table (0: unchecked)");
    c.app->add_option("--metric", ag_metric, "nominal, ordinal or ordinal-rank");
    c.app->add_option("--thresholds", ag_thresholds, "Confidence thresholds")->delimiter(',');
    c.app->add_option("--resamples", ag_resamples, "Bootstrap resamples (0: no intervals)");
    c.app->add_option("--level", ag_level, "Interval level");
    c.app->add_option("--seed", ag_seed, "Random seed");
    c.app->add_option("--panel", ag_panel, "Expert annotators; others are scored against them")->delimiter(',');
    c.app->add_option("--threads", ag_threads, "Worker threads");
    c.run = [&](Manifest& m) {
      const auto metric = parse_metric(ag_metric);
      m.set_seed(ag_seed);
      ReliabilityMatrix data;
      if (!ag_table.empty()) {
        m.input(ag_table);
        data = read_reliability(ag_table, ag_categories);
      } else if (!ag_corpus.empty() && !ag_property.empty()) {
        const auto schema = schema_or_default(ag_schema, m);
        data = ReliabilityMatrix::from_corpus(scored_corpus(ag_corpus, schema, m), schema, ag_property);
      } else {
        throw ArgumentError("agreement: give --table, or --corpus with --property");
      }
      const bool has_conf = std::all_of(data.cells().begin(), data.cells().end(),
                                        [](const auto& cell) { return cell.confidence.has_value(); });
      std::ostringstream a;
      a << "metric\talpha\titems\tpairable_items\tci_lo\tci_hi\n";
      const auto alpha = try_alpha(data, metric);
      std::optional<Interval> ci;
      if (alpha && ag_resamples > 0) ci = bootstrap_alpha_ci(data, metric, ag_resamples, ag_level, ag_seed, ag_threads);
      a << to_string(metric) << '\t' << fmt(alpha) << '\t' << data.items().size() << '\t' << data.pairable_items()
        << '\t' << fmt(ci ? std::optional(ci->lo) : std::nullopt) << '\t'
        << fmt(ci ? std::optional(ci->hi) : std::nullopt) << '\n';
      write_text(m.output("alpha.tsv"), a.str());
      if (has_conf && !data.empty()) {
        std::ostringstream cv;
        cv << "threshold\talpha\tcoverage\tci_lo\tci_hi\n";
        for (const auto& p : thresholded_alpha(data, ag_thresholds, metric, ag_resamples, ag_level, ag_seed, ag_threads))
          cv << p.threshold << '\t' << fmt(p.alpha) << '\t' << fmt(p.coverage) << '\t'
             << fmt(p.ci ? std::optional(p.ci->lo) : std::nullopt) << '\t'
             << fmt(p.ci ? std::optional(p.ci->hi) : std::nullopt) << '\n';
        write_text(m.output("curve.tsv"), cv.str());
      }
      if (!ag_panel.empty()) {
        std::vector<std::string> others;
        for (const auto& name : data.annotators())
          if (std::find(ag_panel.begin(), ag_panel.end(), name) == ag_panel.end()) others.push_back(name);
        std::ostringstream iv;
        iv << "annotator\talpha\n";
        for (const auto& r :
             pairwise_alpha_vs_panel(data.with_annotators(ag_panel), data.with_annotators(others), metric))
          iv << r.annotator << '\t' << fmt(r.alpha) << '\n';
        write_text(m.output("individuals.tsv"), iv.str());
      }
    };
  }

  // export-features
  std::string ex_corpus, ex_post, ex_schema;
  {
    auto& c = add("export-features", "Posterior feature vectors for arguments and predicates");
    c.app->add_option("--corpus", ex_corpus, "Corpus file")->required()->check(CLI::ExistingFile);
    c.app->add_option("--posteriors", ex_post, "Posterior table")->required()->check(CLI::ExistingFile);
    c.app->add_option("--schema", ex_schema, "Schema file (default: built-in schema)")->check(CLI::ExistingFile);
    c.run = [&](Manifest& m) {
      const auto schema = schema_or_default(ex_schema, m);
      m.input(ex_corpus);
      const auto corpus = load_corpus(ex_corpus, schema);
      m.input(ex_post);
      const auto post = read_posteriors(ex_post);
      TypeInventory inv;
      for (const auto& s : post)
        for (const auto& v : s.marginals) inv.count(v.kind) = static_cast<int>(v.probs.size());
      const auto f = export_features(corpus, post, inv);
      write_text(m.output("argument_features.tsv"), format_features(f.arguments));
      write_text(m.output("predicate_features.tsv"), format_features(f.predicates));
    };
  }

  if (argc < 2) {
    std::cerr << app.help();
    return kUsageExit;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      Manifest m(c.app->get_name(), c.out);
      m.set_config(resolved_config(*c.app));
      c.run(m);
      m.write();
      return 0;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return e.category() == ErrorCategory::compute ? kComputeExit : kDataExit;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kDataExit;
    } catch (const std::filesystem::filesystem_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kDataExit;
    }
  }
  return kUsageExit;
}
