#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eventstruct/corpus.hpp"
#include "eventstruct/factorgraph.hpp"
#include "eventstruct/model.hpp"

namespace eventstruct {

struct FitConfig {
  int window = 2;
  int max_em_iters = 50;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int m_step_iters = 200;
  // Adam stops early once an accepted step gains less than this times
  // max(1, |objective|).
  double m_step_tol = 1e-10;
  BpOptions bp;
  std::uint64_t seed = 0;
  bool confidence_weighting = true;
  bool weight_dev_evidence = true;  // dev evidence uses the same weights as training
  bool estimate_rho = true;         // false holds intercepts at their current values
  bool update_sigma = true;
  bool update_priors = true;
  double init_sd = 0.5;
  RelationScope relations = RelationScope::document_edges;
  int threads = 1;
  // Independent initializations; the run with the highest final train
  // evidence is kept. Restart 0 uses `seed` itself.
  int restarts = 1;

  void validate() const;
  GraphOptions graph_options(bool weighted) const;
};

// Layouts depend on the parameters only through annotator slots, which are
// fixed for a fit, so they are built once per corpus.
std::vector<DocumentLayout> layout_corpus(const Corpus& corpus, const ModelParams& params,
                                          const GraphOptions& options, int threads = 1);

std::vector<PosteriorSet> e_step(const std::vector<DocumentLayout>& layouts, const ModelParams& params,
                                 const FitConfig& config);
std::vector<PosteriorSet> e_step(const Corpus& corpus, const ModelParams& params, const FitConfig& config);

struct MStepTrace {
  // Per property, the expected complete-data objective after each accepted
  // Adam step (first entry: the starting value).
  std::vector<std::vector<double>> objective;
};

ModelParams m_step(const std::vector<DocumentLayout>& layouts, const std::vector<PosteriorSet>& posteriors,
                   const ModelParams& params, const FitConfig& config, MStepTrace* trace = nullptr);
ModelParams m_step(const Corpus& corpus, const std::vector<PosteriorSet>& posteriors, const ModelParams& params,
                   const FitConfig& config, MStepTrace* trace = nullptr);

// Expected complete-data objective of one property (annotation terms plus the
// intercept prior) and its gradient, for the M-step and for tests.
struct PropertyObjective {
  // (annotator slot, outcome code) -> per-type expected weight
  std::vector<std::pair<std::pair<int, int>, std::vector<double>>> stats;

  double value(const PropertyParams& p, bool with_prior) const;
  double value_grad(const PropertyParams& p, bool with_prior, std::vector<double>& g_mu,
                    std::vector<double>& g_shared, std::vector<double>& g_rho) const;
};

std::vector<PropertyObjective> property_objectives(const std::vector<DocumentLayout>& layouts,
                                                   const std::vector<PosteriorSet>& posteriors,
                                                   const ModelParams& params);

enum class StopReason { dev_decrease, max_iters };
std::string to_string(StopReason r);

struct FitResult {
  ModelParams params;
  std::vector<double> train_evidence;
  std::vector<double> dev_evidence;
  std::vector<PosteriorSet> posteriors;  // training documents, at params
  StopReason stopped_reason = StopReason::max_iters;
  int iterations = 0;  // M-steps taken to reach params
  int restart = 0;     // which initialization produced this result
};

// Called after each evaluation with (iteration, train evidence, dev evidence).
// Iterations restart from 0 for each initialization.
using FitProgress = std::function<void(int, double, double)>;

FitResult fit(const Corpus& train, const Corpus& dev, const Schema& schema, const TypeInventory& inventory,
              const FitConfig& config, const FitProgress& progress = {});
// Starts from the given parameters instead of a seeded initialization.
FitResult fit_from(const Corpus& train, const Corpus& dev, ModelParams init, const FitConfig& config,
                   const FitProgress& progress = {});

// Posterior argmax per variable (lowest index on ties).
std::vector<int> map_types(const PosteriorSet& posteriors);

}  // namespace eventstruct
