#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eventstruct/corpus.hpp"
#include "eventstruct/interval.hpp"
#include "eventstruct/learning.hpp"
#include "eventstruct/model.hpp"

namespace eventstruct {

// One annotated element and its annotations on the properties of one group.
struct MixtureItem {
  struct Record {
    int property = 0;  // index into the group's sub-schema
    std::string annotator;
    int code = 0;
    double weight = 1.0;
  };
  std::string document;
  std::string element;
  std::vector<Record> records;
};

// The group's properties as a schema of their own (gates stay within a group).
Schema group_schema(const Schema& schema, Group group);

// Every element carrying at least one annotation of a property in `group`,
// in corpus order. Weights are ridit confidences when confidence_weighting.
std::vector<MixtureItem> mixture_items(const Corpus& corpus, const Schema& schema, Group group,
                                       bool confidence_weighting);

struct MixtureConfig {
  int restarts = 5;
  int max_em_iters = 100;
  double tol = 1e-6;  // stop when the objective gains less than tol * |objective|
  FitConfig fit;      // Adam, rho/sigma and init settings; fit.seed seeds the restarts
  int threads = 1;

  // Generalized EM: a partial M-step per iteration is enough for a flat mixture.
  MixtureConfig() { fit.m_step_iters = 50; }
  void validate() const;
};

struct MixtureFit {
  Group group = Group::event;
  int k = 1;
  std::vector<double> weights;  // mixing proportions
  ModelParams params;           // group sub-schema, k types for the group
  double objective = 0.0;       // train log-evidence + intercept log prior
  int iterations = 0;
  int restart = 0;
  std::vector<double> dev_evidence;  // per dev item
};

MixtureFit fit_mixture(const std::vector<MixtureItem>& train, const std::vector<MixtureItem>& dev, const Schema& schema,
                       Group group, int k, const MixtureConfig& config);

// Exact per-item log-evidence log sum_t pi_t prod f(x | t), and responsibilities.
std::vector<double> mixture_log_evidence(const MixtureFit& fit, const std::vector<MixtureItem>& items);
std::vector<std::vector<double>> mixture_responsibilities(const MixtureFit& fit, const std::vector<MixtureItem>& items);

// Percentile interval of mean(b) - mean(a) over item resamples.
Interval bootstrap_diff_ci(const std::vector<double>& a, const std::vector<double>& b, int resamples = 1000,
                           double level = 0.95, std::uint64_t seed = 0, int threads = 1);

struct SelectionConfig {
  MixtureConfig mixture;
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct SelectionReport {
  Group group = Group::event;
  std::vector<int> candidates;
  std::vector<double> dev_evidence;  // summed per candidate
  std::vector<double> train_objective;
  std::vector<std::vector<double>> item_evidence;  // per candidate, per dev item
  // Interval of the per-item dev-evidence difference (candidate - chosen).
  std::vector<Interval> vs_chosen;
  int chosen = 1;
};

// Smallest candidate K such that no larger candidate's interval vs K lies
// strictly above 0.
int choose_k(const std::vector<int>& candidates, const std::vector<std::vector<double>>& item_evidence,
             const SelectionConfig& config);

SelectionReport select_k(const std::vector<MixtureItem>& train, const std::vector<MixtureItem>& dev,
                         const Schema& schema, Group group, const std::vector<int>& candidates,
                         const SelectionConfig& config);

std::string format_report(const SelectionReport& report);

}  // namespace eventstruct
