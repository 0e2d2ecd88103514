#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eventstruct/corpus.hpp"
#include "eventstruct/schema.hpp"

namespace eventstruct {

// Logits are clamped to this range before exponentiation.
inline constexpr double kLogitClamp = 30.0;
// Eigenvalue floor applied to the annotator-intercept covariance.
inline constexpr double kSigmaFloor = 1e-4;

double sigmoid(double x);
double log_sigmoid(double x);

// ---------------------------------------------------------------------------
// Primitive log-likelihoods. Each optionally writes the gradient with respect
// to its linear predictor(s); for the mixed-model families the predictor is
// mu + rho, so d/dmu and d/drho coincide.

// log Bern(x | logit^-1(mu + rho))
double binary_loglik(double mu, double rho, bool x, double* d_eta = nullptr);

// log softmax(mu + rho)[x]. d_eta (if non-empty) receives onehot(x) - softmax.
double categorical_loglik(std::span<const double> mu, std::span<const double> rho, int x,
                          std::span<double> d_eta = {});

// Cumulative-logit model: P(x <= j) = logit^-1(c_j - mu) with strictly
// increasing cutpoints c_1..c_{J-1}; level is 1-based.
double ordinal_loglik(double mu, std::span<const double> cutpoints, int level, double* d_mu = nullptr,
                      std::span<double> d_cutpoints = {});

// absent: log(1 - g); present: log g + base, g = logit^-1(gate_mu + gate_rho).
// d_gate receives d/d(gate logit).
double hurdle_loglik(double gate_mu, double gate_rho, std::optional<double> present_base,
                     double* d_gate = nullptr);

struct TemporalOutcome {
  Lock start = Lock::both;
  Lock end = Lock::both;
  std::optional<FreeOrder> order;

  static TemporalOutcome from(const TemporalTuple& t) { return {t.lock_start, t.lock_end, t.free_order}; }
  // The ordering term applies only when one event's start and the other's end are free.
  static bool has_free_pair(Lock start, Lock end) {
    return (start == Lock::e1 && end == Lock::e2) || (start == Lock::e2 && end == Lock::e1);
  }
  friend bool operator==(const TemporalOutcome&, const TemporalOutcome&) = default;
};

inline constexpr int kTemporalLogits = 9;  // start lock (3), end lock (3), free order (3)

// logits = mu + rho laid out as [start lock | end lock | free order].
double temporal_loglik(std::span<const double> mu, std::span<const double> rho, const TemporalOutcome& obs,
                       std::span<double> d_eta = {});

// ---------------------------------------------------------------------------
// Discrete outcome codes shared by every family.
//   binary: 0/1; categorical: index; ordinal: level-1;
//   temporal: start*12 + end*4 + (order or 3 when absent);
//   gated properties add kAbsent for "does not apply".
inline constexpr int kAbsent = -1;

struct FamilyLayout {
  ResponseKind kind = ResponseKind::binary;
  int count = 2;
  bool gated = false;

  // A schema gate is the parent's own binary question, which already has a
  // likelihood of its own, so model layouts never carry a separate gate block.
  // Standalone hurdle layouts (gated = true) are built explicitly.
  static FamilyLayout of(const PropertySpec& spec) { return {spec.response.kind, spec.response.count, false}; }

  int base_mu_dim() const;
  int base_rho_dim() const;
  int mu_dim() const { return base_mu_dim() + (gated ? 1 : 0); }
  int rho_dim() const { return base_rho_dim() + (gated ? 1 : 0); }
  int shared_dim() const { return kind == ResponseKind::ordinal ? count - 2 : 0; }
  // Every valid outcome code, including kAbsent for gated layouts.
  std::vector<int> outcome_codes() const;
};

int encode_outcome(const PropertySpec& spec, const AnnotationValue& value);
int encode_temporal(const TemporalOutcome& o);
TemporalOutcome decode_temporal(int code);

// Parameters of one property's likelihood: per-type means, shared shape
// parameters, per-annotator random intercepts and their covariance.
//
// Per-type block (mu_dim): base means, then the gate logit when gated.
// Per-annotator block (rho_dim): base intercepts, then the gate intercept.
// For ordinal properties the annotator block perturbs the unconstrained
// cutpoint parameterization (first cutpoint, log gaps) and the shared block
// holds the population log gaps; population cutpoints are centred at 0.
struct PropertyParams {
  std::string name;
  FamilyLayout layout;
  int types = 1;
  std::vector<double> mu;
  std::vector<double> shared;
  std::vector<std::string> annotators;  // sorted; index is the annotator slot
  std::vector<double> rho;
  std::vector<double> sigma;  // rho_dim x rho_dim, row-major

  PropertyParams() = default;
  PropertyParams(std::string name, FamilyLayout layout, int types, std::vector<std::string> annotators);

  int mu_dim() const { return layout.mu_dim(); }
  int rho_dim() const { return layout.rho_dim(); }
  int slot(std::string_view annotator) const;  // -1 when unseen

  std::span<const double> mu_of(int type) const;
  std::span<double> mu_of(int type);
  // Zero intercepts for slot -1.
  std::vector<double> rho_of(int slot) const;

  std::vector<double> cutpoints(int slot) const;  // ordinal only
  // Accumulates scale * the chain rule from d/d(cutpoints of slot) into the
  // shared block and that slot's rho block (ordinal only).
  void cutpoint_grad(int slot, std::span<const double> d_cutpoints, double scale, std::span<double> g_shared,
                     std::span<double> g_rho) const;

  // Log-likelihood of an outcome code for one type and annotator slot.
  double loglik(int type, int slot, int code) const;
  // Same, accumulating scale * gradient into the type's mu block, the shared
  // block and the annotator's rho block (spans may be empty to skip).
  double loglik_grad(int type, int slot, int code, double scale, std::span<double> g_mu,
                     std::span<double> g_shared, std::span<double> g_rho) const;

  // sum_a log N(rho_a | 0, sigma); optionally accumulates its gradient over
  // the full rho table.
  double rho_log_prior(std::span<double> g_rho = {}) const;
  // Replaces sigma with the empirical covariance of rho, eigenvalues floored.
  void update_sigma(double floor = kSigmaFloor);

  // The probability of the gate opening for a type at zero annotator offset.
  double gate_probability(int type) const;

 private:
  void cutpoint_grad(const double* r, std::span<const double> dc, double scale, std::span<double> g_shared,
                     std::span<double> g_rho) const;
  double loglik_grad_base_(std::span<const double> m, const double* r, int code, double scale,
                           std::span<double> g_mu, std::span<double> g_shared, std::span<double> g_rho) const;
};

// A gated property seen as a two-part likelihood. gate_rho is indexed by the
// base property's annotator slots.
struct HurdleParams {
  std::vector<double> gate_mu;  // per type
  std::vector<double> gate_rho;
  PropertyParams base;

  double gate_probability(int type, int slot) const;
  // code is kAbsent or a base outcome code
  double loglik(int type, int slot, int code) const;
};

}  // namespace eventstruct
