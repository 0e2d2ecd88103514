#include "eventstruct/likelihoods.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "eventstruct/errors.hpp"

namespace eventstruct {

namespace {

bool clamped(double eta) { return eta > kLogitClamp || eta < -kLogitClamp; }
double clamp_logit(double eta) { return std::clamp(eta, -kLogitClamp, kLogitClamp); }

// log sum exp over a small vector, writing softmax into probs.
double log_softmax_norm(std::span<const double> eta, std::span<double> probs) {
  double m = *std::max_element(eta.begin(), eta.end());
  double s = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    probs[i] = std::exp(eta[i] - m);
    s += probs[i];
  }
  for (auto& p : probs) p /= s;
  return m + std::log(s);
}

double categorical_term(const double* mu, const double* rho, int k, int x, double* d_eta) {
  double eta[16] = {};
  double probs[16] = {};
  std::vector<double> eta_big, probs_big;
  double* e = eta;
  double* p = probs;
  if (k > 16) {
    eta_big.resize(k);
    probs_big.resize(k);
    e = eta_big.data();
    p = probs_big.data();
  }
  for (int i = 0; i < k; ++i) e[i] = clamp_logit(mu[i] + (rho ? rho[i] : 0.0));
  const double lse = log_softmax_norm({e, static_cast<std::size_t>(k)}, {p, static_cast<std::size_t>(k)});
  if (d_eta) {
    for (int i = 0; i < k; ++i) {
      const double raw = mu[i] + (rho ? rho[i] : 0.0);
      d_eta[i] = clamped(raw) ? 0.0 : ((i == x ? 1.0 : 0.0) - p[i]);
    }
  }
  return e[x] - lse;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double binary_loglik(double mu, double rho, bool x, double* d_eta) {
  const double raw = mu + rho;
  const double eta = clamp_logit(raw);
  if (d_eta) *d_eta = clamped(raw) ? 0.0 : (x ? sigmoid(-eta) : -sigmoid(eta));
  return x ? log_sigmoid(eta) : log_sigmoid(-eta);
}

double categorical_loglik(std::span<const double> mu, std::span<const double> rho, int x,
                          std::span<double> d_eta) {
  if (mu.size() != rho.size()) throw ShapeError("categorical_loglik: mu and rho lengths differ");
  if (mu.size() < 2) throw ShapeError("categorical_loglik: need at least two categories");
  if (!d_eta.empty() && d_eta.size() != mu.size()) throw ShapeError("categorical_loglik: gradient length");
  if (x < 0 || x >= static_cast<int>(mu.size())) throw ArgumentError("categorical_loglik: category out of range");
  return categorical_term(mu.data(), rho.data(), static_cast<int>(mu.size()), x,
                          d_eta.empty() ? nullptr : d_eta.data());
}

double ordinal_loglik(double mu, std::span<const double> cut, int level, double* d_mu,
                      std::span<double> d_cut) {
  const int J = static_cast<int>(cut.size()) + 1;
  if (J < 2) throw ShapeError("ordinal_loglik: need at least one cutpoint");
  if (level < 1 || level > J) throw ArgumentError("ordinal_loglik: level out of range");
  for (int i = 1; i + 1 < J; ++i)
    if (!(cut[i] > cut[i - 1])) throw ParameterError("ordinal_loglik: cutpoints must be strictly increasing");
  if (!d_cut.empty()) {
    if (static_cast<int>(d_cut.size()) != J - 1) throw ShapeError("ordinal_loglik: gradient length");
    std::fill(d_cut.begin(), d_cut.end(), 0.0);
  }

  // f = sigma(b) - sigma(a) with a = c_{j-1} - mu, b = c_j - mu, evaluated as
  // sigma(b) * sigma(-a) * (1 - exp(a - b)) to stay positive without clamping.
  const bool has_lower = level > 1;
  const bool has_upper = level < J;
  const double a = has_lower ? cut[level - 2] - mu : 0.0;
  const double b = has_upper ? cut[level - 1] - mu : 0.0;
  double value = 0.0;
  double da = 0.0, db = 0.0;
  if (has_upper) {
    value += log_sigmoid(b);
    db += sigmoid(-b);
  }
  if (has_lower) {
    value += log_sigmoid(-a);
    da -= sigmoid(a);
  }
  if (has_lower && has_upper) {
    const double gap = b - a;
    value += std::log(-std::expm1(-gap));
    const double t = 1.0 / std::expm1(gap);
    db += t;
    da -= t;
  }
  assert(std::isfinite(value));
  if (d_mu) *d_mu = -(da + db);
  if (!d_cut.empty()) {
    if (has_lower) d_cut[level - 2] += da;
    if (has_upper) d_cut[level - 1] += db;
  }
  return value;
}

double hurdle_loglik(double gate_mu, double gate_rho, std::optional<double> present_base, double* d_gate) {
  const double raw = gate_mu + gate_rho;
  const double eta = clamp_logit(raw);
  if (!present_base) {
    if (d_gate) *d_gate = clamped(raw) ? 0.0 : -sigmoid(eta);
    return log_sigmoid(-eta);
  }
  if (d_gate) *d_gate = clamped(raw) ? 0.0 : sigmoid(-eta);
  return log_sigmoid(eta) + *present_base;
}

double temporal_loglik(std::span<const double> mu, std::span<const double> rho, const TemporalOutcome& obs,
                       std::span<double> d_eta) {
  if (mu.size() != kTemporalLogits || rho.size() != kTemporalLogits)
    throw ShapeError("temporal_loglik: expected 9 logits");
  if (!d_eta.empty() && d_eta.size() != kTemporalLogits) throw ShapeError("temporal_loglik: gradient length");
  const bool free_pair = TemporalOutcome::has_free_pair(obs.start, obs.end);
  if (free_pair != obs.order.has_value())
    throw ArgumentError("temporal_loglik: free ordering present exactly when one start and the other end are free");
  double* d = d_eta.empty() ? nullptr : d_eta.data();
  if (d) std::fill(d_eta.begin(), d_eta.end(), 0.0);
  double v = categorical_term(mu.data(), rho.data(), 3, static_cast<int>(obs.start), d);
  v += categorical_term(mu.data() + 3, rho.data() + 3, 3, static_cast<int>(obs.end), d ? d + 3 : nullptr);
  if (obs.order)
    v += categorical_term(mu.data() + 6, rho.data() + 6, 3, static_cast<int>(*obs.order), d ? d + 6 : nullptr);
  return v;
}

// ---------------------------------------------------------------------------

int FamilyLayout::base_mu_dim() const {
  switch (kind) {
    case ResponseKind::binary: return 1;
    case ResponseKind::categorical: return count;
    case ResponseKind::ordinal: return 1;
    case ResponseKind::temporal: return kTemporalLogits;
  }
  return 1;
}

int FamilyLayout::base_rho_dim() const {
  switch (kind) {
    case ResponseKind::binary: return 1;
    case ResponseKind::categorical: return count;
    case ResponseKind::ordinal: return count - 1;
    case ResponseKind::temporal: return kTemporalLogits;
  }
  return 1;
}

std::vector<int> FamilyLayout::outcome_codes() const {
  std::vector<int> out;
  if (gated) out.push_back(kAbsent);
  switch (kind) {
    case ResponseKind::binary:
    case ResponseKind::categorical:
    case ResponseKind::ordinal:
      for (int c = 0; c < count; ++c) out.push_back(c);
      break;
    case ResponseKind::temporal:
      for (int s = 0; s < 3; ++s)
        for (int e = 0; e < 3; ++e) {
          if (TemporalOutcome::has_free_pair(static_cast<Lock>(s), static_cast<Lock>(e))) {
            for (int o = 0; o < 3; ++o) out.push_back(s * 12 + e * 4 + o);
          } else {
            out.push_back(s * 12 + e * 4 + 3);
          }
        }
      break;
  }
  return out;
}

int encode_temporal(const TemporalOutcome& o) {
  return static_cast<int>(o.start) * 12 + static_cast<int>(o.end) * 4 + (o.order ? static_cast<int>(*o.order) : 3);
}

TemporalOutcome decode_temporal(int code) {
  TemporalOutcome o;
  o.start = static_cast<Lock>(code / 12);
  o.end = static_cast<Lock>((code / 4) % 3);
  const int order = code % 4;
  if (order < 3) o.order = static_cast<FreeOrder>(order);
  return o;
}

int encode_outcome(const PropertySpec& spec, const AnnotationValue& value) {
  switch (spec.response.kind) {
    case ResponseKind::binary: return std::get<bool>(value) ? 1 : 0;
    case ResponseKind::categorical: return std::get<int>(value);
    case ResponseKind::ordinal: return std::get<int>(value) - 1;
    case ResponseKind::temporal: return encode_temporal(TemporalOutcome::from(std::get<TemporalTuple>(value)));
  }
  return 0;
}

// ---------------------------------------------------------------------------

PropertyParams::PropertyParams(std::string name_, FamilyLayout layout_, int types_,
                               std::vector<std::string> annotators_)
    : name(std::move(name_)), layout(layout_), types(types_), annotators(std::move(annotators_)) {
  if (types < 1) throw ArgumentError("property '" + name + "': type count must be >= 1");
  std::sort(annotators.begin(), annotators.end());
  annotators.erase(std::unique(annotators.begin(), annotators.end()), annotators.end());
  mu.assign(static_cast<std::size_t>(types) * mu_dim(), 0.0);
  shared.assign(layout.shared_dim(), 0.0);
  rho.assign(annotators.size() * rho_dim(), 0.0);
  const int d = rho_dim();
  sigma.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) sigma[i * d + i] = 1.0;
}

int PropertyParams::slot(std::string_view annotator) const {
  auto it = std::lower_bound(annotators.begin(), annotators.end(), annotator);
  if (it == annotators.end() || *it != annotator) return -1;
  return static_cast<int>(it - annotators.begin());
}

std::span<const double> PropertyParams::mu_of(int type) const {
  return {mu.data() + static_cast<std::size_t>(type) * mu_dim(), static_cast<std::size_t>(mu_dim())};
}

std::span<double> PropertyParams::mu_of(int type) {
  return {mu.data() + static_cast<std::size_t>(type) * mu_dim(), static_cast<std::size_t>(mu_dim())};
}

std::vector<double> PropertyParams::rho_of(int s) const {
  const int d = rho_dim();
  if (s < 0) return std::vector<double>(d, 0.0);
  return {rho.begin() + static_cast<std::ptrdiff_t>(s) * d, rho.begin() + static_cast<std::ptrdiff_t>(s + 1) * d};
}

namespace {

// Population log gaps g, annotator perturbation delta (J-1):
//   c_1 = -mean(r) + delta_0,  c_{k+1} = c_k + exp(g_k + delta_{k+1}),
// where r are the population cutpoints started at 0.
std::vector<double> build_cutpoints(std::span<const double> gaps, const double* delta, int J) {
  double run = 0.0, sum = 0.0;
  for (int k = 0; k < J - 1; ++k) {
    sum += run;
    if (k < J - 2) run += std::exp(gaps[k]);
  }
  const double mean = sum / (J - 1);
  std::vector<double> c(J - 1);
  c[0] = -mean + (delta ? delta[0] : 0.0);
  for (int k = 0; k + 1 < J - 1; ++k) c[k + 1] = c[k] + std::exp(gaps[k] + (delta ? delta[k + 1] : 0.0));
  return c;
}

}  // namespace

std::vector<double> PropertyParams::cutpoints(int s) const {
  if (layout.kind != ResponseKind::ordinal) throw ArgumentError("cutpoints: property '" + name + "' is not ordinal");
  const auto r = rho_of(s);
  return build_cutpoints(shared, r.data(), layout.count);
}

void PropertyParams::cutpoint_grad(const double* r, std::span<const double> dc, double scale,
                                   std::span<double> g_shared, std::span<double> g_rho) const {
  const int J = layout.count;
  double total = 0.0;
  for (double x : dc) total += x;
  if (!g_rho.empty()) g_rho[0] += scale * total;
  // through[k] = sum of dc over the cutpoints moved by gap k
  double suffix = 0.0;
  std::vector<double> through(J - 1, 0.0);
  for (int i = J - 2; i >= 1; --i) {
    suffix += dc[i];
    through[i - 1] = suffix;
  }
  for (int k = 0; k < J - 2; ++k) {
    const double delta = r ? r[k + 1] : 0.0;
    const double d_gap = std::exp(shared[k] + delta) * through[k];
    if (!g_rho.empty()) g_rho[k + 1] += scale * d_gap;
    if (!g_shared.empty()) {
      const double d_mean = std::exp(shared[k]) * static_cast<double>(J - 2 - k) / (J - 1);
      g_shared[k] += scale * (d_gap - total * d_mean);
    }
  }
}

void PropertyParams::cutpoint_grad(int s, std::span<const double> d_cutpoints, double scale,
                                   std::span<double> g_shared, std::span<double> g_rho) const {
  if (layout.kind != ResponseKind::ordinal) throw ArgumentError("cutpoints: property '" + name + "' is not ordinal");
  cutpoint_grad(s >= 0 ? rho.data() + static_cast<std::size_t>(s) * rho_dim() : nullptr, d_cutpoints, scale, g_shared,
                g_rho);
}

double PropertyParams::loglik(int type, int s, int code) const {
  return loglik_grad(type, s, code, 0.0, {}, {}, {});
}

double PropertyParams::loglik_grad(int type, int s, int code, double scale, std::span<double> g_mu,
                                   std::span<double> g_shared, std::span<double> g_rho) const {
  const auto m = mu_of(type);
  const int rd = rho_dim();
  const double* r = s >= 0 ? rho.data() + static_cast<std::size_t>(s) * rd : nullptr;
  const bool want = scale != 0.0;
  const int base_mu = layout.base_mu_dim();
  const int base_rho = layout.base_rho_dim();

  if (layout.gated) {
    const double gm = m[base_mu];
    const double gr = r ? r[base_rho] : 0.0;
    double dg = 0.0;
    if (code == kAbsent) {
      const double v = hurdle_loglik(gm, gr, std::nullopt, want ? &dg : nullptr);
      if (want) {
        if (!g_mu.empty()) g_mu[base_mu] += scale * dg;
        if (!g_rho.empty()) g_rho[base_rho] += scale * dg;
      }
      return v;
    }
    const double gate = hurdle_loglik(gm, gr, 0.0, want ? &dg : nullptr);
    if (want) {
      if (!g_mu.empty()) g_mu[base_mu] += scale * dg;
      if (!g_rho.empty()) g_rho[base_rho] += scale * dg;
    }
    return gate + loglik_grad_base_(m, r, code, scale, g_mu, g_shared, g_rho);
  }
  if (code == kAbsent) throw ArgumentError("property '" + name + "' is not gated; absent outcome is invalid");
  return loglik_grad_base_(m, r, code, scale, g_mu, g_shared, g_rho);
}

double PropertyParams::loglik_grad_base_(std::span<const double> m, const double* r, int code, double scale,
                                         std::span<double> g_mu, std::span<double> g_shared,
                                         std::span<double> g_rho) const {
  const bool want = scale != 0.0;
  switch (layout.kind) {
    case ResponseKind::binary: {
      double d = 0.0;
      const double v = binary_loglik(m[0], r ? r[0] : 0.0, code == 1, want ? &d : nullptr);
      if (want) {
        if (!g_mu.empty()) g_mu[0] += scale * d;
        if (!g_rho.empty()) g_rho[0] += scale * d;
      }
      return v;
    }
    case ResponseKind::categorical: {
      const int k = layout.count;
      if (code < 0 || code >= k) throw ArgumentError("property '" + name + "': category out of range");
      if (!want) return categorical_term(m.data(), r, k, code, nullptr);
      std::vector<double> d(k);
      const double v = categorical_term(m.data(), r, k, code, d.data());
      for (int i = 0; i < k; ++i) {
        if (!g_mu.empty()) g_mu[i] += scale * d[i];
        if (!g_rho.empty()) g_rho[i] += scale * d[i];
      }
      return v;
    }
    case ResponseKind::ordinal: {
      const int J = layout.count;
      const auto c = build_cutpoints(shared, r, J);
      if (!want) return ordinal_loglik(m[0], c, code + 1);
      double dmu = 0.0;
      std::vector<double> dc(J - 1);
      const double v = ordinal_loglik(m[0], c, code + 1, &dmu, dc);
      if (!g_mu.empty()) g_mu[0] += scale * dmu;
      cutpoint_grad(r, dc, scale, g_shared, g_rho);
      return v;
    }
    case ResponseKind::temporal: {
      const auto o = decode_temporal(code);
      static const double zeros[kTemporalLogits] = {};
      std::span<const double> mu9(m.data(), kTemporalLogits);
      std::span<const double> rho9(r ? r : zeros, kTemporalLogits);
      if (!want) return temporal_loglik(mu9, rho9, o);
      double d[kTemporalLogits];
      const double v = temporal_loglik(mu9, rho9, o, d);
      for (int i = 0; i < kTemporalLogits; ++i) {
        if (!g_mu.empty()) g_mu[i] += scale * d[i];
        if (!g_rho.empty()) g_rho[i] += scale * d[i];
      }
      return v;
    }
  }
  return 0.0;
}

double PropertyParams::rho_log_prior(std::span<double> g_rho) const {
  const int d = rho_dim();
  const int A = static_cast<int>(annotators.size());
  if (A == 0) return 0.0;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> S(sigma.data(), d, d);
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("property '" + name + "': annotator covariance is not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  const double norm = -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet);
  double total = 0.0;
  for (int a = 0; a < A; ++a) {
    Eigen::Map<const Eigen::VectorXd> x(rho.data() + static_cast<std::size_t>(a) * d, d);
    Eigen::VectorXd y = llt.solve(x);
    total += norm - 0.5 * x.dot(y);
    if (!g_rho.empty())
      for (int i = 0; i < d; ++i) g_rho[static_cast<std::size_t>(a) * d + i] -= y(i);
  }
  return total;
}

void PropertyParams::update_sigma(double floor) {
  const int d = rho_dim();
  const int A = static_cast<int>(annotators.size());
  if (A == 0) return;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
  for (int a = 0; a < A; ++a) {
    Eigen::Map<const Eigen::VectorXd> x(rho.data() + static_cast<std::size_t>(a) * d, d);
    S += x * x.transpose();
  }
  S /= static_cast<double>(A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  out = 0.5 * (out + out.transpose());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) sigma[static_cast<std::size_t>(i) * d + j] = out(i, j);
}

double PropertyParams::gate_probability(int type) const {
  if (!layout.gated) return 1.0;
  return sigmoid(clamp_logit(mu_of(type)[layout.base_mu_dim()]));
}

double HurdleParams::gate_probability(int type, int slot) const {
  return sigmoid(clamp_logit(gate_mu.at(type) + (slot >= 0 ? gate_rho.at(slot) : 0.0)));
}

double HurdleParams::loglik(int type, int slot, int code) const {
  const double r = slot >= 0 ? gate_rho.at(slot) : 0.0;
  if (code == kAbsent) return hurdle_loglik(gate_mu.at(type), r, std::nullopt);
  return hurdle_loglik(gate_mu.at(type), r, base.loglik(type, slot, code));
}

}  // namespace eventstruct
