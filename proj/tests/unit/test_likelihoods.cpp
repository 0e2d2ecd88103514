#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "eventstruct/errors.hpp"
#include "eventstruct/likelihoods.hpp"
#include "eventstruct/synth.hpp"

using namespace eventstruct;
using doctest::Approx;

TEST_CASE("binary") {
  CHECK(binary_loglik(0, 0, true) == Approx(std::log(0.5)));
  CHECK(binary_loglik(1.0, 0.5, true) == Approx(std::log(oracle::logistic(1.5))).epsilon(1e-12));
  CHECK(std::exp(binary_loglik(1.0, 0.5, true)) == Approx(0.81757).epsilon(1e-5));
  double d = 0;
  binary_loglik(0, 0, true, &d);
  CHECK(d == Approx(0.5));
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const double m = 3 * standard_normal(rng), r = standard_normal(rng);
    CHECK(std::exp(binary_loglik(m, r, true)) + std::exp(binary_loglik(m, r, false)) == Approx(1.0).epsilon(1e-12));
  }
  // Saturated logits stay finite.
  CHECK(std::isfinite(binary_loglik(500, 0, false)));
}

TEST_CASE("categorical") {
  const std::vector<double> z(4, 0.0);
  for (int x = 0; x < 4; ++x) CHECK(categorical_loglik(z, z, x) == Approx(std::log(0.25)));
  const std::vector<double> mu{2, 0}, rho{0, 0};
  CHECK(categorical_loglik(mu, rho, 0) == Approx(std::log(std::exp(2.0) / (std::exp(2.0) + 1))).epsilon(1e-12));
  const std::vector<double> shifted{7, 5};
  CHECK(categorical_loglik(shifted, rho, 0) == Approx(categorical_loglik(mu, rho, 0)).epsilon(1e-12));
  std::vector<double> d(4);
  categorical_loglik(z, z, 2, d);
  CHECK(d[2] == Approx(0.75));
  CHECK(d[0] == Approx(-0.25));
  CHECK_THROWS_AS(categorical_loglik(mu, z, 0), ShapeError);
}

TEST_CASE("ordinal") {
  const std::vector<double> c1{0.0};
  CHECK(std::exp(ordinal_loglik(0, c1, 1)) == Approx(0.5));
  CHECK(std::exp(ordinal_loglik(0, c1, 2)) == Approx(0.5));
  // P(x <= j) = logistic(c_j - mu): f(2) = logistic(1) - logistic(-1).
  const std::vector<double> c3{0.0, 2.0};
  const double f2 = oracle::logistic(2.0 - 1.0) - oracle::logistic(0.0 - 1.0);
  CHECK(std::exp(ordinal_loglik(1.0, c3, 2)) == Approx(f2).epsilon(1e-12));
  CHECK(f2 == Approx(0.4621171572600098).epsilon(1e-12));
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> c(11);
    double run = -4;
    for (auto& v : c) v = (run += 0.1 + std::exp(0.3 * standard_normal(rng)));
    const double mu = 2 * standard_normal(rng);
    double s = 0, prev_cdf = 0;
    for (int j = 1; j <= 12; ++j) {
      s += std::exp(ordinal_loglik(mu, c, j));
      CHECK(s > prev_cdf);
      prev_cdf = s;
    }
    CHECK(s == Approx(1.0).epsilon(1e-12));
  }
  const std::vector<double> bad{1.0, 1.0};
  CHECK_THROWS_AS(ordinal_loglik(0, bad, 1), ParameterError);
  // Far tails remain finite instead of collapsing to log 0.
  CHECK(std::isfinite(ordinal_loglik(80.0, c3, 2)));
}

TEST_CASE("hurdle") {
  CHECK(hurdle_loglik(0, 0, std::nullopt) == Approx(std::log(0.5)));
  CHECK(hurdle_loglik(1e6, 0, -0.7) == Approx(-0.7).epsilon(1e-9));
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    const double g = standard_normal(rng), gr = standard_normal(rng), m = standard_normal(rng);
    const double s = std::exp(hurdle_loglik(g, gr, std::nullopt)) +
                     std::exp(hurdle_loglik(g, gr, binary_loglik(m, 0, true))) +
                     std::exp(hurdle_loglik(g, gr, binary_loglik(m, 0, false)));
    CHECK(s == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("temporal") {
  const std::vector<double> z(kTemporalLogits, 0.0);
  const TemporalOutcome free{Lock::e1, Lock::e2, FreeOrder::tie};
  CHECK(temporal_loglik(z, z, free) == Approx(3 * std::log(1.0 / 3)));
  const auto both = TemporalOutcome::from(normalize_temporal({0, 0, 1, 1}));
  CHECK(temporal_loglik(z, z, both) == Approx(2 * std::log(1.0 / 3)));
  Rng rng(4);
  FamilyLayout layout{ResponseKind::temporal, 0, false};
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> mu(kTemporalLogits), rho(kTemporalLogits);
    for (auto& v : mu) v = standard_normal(rng);
    for (auto& v : rho) v = standard_normal(rng);
    double s = 0;
    for (int c : layout.outcome_codes()) s += std::exp(temporal_loglik(mu, rho, decode_temporal(c)));
    CHECK(s == Approx(1.0).epsilon(1e-12));
  }
  for (int c : layout.outcome_codes()) CHECK(encode_temporal(decode_temporal(c)) == c);
}

TEST_CASE("property parameters: normalization and gradients") {
  Rng rng(11);
  const std::vector<std::pair<ResponseType, bool>> families{
      {ResponseType::binary(), false},     {ResponseType::categorical(4), false}, {ResponseType::ordinal(12), false},
      {ResponseType::ordinal(3), true},    {ResponseType::binary(), true},       {ResponseType::temporal(), false}};
  for (const auto& [resp, gated] : families) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto p = oracle::random_property(rng, resp, gated);
      for (int slot = -1; slot < 3; ++slot) CHECK(oracle::total_probability(p, rep % 2, slot) == Approx(1.0).epsilon(1e-10));
      const auto codes = p.layout.outcome_codes();
      const int code = codes[uniform_index(rng, codes.size())];
      CHECK(oracle::gradient_rel_error(p, rep % 2, static_cast<int>(rep % 3), code) < 1e-5);
    }
  }
}

TEST_CASE("ordinal cutpoint parameterization") {
  FamilyLayout layout{ResponseKind::ordinal, 12, false};
  PropertyParams p("dur", layout, 1, {"a"});
  const auto c = p.cutpoints(-1);
  REQUIRE(c.size() == 11);
  double mean = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    mean += c[i];
    if (i) CHECK(c[i] - c[i - 1] == Approx(1.0));
  }
  CHECK(mean / 11 == Approx(0.0).epsilon(1e-12));
}

TEST_CASE("annotator prior and covariance update") {
  FamilyLayout layout{ResponseKind::categorical, 3, false};
  PropertyParams p("c", layout, 1, {"a", "b"});
  p.rho = {1, 0, 0, -1, 0, 0};
  std::vector<double> g(p.rho.size(), 0.0);
  const double lp = p.rho_log_prior(g);
  CHECK(lp == Approx(-3 * std::log(2 * M_PI) - 1.0).epsilon(1e-12));
  CHECK(g[0] == Approx(-1.0));
  CHECK(g[3] == Approx(1.0));
  p.update_sigma();
  CHECK(p.sigma[0] == Approx(1.0).epsilon(1e-9));
  CHECK(p.sigma[4] == Approx(kSigmaFloor).epsilon(1e-9));
}

TEST_CASE("schema gates act through the parent question") {
  SynthConfig cfg;
  const auto params = make_truth_params(cfg);
  const auto& schema = params.schema;
  CHECK_THROWS_AS(params.hurdle(schema.index_of("telic")), ArgumentError);
  for (const char* name : {"part_similarity", "dynamic", "situation_duration"}) {
    const auto i = schema.index_of(name);
    const auto h = params.hurdle(i);
    const auto& parent = params.property(schema.index_of(schema.at(i).gate->parent));
    for (int t = 0; t < parent.types; ++t) {
      const double open = sigmoid(parent.mu_of(t)[0]);
      CHECK(params.applicability(i, t) == Approx(schema.at(i).gate->value ? open : 1 - open).epsilon(1e-12));
      CHECK(h.gate_probability(t, -1) == Approx(params.applicability(i, t)).epsilon(1e-12));
      for (int slot : {-1, 0, 3}) {
        double total = std::exp(h.loglik(t, slot, kAbsent));
        for (int c : h.base.layout.outcome_codes()) total += std::exp(h.loglik(t, slot, c));
        CHECK(total == Approx(1.0).epsilon(1e-9));
        // P(absent) is the parent's probability of answering against the gate.
        const bool against = !schema.at(i).gate->value;
        CHECK(std::exp(h.loglik(t, slot, kAbsent)) ==
              Approx(std::exp(parent.loglik(t, slot, against ? 1 : 0))).epsilon(1e-12));
      }
    }
  }
  CHECK(params.applicability(schema.index_of("telic"), 0) == 1.0);
}
