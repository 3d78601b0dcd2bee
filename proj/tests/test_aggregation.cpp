#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include <fedcontrol/aggregation.hpp>
#include <fedcontrol/errors.hpp>
#include <fedcontrol/loss_ledger.hpp>
#include <fedcontrol/rng.hpp>

using namespace fedcontrol;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

// ---------------------------------------------------------------------------
// Loss ledger

TEST_CASE("ledger stores per-round losses and exposes gaps", "[aggregation]") {
  LossLedger ledger(3);
  ledger.record(0, 0, 1.5);
  ledger.record(0, 2, 0.5);  // round 1 skipped: client sat that round out
  ledger.record(1, 0, 2.0);

  CHECK(ledger.num_clients() == 3);
  CHECK(ledger.at(0, 0) == 1.5);
  CHECK(ledger.at(0, 2) == 0.5);
  CHECK_FALSE(ledger.at(0, 1).has_value());
  CHECK_FALSE(ledger.at(2, 0).has_value());

  const auto latest = ledger.latest_before(0, 2);
  REQUIRE(latest.has_value());
  CHECK(latest->round == 0);
  CHECK(latest->loss == 1.5);
  CHECK_FALSE(ledger.latest_before(0, 0).has_value());

  CHECK(ledger.history(0).size() == 2);
  CHECK(ledger.history(2).empty());
}

TEST_CASE("ledger rejects invalid losses, rounds, and clients", "[aggregation]") {
  LossLedger ledger(1);
  CHECK_THROWS_AS(ledger.record(0, 0, -0.1), InvalidLossError);
  CHECK_THROWS_AS(ledger.record(0, 0, std::nan("")), InvalidLossError);
  ledger.record(0, 1, 1.0);
  CHECK_THROWS_AS(ledger.record(0, 1, 1.0), std::invalid_argument);  // duplicate round
  CHECK_THROWS_AS(ledger.record(0, 0, 1.0), std::invalid_argument);  // going backwards
  CHECK_THROWS_AS(ledger.record(1, 0, 1.0), std::out_of_range);
  CHECK_THROWS_AS(ledger.at(1, 0), std::out_of_range);
}

// ---------------------------------------------------------------------------
// Derivative term

TEST_CASE("derivative term is the previous-to-current loss ratio", "[aggregation]") {
  CHECK(derivative_term(1.0, 1.0) == 1.0);
  CHECK(derivative_term(2.0, 0.5) == 4.0);
}

TEST_CASE("derivative term guards both operands against vanishing loss", "[aggregation]") {
  CHECK(derivative_term(0.0, 0.0) == 1.0);  // floor/floor
  CHECK_THAT(derivative_term(0.0, 1.0), WithinRel(1e-12, 1e-9));
  CHECK_THAT(derivative_term(1.0, 0.0), WithinRel(1e12, 1e-9));
  CHECK(std::isfinite(derivative_term(0.0, 1e300)));
  CHECK(derivative_term(0.0, 1e300) > 0.0);
}

TEST_CASE("derivative term rejects non-finite or negative losses", "[aggregation]") {
  CHECK_THROWS_AS(derivative_term(std::nan(""), 1.0), InvalidLossError);
  CHECK_THROWS_AS(derivative_term(1.0, std::numeric_limits<double>::infinity()),
                  InvalidLossError);
  CHECK_THROWS_AS(derivative_term(-1.0, 1.0), InvalidLossError);
  CHECK_THROWS_AS(derivative_term(1.0, -1.0), InvalidLossError);
}

TEST_CASE("derivative term is invariant under common loss rescaling", "[aggregation]") {
  Rng rng(101);
  for (int i = 0; i < 500; ++i) {
    const double prev = rng.uniform_double(1e-6, 10.0);
    const double curr = rng.uniform_double(1e-6, 10.0);
    const double c = rng.uniform_double(1e-3, 1e3);
    CHECK_THAT(derivative_term(c * prev, c * curr),
               WithinRel(derivative_term(prev, curr), 1e-12));
  }
}

// ---------------------------------------------------------------------------
// Integral term

TEST_CASE("integral term sums recorded losses with geometric decay", "[aggregation]") {
  const std::vector<RoundLoss> two = {{1, 0.5}, {2, 0.25}};
  CHECK_THAT(integral_term(two, 2, 1.0), WithinAbs(0.75, 1e-15));
  CHECK(integral_term(two, 2, 0.0) == 0.25);  // 0^0 = 1 keeps only the newest loss

  const std::vector<RoundLoss> three = {{1, 1.0}, {2, 0.5}, {3, 0.25}};
  // 0.8^2 * 1.0 + 0.8 * 0.5 + 0.25
  CHECK_THAT(integral_term(three, 3, 0.8), WithinAbs(1.29, 1e-12));
}

TEST_CASE("integral term ignores bootstrap and future entries", "[aggregation]") {
  const std::vector<RoundLoss> history = {{0, 9.0}, {1, 1.0}, {2, 5.0}};
  CHECK(integral_term(history, 1, 0.5) == 1.0);  // round-2 entry is in the future
  CHECK_THAT(integral_term(history, 2, 1.0), WithinAbs(6.0, 1e-15));

  const std::vector<RoundLoss> only_bootstrap = {{0, 9.0}};
  CHECK_THROWS_AS(integral_term(only_bootstrap, 1, 0.5), MissingHistoryError);
  CHECK_THROWS_AS(integral_term({}, 1, 0.5), MissingHistoryError);
}

TEST_CASE("integral term rejects lambda outside [0,1]", "[aggregation]") {
  const std::vector<RoundLoss> history = {{1, 1.0}};
  CHECK_THROWS_AS(integral_term(history, 1, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(integral_term(history, 1, 1.1), std::invalid_argument);
}

TEST_CASE("integral term satisfies the decay recurrence on 1000 random histories",
          "[aggregation][properties]") {
  Rng rng(2025);
  for (int trial = 0; trial < 1'000; ++trial) {
    const int rounds = 2 + static_cast<int>(rng.uniform_below(10));
    const double lambda = rng.uniform_double();
    std::vector<RoundLoss> history;
    for (int r = 0; r <= rounds; ++r) {
      history.push_back({r, rng.uniform_double(0.0, 10.0)});
    }
    const double direct = integral_term(history, rounds, lambda);
    const std::vector<RoundLoss> older(history.begin(), history.end() - 1);
    const double recurred =
        lambda * integral_term(older, rounds - 1, lambda) + history.back().loss;
    CHECK_THAT(recurred, WithinRel(direct, 1e-12));
  }
}

TEST_CASE("integral term decays across participation gaps", "[aggregation]") {
  // Client missed rounds 2 and 3; the round-1 loss still decays per global
  // round, so at round 4: lambda^3 * 2.0 + 1.0.
  const std::vector<RoundLoss> gappy = {{1, 2.0}, {4, 1.0}};
  const double lambda = 0.5;
  CHECK_THAT(integral_term(gappy, 4, lambda), WithinAbs(0.125 * 2.0 + 1.0, 1e-15));
}

// ---------------------------------------------------------------------------
// Strategy config

TEST_CASE("strategy kinds map to their effective coefficients", "[aggregation]") {
  StrategyConfig cfg;
  cfg.alpha = 0.2;
  cfg.beta = 0.3;

  cfg.kind = StrategyKind::FedAvg;
  CHECK(cfg.effective().sample == 1.0);
  CHECK(cfg.effective().derivative == 0.0);
  CHECK(cfg.effective().integral == 0.0);

  cfg.kind = StrategyKind::FedCostWAvg;
  CHECK(cfg.effective().sample == 0.2);
  CHECK(cfg.effective().derivative == 0.8);  // derived 1 - alpha, stored beta ignored
  CHECK(cfg.effective().integral == 0.0);

  cfg.kind = StrategyKind::FedControl;
  CHECK(cfg.effective().sample == 0.2);
  CHECK(cfg.effective().derivative == 0.3);
  CHECK_THAT(cfg.effective().integral, WithinAbs(0.5, 1e-15));
}

TEST_CASE("strategy config validation rejects out-of-range coefficients", "[aggregation]") {
  StrategyConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.6;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // alpha + beta > 1
  cfg.beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.beta = 0.3;
  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambda = -0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambda = 1.0;
  CHECK_NOTHROW(cfg.validate());
}

// ---------------------------------------------------------------------------
// compute_weights

namespace {

LossLedger make_ledger(const std::vector<std::vector<RoundLoss>>& histories) {
  LossLedger ledger(histories.size());
  for (std::size_t client = 0; client < histories.size(); ++client) {
    for (const auto& entry : histories[client]) {
      ledger.record(client, entry.round, entry.loss);
    }
  }
  return ledger;
}

}  // namespace

TEST_CASE("sample-only strategy returns exact sample proportions", "[aggregation]") {
  LossLedger empty_ledger(2);  // never consulted
  StrategyConfig cfg;
  cfg.kind = StrategyKind::FedAvg;

  const std::vector<int> cohort = {0, 1};
  const std::vector<int> counts = {1, 3};
  const auto weights = compute_weights(cohort, counts, empty_ledger, 5, cfg);
  REQUIRE(weights.values.size() == 2);
  CHECK(weights.values[0] == 0.25);  // exact, not within-epsilon
  CHECK(weights.values[1] == 0.75);
  CHECK(weights.clients == cohort);
}

TEST_CASE("symmetric clients get equal weights under every strategy", "[aggregation]") {
  const auto ledger = make_ledger({
      {{0, 1.0}, {1, 0.8}, {2, 0.5}},
      {{0, 1.0}, {1, 0.8}, {2, 0.5}},
  });
  const std::vector<int> cohort = {0, 1};
  const std::vector<int> counts = {7, 7};

  for (StrategyKind kind :
       {StrategyKind::FedAvg, StrategyKind::FedCostWAvg, StrategyKind::FedControl}) {
    StrategyConfig cfg;
    cfg.kind = kind;
    const auto weights = compute_weights(cohort, counts, ledger, 2, cfg);
    CHECK_THAT(weights.values[0], WithinAbs(0.5, 1e-15));
    CHECK_THAT(weights.values[1], WithinAbs(0.5, 1e-15));
  }
}

TEST_CASE("full three-term weights match the hand-computed value", "[aggregation]") {
  // Two clients, equal sample counts. Client 0 halves its loss, client 1
  // stagnates:
  //   sample:     1/2 each
  //   ratio:      2.0 vs 1.0        -> 2/3 vs 1/3 after normalization
  //   decayed sum (lambda=1): 1.5 vs 2.0 -> 3/7 vs 4/7
  // Equal thirds of each column give 67/126 and 59/126.
  const auto ledger = make_ledger({
      {{1, 1.0}, {2, 0.5}},
      {{1, 1.0}, {2, 1.0}},
  });
  StrategyConfig cfg;  // FedControl, alpha = beta = 1/3, lambda = 1
  const std::vector<int> cohort = {0, 1};
  const std::vector<int> counts = {1, 1};

  const auto weights = compute_weights(cohort, counts, ledger, 2, cfg);
  CHECK_THAT(weights.values[0], WithinAbs(67.0 / 126.0, 1e-12));
  CHECK_THAT(weights.values[1], WithinAbs(59.0 / 126.0, 1e-12));
  CHECK_THAT(weights.values[0] + weights.values[1], WithinAbs(1.0, 1e-15));
}

TEST_CASE("sample-only weights ignore the ledger entirely", "[aggregation]") {
  StrategyConfig cfg;
  cfg.kind = StrategyKind::FedAvg;
  const std::vector<int> cohort = {0, 1};
  const std::vector<int> counts = {2, 6};

  const auto with_history = compute_weights(
      cohort, counts, make_ledger({{{1, 0.1}}, {{1, 99.0}}}), 1, cfg);
  const auto without_history = compute_weights(cohort, counts, LossLedger(2), 1, cfg);
  CHECK(with_history.values == without_history.values);
}

TEST_CASE("sample+ratio strategy is independent of lambda and older losses", "[aggregation]") {
  const auto ledger = make_ledger({
      {{0, 3.0}, {1, 2.0}, {2, 1.0}},
      {{0, 1.0}, {1, 1.5}, {2, 1.2}},
  });
  const std::vector<int> cohort = {0, 1};
  const std::vector<int> counts = {10, 30};

  StrategyConfig cfg;
  cfg.kind = StrategyKind::FedCostWAvg;
  cfg.alpha = 0.5;

  std::vector<std::vector<double>> results;
  for (double lambda : {0.0, 0.5, 1.0}) {
    cfg.lambda = lambda;
    results.push_back(compute_weights(cohort, counts, ledger, 2, cfg).values);
  }
  CHECK(results[0] == results[1]);
  CHECK(results[1] == results[2]);

  // Changing losses older than rounds r-1, r leaves the weights unchanged.
  const auto altered = make_ledger({
      {{0, 77.0}, {1, 2.0}, {2, 1.0}},
      {{0, 0.01}, {1, 1.5}, {2, 1.2}},
  });
  cfg.lambda = 1.0;
  CHECK(compute_weights(cohort, counts, altered, 2, cfg).values == results[0]);
}

TEST_CASE("missing history surfaces as a missing-history error with the client id",
          "[aggregation]") {
  StrategyConfig cfg;  // FedControl needs ratio + decayed-sum history

  // Client 1 has no loss at the current round.
  const auto ledger = make_ledger({
      {{1, 1.0}, {2, 0.5}},
      {{1, 1.0}},
  });
  const std::vector<int> cohort = {0, 1};
  const std::vector<int> counts = {1, 1};
  try {
    compute_weights(cohort, counts, ledger, 2, cfg);
    FAIL("expected MissingHistoryError");
  } catch (const MissingHistoryError& e) {
    CHECK(e.client == 1);
    CHECK(e.round == 2);
  }

  // No entry before the current round: the ratio has no numerator.
  const auto no_prev = make_ledger({
      {{2, 0.5}},
      {{1, 1.0}, {2, 1.0}},
  });
  CHECK_THROWS_AS(compute_weights(cohort, counts, no_prev, 2, cfg), MissingHistoryError);
}

TEST_CASE("degenerate cohorts are rejected", "[aggregation]") {
  StrategyConfig cfg;
  LossLedger ledger(2);
  const std::vector<int> counts = {1, 1};

  CHECK_THROWS_AS(compute_weights({}, {}, ledger, 1, cfg), DegenerateCohortError);

  const std::vector<int> cohort = {0, 1};
  const std::vector<int> short_counts = {1};
  CHECK_THROWS_AS(compute_weights(cohort, short_counts, ledger, 1, cfg), ShapeError);

  const std::vector<int> bad_counts = {1, 0};
  CHECK_THROWS_AS(compute_weights(cohort, bad_counts, ledger, 1, cfg), std::invalid_argument);
}

TEST_CASE("all-zero losses under pure decayed-sum weighting degenerate", "[aggregation]") {
  // alpha = beta = 0 puts all weight on the decayed loss sum; all-zero
  // histories then normalize by zero.
  const auto ledger = make_ledger({
      {{1, 0.0}},
      {{1, 0.0}},
  });
  StrategyConfig cfg;
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  const std::vector<int> cohort = {0, 1};
  const std::vector<int> counts = {1, 1};
  CHECK_THROWS_AS(compute_weights(cohort, counts, ledger, 1, cfg), DegenerateCohortError);
}

TEST_CASE("weights stay on the simplex across 10000 random instances",
          "[aggregation][properties]") {
  Rng rng(777);
  for (int trial = 0; trial < 10'000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_below(8));
    const int rounds = 1 + static_cast<int>(rng.uniform_below(6));

    std::vector<int> cohort(static_cast<std::size_t>(n));
    std::vector<int> counts(static_cast<std::size_t>(n));
    std::vector<std::vector<RoundLoss>> histories(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      cohort[static_cast<std::size_t>(i)] = i;
      counts[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.uniform_below(1'000));
      for (int r = 0; r <= rounds; ++r) {
        // Mostly ordinary losses, occasionally zero or tiny to exercise the
        // ratio guard.
        double loss = rng.uniform_double(0.0, 10.0);
        const auto style = rng.uniform_below(10);
        if (style == 0) loss = 0.0;
        if (style == 1) loss = rng.uniform_double(0.0, 1e-13);
        histories[static_cast<std::size_t>(i)].push_back({r, loss});
      }
    }

    StrategyConfig cfg;
    const auto kind_draw = rng.uniform_below(3);
    cfg.kind = kind_draw == 0   ? StrategyKind::FedAvg
               : kind_draw == 1 ? StrategyKind::FedCostWAvg
                                : StrategyKind::FedControl;
    cfg.alpha = rng.uniform_double();
    cfg.beta = rng.uniform_double(0.0, 1.0 - cfg.alpha);
    cfg.lambda = rng.uniform_double();

    const auto ledger = make_ledger(histories);
    AggregationWeights weights;
    try {
      weights = compute_weights(cohort, counts, ledger, rounds, cfg);
    } catch (const DegenerateCohortError&) {
      continue;  // legal outcome for all-zero loss draws
    }

    double sum = 0.0;
    for (double w : weights.values) {
      CHECK(w >= 0.0);
      CHECK(std::isfinite(w));
      sum += w;
    }
    CHECK_THAT(sum, WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("permuting the cohort listing permutes the weights bitwise", "[aggregation]") {
  const auto ledger = make_ledger({
      {{0, 2.0}, {1, 1.0}},
      {{0, 1.5}, {1, 1.2}},
      {{0, 0.7}, {1, 0.9}},
      {{0, 3.0}, {1, 0.4}},
  });
  const std::vector<int> cohort = {0, 1, 2, 3};
  const std::vector<int> counts = {5, 9, 2, 11};
  StrategyConfig cfg;
  cfg.lambda = 0.6;

  const auto base = compute_weights(cohort, counts, ledger, 1, cfg);

  const std::vector<int> permuted = {3, 0, 2, 1};
  const std::vector<int> permuted_counts = {11, 5, 2, 9};
  const auto shuffled = compute_weights(permuted, permuted_counts, ledger, 1, cfg);

  for (std::size_t i = 0; i < permuted.size(); ++i) {
    const auto original_pos = static_cast<std::size_t>(permuted[i]);
    CHECK(shuffled.values[i] == base.values[original_pos]);  // bit-identical
  }
}

// ---------------------------------------------------------------------------
// aggregate

TEST_CASE("aggregating one client returns its parameters unchanged", "[aggregation]") {
  const std::vector<ParamVector> params = {{1.0, -2.0, 3.5}};
  AggregationWeights weights;
  weights.clients = {0};
  weights.values = {1.0};
  CHECK(aggregate(params, weights) == params[0]);
}

TEST_CASE("identical parameter vectors are a fixed point of aggregation", "[aggregation]") {
  const ParamVector vec = {0.25, -1.125, 7.0, 0.3};
  const std::vector<ParamVector> params = {vec, vec, vec};
  AggregationWeights weights;
  weights.clients = {0, 1, 2};
  weights.values = {0.2, 0.5, 0.3};
  CHECK(aggregate(params, weights) == vec);  // exact: the envelope pins it
}

TEST_CASE("aggregate computes the plain convex combination", "[aggregation]") {
  const std::vector<ParamVector> params = {{0.0, 0.0}, {2.0, 4.0}};
  AggregationWeights weights;
  weights.clients = {0, 1};
  weights.values = {0.25, 0.75};
  const auto out = aggregate(params, weights);
  CHECK(out == ParamVector{1.5, 3.0});
}

TEST_CASE("aggregate validates shapes and weights", "[aggregation]") {
  const std::vector<ParamVector> params = {{1.0, 2.0}, {3.0}};
  AggregationWeights weights;
  weights.clients = {0, 1};
  weights.values = {0.5, 0.5};
  CHECK_THROWS_AS(aggregate(params, weights), ShapeError);

  const std::vector<ParamVector> ok = {{1.0}, {3.0}};
  weights.values = {0.5};
  CHECK_THROWS_AS(aggregate(ok, weights), ShapeError);

  weights.values = {0.5, 0.6};  // sums to 1.1
  CHECK_THROWS_AS(aggregate(ok, weights), std::invalid_argument);

  weights.values = {1.5, -0.5};  // negative weight
  CHECK_THROWS_AS(aggregate(ok, weights), std::invalid_argument);

  CHECK_THROWS_AS(aggregate({}, AggregationWeights{}), ShapeError);
}

TEST_CASE("aggregate output stays in the coordinate envelope on random inputs",
          "[aggregation][properties]") {
  Rng rng(31337);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(6);
    const std::size_t dim = 1 + rng.uniform_below(20);
    std::vector<ParamVector> params(n, ParamVector(dim));
    for (auto& p : params) {
      for (double& v : p) v = rng.uniform_double(-100.0, 100.0);
    }

    AggregationWeights weights;
    weights.values.resize(n);
    double sum = 0.0;
    for (double& w : weights.values) {
      w = rng.uniform_double(0.0, 1.0) + 1e-6;
      sum += w;
    }
    for (double& w : weights.values) w /= sum;
    for (std::size_t i = 0; i < n; ++i) weights.clients.push_back(static_cast<int>(i));

    const auto out = aggregate(params, weights);
    for (std::size_t c = 0; c < dim; ++c) {
      double lo = params[0][c], hi = params[0][c];
      for (const auto& p : params) {
        lo = std::min(lo, p[c]);
        hi = std::max(hi, p[c]);
      }
      CHECK(out[c] >= lo);
      CHECK(out[c] <= hi);
    }
  }
}

TEST_CASE("aggregate is bitwise invariant under client reordering", "[aggregation]") {
  Rng rng(99);
  const std::size_t n = 5, dim = 33;
  std::vector<ParamVector> params(n, ParamVector(dim));
  for (auto& p : params) {
    for (double& v : p) v = rng.uniform_double(-10.0, 10.0);
  }
  AggregationWeights weights;
  weights.values = {0.1, 0.3, 0.05, 0.35, 0.2};
  weights.clients = {0, 1, 2, 3, 4};

  const auto base = aggregate(params, weights);

  const std::vector<std::size_t> perm = {4, 2, 0, 3, 1};
  std::vector<ParamVector> shuffled_params;
  AggregationWeights shuffled_weights;
  for (std::size_t i : perm) {
    shuffled_params.push_back(params[i]);
    shuffled_weights.clients.push_back(static_cast<int>(i));
    shuffled_weights.values.push_back(weights.values[i]);
  }
  CHECK(aggregate(shuffled_params, shuffled_weights) == base);
}
