#include <filesystem>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include <fedcontrol/config.hpp>
#include <fedcontrol/errors.hpp>

using namespace fedcontrol;
using Catch::Matchers::ContainsSubstring;

// ---------------------------------------------------------------------------
// Defaults

TEST_CASE("an empty document yields the documented defaults", "[config]") {
  const auto cfg = parse_config_text("{}");
  CHECK(cfg.num_clients == 100);
  CHECK(cfg.participation == 1.0);
  CHECK(cfg.rounds == 30);
  CHECK(cfg.repetitions == 1);
  CHECK(cfg.master_seed == 0);
  CHECK(cfg.threshold == 0.6);
  CHECK(cfg.output_dir == "results");
  CHECK(cfg.emit_plot_data);
  CHECK(cfg.model_kind == ModelKind::MultinomialLogistic);
  CHECK(cfg.hidden_dims.empty());
  CHECK(cfg.trainer.epochs == 1);
  CHECK(cfg.trainer.batch_size == 64);
  CHECK(cfg.trainer.base_lr == 1e-3);
  CHECK(cfg.trainer.lr_decay == 0.99);
  CHECK(cfg.data.source == DataSource::Blobs);
  CHECK(cfg.data.num_classes == 3);
  CHECK(cfg.data.per_class == 200);
  CHECK(cfg.data.input_dim == 2);
  CHECK(cfg.data.separation == 4.0);
  CHECK(cfg.data.holdout_fraction == 0.1);
  CHECK(cfg.partition_mode == PartitionMode::IidBalanced);
  CHECK(cfg.cardinalities.empty());
  REQUIRE(cfg.strategies.size() == 1);
  CHECK(cfg.strategies[0].kind == StrategyKind::FedControl);
  CHECK(cfg.strategies[0].alpha == 1.0 / 3.0);
  CHECK(cfg.strategies[0].beta == 1.0 / 3.0);
  CHECK(cfg.strategies[0].lambda == 1.0);
}

// ---------------------------------------------------------------------------
// Strategy parsing

TEST_CASE("mixing coefficients that exceed the budget are rejected", "[config]") {
  const std::string doc = R"({
    "strategies": [{"kind": "fedcontrol", "alpha": 0.5, "beta": 0.6}]
  })";
  CHECK_THROWS_MATCHES(parse_config_text(doc), ConfigError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("alpha + beta")));
}

TEST_CASE("the two-term strategy derives its loss coefficient", "[config]") {
  const auto cfg = parse_config_text(
      R"({"strategies": [{"kind": "fedcostwavg", "alpha": 0.7}]})");
  REQUIRE(cfg.strategies.size() == 1);
  CHECK(cfg.strategies[0].kind == StrategyKind::FedCostWAvg);
  CHECK(cfg.strategies[0].alpha == 0.7);
  CHECK(cfg.strategies[0].beta == Catch::Approx(0.3).epsilon(1e-15));

  // An explicit beta is accepted only when it completes the budget.
  CHECK_NOTHROW(parse_config_text(
      R"({"strategies": [{"kind": "fedcostwavg", "alpha": 0.7, "beta": 0.3}]})"));
  CHECK_THROWS_AS(parse_config_text(
                      R"({"strategies": [{"kind": "fedcostwavg", "alpha": 0.7, "beta": 0.4}]})"),
                  ConfigError);
}

TEST_CASE("strategies reject fields they do not use", "[config]") {
  // The sample-count strategy has no tunables at all.
  CHECK_THROWS_AS(parse_config_text(R"({"strategies": [{"kind": "fedavg", "alpha": 0.5}]})"),
                  ConfigError);
  // Only the three-term strategy understands lambda.
  CHECK_THROWS_AS(
      parse_config_text(R"({"strategies": [{"kind": "fedcostwavg", "lambda": 0.5}]})"),
      ConfigError);
  // Unknown kinds fail loudly.
  CHECK_THROWS_AS(parse_config_text(R"({"strategies": [{"kind": "fancy"}]})"), ConfigError);
  // Strategies must be a non-empty array of objects.
  CHECK_THROWS_AS(parse_config_text(R"({"strategies": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"strategies": "fedavg"})"), ConfigError);
}

TEST_CASE("the decay parameter is range-checked", "[config]") {
  CHECK_THROWS_AS(
      parse_config_text(R"({"strategies": [{"kind": "fedcontrol", "lambda": 1.5}]})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"strategies": [{"kind": "fedcontrol", "lambda": -0.1}]})"),
      ConfigError);
  CHECK_NOTHROW(parse_config_text(R"({"strategies": [{"kind": "fedcontrol", "lambda": 0.0}]})"));
}

// ---------------------------------------------------------------------------
// Unknown keys and type errors

TEST_CASE("unknown keys are rejected with their path", "[config]") {
  CHECK_THROWS_MATCHES(parse_config_text(R"({"num_client": 5})"), ConfigError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("num_client")));
  CHECK_THROWS_MATCHES(parse_config_text(R"({"trainer": {"lr": 0.1}})"), ConfigError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("trainer.lr")));
  CHECK_THROWS_AS(parse_config_text(R"({"data": {"classes": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"partition": {"skew": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"model": {"layers": [4]}})"), ConfigError);
}

TEST_CASE("wrongly typed values are rejected with their path", "[config]") {
  CHECK_THROWS_MATCHES(parse_config_text(R"({"num_clients": "many"})"), ConfigError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("num_clients")));
  CHECK_THROWS_AS(parse_config_text(R"({"participation": true})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"rounds": 2.5})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"trainer": {"epochs": "one"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"trainer": 3})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"partition": {"cardinalities": [0]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"partition": {"cardinalities": 7}})"), ConfigError);
}

// ---------------------------------------------------------------------------
// Data source and partition coupling

TEST_CASE("data source keys cannot be mixed", "[config]") {
  // Synthetic parameters make no sense for file-backed data, and vice versa.
  CHECK_THROWS_AS(parse_config_text(
                      R"({"data": {"source": "idx", "images": "a", "labels": "b",
                          "per_class": 10}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"data": {"source": "blobs", "images": "a"}})"),
                  ConfigError);
  // File-backed data needs both paths.
  CHECK_THROWS_AS(parse_config_text(R"({"data": {"source": "idx", "images": "a"}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"data": {"source": "nowhere"}})"), ConfigError);
}

TEST_CASE("the balanced partition takes no label skew", "[config]") {
  CHECK_THROWS_AS(
      parse_config_text(R"({"partition": {"mode": "iid", "labels_per_client": 2}})"),
      ConfigError);
  CHECK_NOTHROW(
      parse_config_text(R"({"partition": {"mode": "label_skew", "labels_per_client": 2}})"));
  CHECK_THROWS_AS(parse_config_text(R"({"partition": {"mode": "sorted"}})"), ConfigError);
}

TEST_CASE("cardinalities must cover every client", "[config]") {
  CHECK_NOTHROW(parse_config_text(
      R"({"num_clients": 3, "partition": {"cardinalities": [10, 20, 30]}})"));
  CHECK_THROWS_AS(parse_config_text(
                      R"({"num_clients": 3, "partition": {"cardinalities": [10, 20]}})"),
                  ConfigError);
}

// ---------------------------------------------------------------------------
// Round trip and files

TEST_CASE("serialized configurations parse back equal", "[config]") {
  const std::string doc = R"({
    "num_clients": 12,
    "participation": 0.5,
    "rounds": 17,
    "repetitions": 4,
    "master_seed": 987654321,
    "threshold": 0.75,
    "output_dir": "out/exp1",
    "emit_plot_data": false,
    "model": {"kind": "mlp", "hidden_dims": [8, 4]},
    "trainer": {"epochs": 2, "batch_size": 32, "base_lr": 0.05, "lr_decay": 0.95},
    "data": {"source": "blobs", "num_classes": 4, "per_class": 150, "input_dim": 3,
             "separation": 2.5, "holdout_fraction": 0.2},
    "partition": {"mode": "label_skew", "labels_per_client": 2,
                  "cardinalities": [40, 40, 40, 40, 40, 40, 40, 40, 40, 40, 40, 40]},
    "strategies": [
      {"kind": "fedavg"},
      {"kind": "fedcostwavg", "alpha": 0.25},
      {"kind": "fedcontrol", "alpha": 0.2, "beta": 0.3, "lambda": 0.8}
    ]
  })";

  const auto cfg = parse_config_text(doc);
  CHECK(cfg.num_clients == 12);
  CHECK(cfg.model_kind == ModelKind::Mlp);
  CHECK(cfg.hidden_dims == std::vector<int>{8, 4});
  CHECK(cfg.partition_mode == PartitionMode::LabelSkew);
  REQUIRE(cfg.strategies.size() == 3);
  CHECK(cfg.strategies[1].beta == 0.75);
  CHECK(cfg.strategies[2].lambda == 0.8);

  const auto json = config_to_json(cfg);
  const auto reparsed = parse_config_text(json.dump());
  CHECK(config_to_json(reparsed).dump(2) == json.dump(2));
  CHECK(reparsed.master_seed == cfg.master_seed);
  CHECK(reparsed.cardinalities == cfg.cardinalities);
  CHECK(reparsed.strategies[1].alpha == cfg.strategies[1].alpha);
}

TEST_CASE("defaults also survive the round trip", "[config]") {
  const auto cfg = parse_config_text("{}");
  const auto reparsed = parse_config_text(config_to_json(cfg).dump());
  CHECK(config_to_json(reparsed).dump() == config_to_json(cfg).dump());
}

TEST_CASE("config files are read from disk with io errors distinguished", "[config]") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "fedcontrol_config_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const auto good = dir / "good.json";
  {
    std::ofstream out(good);
    out << R"({"rounds": 5})";
  }
  CHECK(parse_config(good).rounds == 5);

  CHECK_THROWS_AS(parse_config(dir / "missing.json"), IoError);

  const auto bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"rounds": )";
  }
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("business rules run after parsing", "[config]") {
  CHECK_THROWS_AS(parse_config_text(R"({"num_clients": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"participation": 0.0})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"rounds": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"repetitions": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"threshold": 1.0})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"model": {"kind": "mlp"}})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text(R"({"model": {"kind": "logistic", "hidden_dims": [4]}})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"data": {"holdout_fraction": 0.0}})"), ConfigError);
}
