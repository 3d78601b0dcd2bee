// Command-line experiment runner.
//
//   fedcontrol run <config.json> [--out DIR] [--seed U64] [--repetitions K]
//   fedcontrol validate <config.json>
//
// `run` executes the configured comparison and persists CSV/JSON artifacts;
// `validate` only parses and checks the config. Exit code 0 on success,
// nonzero with a diagnostic on stderr otherwise.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <fedcontrol/fedcontrol.hpp>

namespace {

int run_command(const std::string& config_path, const std::string& out_dir,
                const std::optional<std::uint64_t>& seed, const std::optional<int>& repetitions) {
  fedcontrol::ExperimentConfig cfg = fedcontrol::parse_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seed) cfg.master_seed = *seed;
  if (repetitions) cfg.repetitions = *repetitions;
  cfg.validate();

  const auto result = fedcontrol::run_experiment(cfg);
  std::cout << "wrote " << result.output_dir.string() << "/ (" << result.strategies.size()
            << " strategies x " << cfg.repetitions << " repetitions x " << cfg.rounds
            << " rounds)\n";
  for (const auto& strategy : result.strategies) {
    double final_mean = 0.0;
    for (const auto& rep : strategy.repetitions) {
      final_mean += rep.records.back().holdout_accuracy;
    }
    final_mean /= static_cast<double>(strategy.repetitions.size());
    std::cout << "  " << strategy.label << ": final holdout accuracy "
              << fedcontrol::format_real(final_mean) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated-learning aggregation experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> repetitions;

  auto* run = app.add_subcommand("run", "Run the configured experiment");
  run->add_option("config", config_path, "Experiment config file (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides config)");
  run->add_option("--seed", seed, "Master seed (overrides config)");
  run->add_option("--repetitions", repetitions, "Repetition count (overrides config)")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("config", config_path, "Experiment config file (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) {
      fedcontrol::parse_config(config_path);
      std::cout << "ok\n";
      return 0;
    }
    return run_command(config_path, out_dir, seed, repetitions);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
