#include <iostream>

#include "CLI11.hpp"
#include "fracland/errors.hpp"
#include "fracland_cli/config.hpp"
#include "fracland_cli/experiments.hpp"

int main(int argc, char** argv) {
  using namespace fracland;
  CLI::App app{"fracland: memory-driven bistable dynamics experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  cli::Overrides ov;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "base seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "experiment config, YAML or JSON")->check(CLI::ExistingFile);

  auto* list = app.add_subcommand("list", "print the experiment catalog");
  std::vector<std::pair<std::string, CLI::App*>> kinds;
  for (const auto& info : cli::list_experiments()) {
    kinds.emplace_back(info.kind, app.add_subcommand(info.kind, info.summary));
  }

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& info : cli::list_experiments()) {
      std::cout << info.kind << ": " << info.summary << '\n';
      for (const auto& f : info.fields) {
        std::cout << "  " << f.name << (f.required ? " (required)" : "") << ": " << f.description << '\n';
      }
    }
    return 0;
  }

  std::string kind;
  for (const auto& [k, sub] : kinds) {
    if (sub->parsed()) kind = k;
  }
  if (*seed_opt) ov.seed = seed;
  if (*out_opt) ov.out = out;
  if (*threads_opt) ov.threads = threads;

  cli::Experiment experiment;
  try {
    const auto doc = config_path.empty() ? cli::parse_yaml("", "<defaults>") : cli::load_config(config_path);
    experiment = cli::parse_experiment(doc, ov, kind);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    const auto manifest = cli::run_experiment(experiment);
    std::cout << "wrote " << manifest["artifacts"].size() << " artifacts and manifest.json to " << experiment.out
              << " in " << manifest["timing"]["wall_seconds"].get<double>() << " s\n";
  } catch (const std::exception& e) {
    std::cerr << kind << " failed: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
