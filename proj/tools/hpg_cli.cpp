#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hpg/cli/config.hpp"
#include "hpg/cli/experiments.hpp"
#include "hpg/version.hpp"

int main(int argc, char** argv) {
  using namespace hpg::cli;
  CLI::App app{"Policy-gradient experiments under weak smoothness"};
  app.set_version_flag("--version", std::string(hpg::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::optional<int> threads;
  for (const auto& [kind, name] : experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_option("--output", output, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kValidation;
  }

  Overrides ov;
  for (const auto& [kind, name] : experiment_names())
    if (app.got_subcommand(name)) ov.experiment = kind;
  ov.seed = seed;
  if (!output.empty()) ov.output_dir = output;
  ov.threads = threads;

  ExperimentConfig cfg;
  try {
    cfg = config_path.empty() ? parse_config_json(nlohmann::json::object(), std::filesystem::current_path(), ov)
                              : parse_config(config_path, ov);
  } catch (const ConfigError& e) {
    for (const auto& msg : e.errors()) std::cerr << "config error: " << msg << '\n';
    return kValidation;
  }

  Outcome o;
  try {
    o = run_experiment(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  if (!o.message.empty()) std::cerr << o.status << ": " << o.message << '\n';
  std::cout << to_string(cfg.experiment) << ": " << o.status << " (outputs in " << cfg.output_dir.string() << ")\n";
  return o.exit_code;
}
