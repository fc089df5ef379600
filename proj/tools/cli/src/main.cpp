#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "hsdlab/cli/commands.hpp"
#include "hsdlab/errors.hpp"

int main(int argc, char** argv) {
  using namespace hsd::cli;

  CLI::App app{"hsdlab: adversarial direction experiments on grid MDPs"};
  app.require_subcommand(1);

  std::string config_path;
  CommandOptions opts;
  std::optional<std::uint64_t> seed_override;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_flag("--force", opts.force, "retrain even when the stored policy matches the config");
  app.add_option("--jobs", opts.jobs, "parallel evaluation episodes")->check(CLI::PositiveNumber);
  app.add_option("--seed-override", seed_override, "replace the config's global_seed");

  std::vector<std::string> ids;
  auto* train = app.add_subcommand("train", "train policies (all when no id is given)");
  train->add_option("ids", ids, "policy ids");
  auto* direction = app.add_subcommand("direction", "compute stored directions");
  direction->add_option("ids", ids, "direction ids");
  auto* calibrate = app.add_subcommand("calibrate", "calibrate kappa against Gaussian noise");
  calibrate->add_option("ids", ids, "policy ids");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate runs");
  evaluate->add_option("ids", ids, "run ids");
  auto* report = app.add_subcommand("report", "emit tables, heatmaps and the manifest");
  auto* theory = app.add_subcommand("theory", "linear forcing construction and dimension sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    LoadOptions load;
    load.seed_override = seed_override;
    if (const char* dir = std::getenv("HSDLAB_OUTPUT_DIR"); dir && *dir) load.output_override = dir;
    Commands cmd(load_config(config_path, load), opts, std::cout, std::cerr);

    if (*train) cmd.train(ids);
    else if (*direction) cmd.direction(ids);
    else if (*calibrate) cmd.calibrate(ids);
    else if (*evaluate) cmd.evaluate(ids);
    else if (*report) cmd.report();
    else if (*theory) cmd.theory();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
