// Command line front end: run / compare / attack subcommands over a JSON
// experiment config. Exit codes: 0 success, 1 runtime failure, 2 bad config
// or bad arguments.
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedscore/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated contribution-score testbed"};
  app.set_version_flag("--version", std::string(fedscore::kToolVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> repetitions;
  std::vector<std::string> aggregators;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config file (JSON)")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--seed", seed, "Override base_seed");
    cmd->add_option("--repetitions", repetitions, "Override repetitions");
  };

  CLI::App* run = app.add_subcommand("run", "Run one experiment and write score tables");
  add_common(run);

  CLI::App* compare =
      app.add_subcommand("compare", "Run the config under several aggregation rules");
  add_common(compare);
  compare->add_option("--aggregators", aggregators, "Aggregation rules to compare")
      ->required()
      ->delimiter(',');

  CLI::App* attack = app.add_subcommand("attack", "Run paired baseline/attack experiments");
  add_common(attack);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  fedscore::CliOverrides overrides;
  overrides.seed = seed;
  overrides.repetitions = repetitions;

  if (run->parsed()) {
    return fedscore::cmd_run(config_path, out_dir, overrides);
  }
  if (compare->parsed()) {
    return fedscore::cmd_compare(config_path, aggregators, out_dir, overrides);
  }
  return fedscore::cmd_attack(config_path, out_dir, overrides);
}
