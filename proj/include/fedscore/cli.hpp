#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedscore/harness.hpp"

namespace fedscore {

inline constexpr const char* kToolVersion = "0.1.0";

// The two knobs that vary between invocations of the same experiment.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> repetitions;
};

// Exit codes across all commands: 0 success, 1 runtime failure, 2 bad config.
// Errors are printed to stderr.

// Runs the configured experiment; writes scores.csv, rounds.csv and
// manifest.json into out_dir.
int cmd_run(const std::string& config_path, const std::string& out_dir,
            const CliOverrides& overrides);

// Reruns the config once per aggregator (fedavg is always included as the
// reference) with shared seeds; writes compare.csv, ad_tests.csv, rmse.csv
// and manifest.json.
int cmd_compare(const std::string& config_path, const std::vector<std::string>& aggregators,
                const std::string& out_dir, const CliOverrides& overrides);

// Runs the configured score attack and its attack-free twin with shared
// seeds; writes attack_diffs.csv, ttests.csv, losses.csv and manifest.json.
// The config's attack.kind must be self_improvement or targeted_decrease.
int cmd_attack(const std::string& config_path, const std::string& out_dir,
               const CliOverrides& overrides);

}  // namespace fedscore
