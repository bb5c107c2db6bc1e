#include "fedscore/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedscore/config.hpp"
#include "fedscore/csvio.hpp"
#include "fedscore/stats.hpp"

namespace fedscore {

namespace {

using nlohmann::json;

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

ExperimentConfig load_with_overrides(const std::string& config_path,
                                     const CliOverrides& overrides) {
  ExperimentConfig cfg = load_config(config_path);
  if (overrides.seed) {
    cfg.base_seed = *overrides.seed;
  }
  if (overrides.repetitions) {
    cfg.repetitions = *overrides.repetitions;
  }
  validate_config(cfg);
  return cfg;
}

void write_manifest(const std::string& out_dir, const ExperimentConfig& cfg,
                    const std::vector<std::string>& artifacts, double wall_seconds,
                    const json& extra = json::object()) {
  json m;
  m["artifacts"] = artifacts;
  m["config"] = json::parse(canonical_config_text(cfg));
  m["config_hash"] = config_hash_hex(cfg);
  m["tool_version"] = kToolVersion;
  m["wall_time_seconds"] = wall_seconds;
  for (const auto& [key, value] : extra.items()) {
    m[key] = value;
  }
  write_text_file(out_dir + "/manifest.json", m.dump(2) + "\n");
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_scores_csv(const std::string& path, const ExperimentConfig& cfg,
                      const ExperimentResult& res) {
  CsvWriter csv({"experiment_id", "seed", "ce_method", "aggregator", "client", "raw_score",
                 "norm_score"});
  const std::string agg = agg_rule_name(cfg.aggregator.rule);
  for (const auto& rep : res.repetitions) {
    for (int c = 0; c < cfg.clients; ++c) {
      for (CeMethod m : cfg.ce_methods) {
        csv.row({cfg.experiment_id, std::to_string(rep.seed), ce_method_name(m), agg,
                 std::to_string(c + 1), format_double(rep.final_raw.at(m).values[c]),
                 format_double(rep.final_norm.at(m).values[c])});
      }
    }
  }
  csv.save(path);
}

void write_rounds_csv(const std::string& path, const ExperimentConfig& cfg,
                      const ExperimentResult& res) {
  std::vector<std::string> header{"seed", "round", "global_loss", "global_accuracy",
                                  "krum_selected", "zeno_kept"};
  for (CeMethod m : cfg.ce_methods) {
    for (int c = 0; c < cfg.clients; ++c) {
      header.push_back(std::string(ce_method_name(m)) + "_client" + std::to_string(c + 1));
    }
  }
  CsvWriter csv(header);
  for (const auto& rep : res.repetitions) {
    for (const auto& round : rep.rounds) {
      std::vector<std::string> cells{std::to_string(rep.seed), std::to_string(round.round),
                                     format_double(round.global_loss),
                                     format_double(round.global_accuracy)};
      cells.push_back(round.krum_selected >= 0 ? std::to_string(round.krum_selected + 1) : "");
      std::string kept;
      for (int k : round.zeno_kept) {
        if (!kept.empty()) {
          kept += '|';
        }
        kept += std::to_string(k + 1);
      }
      cells.push_back(kept);
      for (CeMethod m : cfg.ce_methods) {
        for (int c = 0; c < cfg.clients; ++c) {
          cells.push_back(format_double(round.norm_scores.at(m).values[c]));
        }
      }
      csv.row(cells);
    }
  }
  csv.save(path);
}

}  // namespace

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const CliOverrides& overrides) {
  return guarded([&] {
    const ExperimentConfig cfg = load_with_overrides(config_path, overrides);
    std::filesystem::create_directories(out_dir);
    WallClock clock;
    const ExperimentResult res = run_experiment(cfg);
    write_scores_csv(out_dir + "/scores.csv", cfg, res);
    write_rounds_csv(out_dir + "/rounds.csv", cfg, res);
    write_manifest(out_dir, cfg, {"scores.csv", "rounds.csv"}, clock.seconds());
  });
}

int cmd_compare(const std::string& config_path, const std::vector<std::string>& aggregators,
                const std::string& out_dir, const CliOverrides& overrides) {
  return guarded([&] {
    ExperimentConfig cfg = load_with_overrides(config_path, overrides);
    if (aggregators.empty()) {
      throw std::invalid_argument("compare: aggregator list must not be empty");
    }
    std::vector<AggRule> rules;
    for (const auto& name : aggregators) {
      const AggRule r = parse_agg_rule(name);
      if (std::find(rules.begin(), rules.end(), r) != rules.end()) {
        throw std::invalid_argument("compare: duplicate aggregator '" + name + "'");
      }
      rules.push_back(r);
    }
    if (std::find(rules.begin(), rules.end(), AggRule::fedavg) == rules.end()) {
      rules.insert(rules.begin(), AggRule::fedavg);
    }

    std::filesystem::create_directories(out_dir);
    WallClock clock;

    // samples[rule][method][client] holds the final normalized score of one
    // repetition per entry; every rule reuses the same seed sequence.
    std::map<AggRule, std::map<CeMethod, std::vector<std::vector<double>>>> samples;
    for (AggRule rule : rules) {
      ExperimentConfig run_cfg = cfg;
      run_cfg.aggregator.rule = rule;
      validate_config(run_cfg);
      const ExperimentResult res = run_experiment(run_cfg);
      auto& per_method = samples[rule];
      for (CeMethod m : cfg.ce_methods) {
        auto& per_client = per_method[m];
        per_client.assign(cfg.clients, {});
        for (const auto& rep : res.repetitions) {
          for (int c = 0; c < cfg.clients; ++c) {
            per_client[c].push_back(rep.final_norm.at(m).values[c]);
          }
        }
      }
    }

    auto mean_vector = [&](AggRule rule, CeMethod m) {
      std::vector<double> out(cfg.clients);
      for (int c = 0; c < cfg.clients; ++c) {
        out[c] = mean_of(samples.at(rule).at(m)[c]);
      }
      return out;
    };
    std::map<AggRule, std::map<CeMethod, double>> rmse_table;
    for (AggRule rule : rules) {
      for (CeMethod m : cfg.ce_methods) {
        rmse_table[rule][m] = rmse(mean_vector(rule, m), mean_vector(AggRule::fedavg, m));
      }
    }

    CsvWriter compare({"aggregator", "ce_method", "client", "mean", "sd", "ad_p", "rmse"});
    CsvWriter ad({"aggregator", "ce_method", "client", "ad_p"});
    for (AggRule rule : rules) {
      for (int c = 0; c < cfg.clients; ++c) {
        for (CeMethod m : cfg.ce_methods) {
          const auto& cur = samples.at(rule).at(m)[c];
          const auto& ref = samples.at(AggRule::fedavg).at(m)[c];
          const double p = anderson_darling(cur, ref).p_value;
          compare.row({agg_rule_name(rule), ce_method_name(m), std::to_string(c + 1),
                       format_double(mean_of(cur)), format_double(sample_sd(cur)),
                       format_double(p), format_double(rmse_table.at(rule).at(m))});
          ad.row({agg_rule_name(rule), ce_method_name(m), std::to_string(c + 1),
                  format_double(p)});
        }
      }
    }
    compare.save(out_dir + "/compare.csv");
    ad.save(out_dir + "/ad_tests.csv");

    CsvWriter rm({"aggregator", "ce_method", "rmse"});
    for (AggRule rule : rules) {
      for (CeMethod m : cfg.ce_methods) {
        rm.row({agg_rule_name(rule), ce_method_name(m),
                format_double(rmse_table.at(rule).at(m))});
      }
    }
    rm.save(out_dir + "/rmse.csv");

    json extra;
    json names = json::array();
    for (AggRule rule : rules) {
      names.push_back(agg_rule_name(rule));
    }
    extra["aggregators"] = names;
    write_manifest(out_dir, cfg, {"compare.csv", "ad_tests.csv", "rmse.csv"}, clock.seconds(),
                   extra);
  });
}

int cmd_attack(const std::string& config_path, const std::string& out_dir,
               const CliOverrides& overrides) {
  return guarded([&] {
    const ExperimentConfig cfg = load_with_overrides(config_path, overrides);
    if (cfg.attack.kind != AttackKind::self_improvement &&
        cfg.attack.kind != AttackKind::targeted_decrease) {
      throw std::invalid_argument(
          "config: attack.kind must be self_improvement or targeted_decrease");
    }
    ExperimentConfig baseline_cfg = cfg;
    baseline_cfg.attack.kind = AttackKind::none;
    validate_config(baseline_cfg);

    std::filesystem::create_directories(out_dir);
    WallClock clock;
    const ExperimentResult baseline = run_experiment(baseline_cfg);
    const ExperimentResult attacked = run_experiment(cfg);

    const int focal =
        cfg.attack.kind == AttackKind::self_improvement ? cfg.attack.attacker : cfg.attack.target;
    const TTail tail = cfg.attack.kind == AttackKind::self_improvement ? TTail::greater
                                                                       : TTail::two_sided;
    const char* tail_name =
        cfg.attack.kind == AttackKind::self_improvement ? "greater" : "two_sided";

    auto score_pair = [&](int rep, int round, CeMethod m) {
      const double base =
          baseline.repetitions[rep].rounds[round].norm_scores.at(m).values[focal];
      const double attk =
          attacked.repetitions[rep].rounds[round].norm_scores.at(m).values[focal];
      return std::pair<double, double>{base, attk};
    };

    CsvWriter diffs({"seed", "round", "ce_method", "baseline_score", "attack_score",
                     "abs_delta", "rel_delta"});
    for (int r = 0; r < cfg.repetitions; ++r) {
      for (int t = 0; t < cfg.rounds; ++t) {
        for (CeMethod m : cfg.ce_methods) {
          const auto [b, a] = score_pair(r, t, m);
          diffs.row({std::to_string(baseline.repetitions[r].seed), std::to_string(t + 1),
                     ce_method_name(m), format_double(b), format_double(a),
                     format_double(std::fabs(a - b)), format_double(std::fabs(a - b) / b)});
        }
      }
    }
    // Pooled rows: per-round averages across seeds, then an overall row. The
    // pooled relative delta is pooled |delta| over pooled baseline, so a
    // single zero-baseline seed does not blow it up.
    for (int t = 0; t <= cfg.rounds; ++t) {
      const bool overall = t == cfg.rounds;
      for (CeMethod m : cfg.ce_methods) {
        double sum_b = 0.0;
        double sum_a = 0.0;
        double sum_abs = 0.0;
        int n = 0;
        for (int r = 0; r < cfg.repetitions; ++r) {
          for (int u = overall ? 0 : t; u < (overall ? cfg.rounds : t + 1); ++u) {
            const auto [b, a] = score_pair(r, u, m);
            sum_b += b;
            sum_a += a;
            sum_abs += std::fabs(a - b);
            ++n;
          }
        }
        diffs.row({"pooled", overall ? "all" : std::to_string(t + 1), ce_method_name(m),
                   format_double(sum_b / n), format_double(sum_a / n),
                   format_double(sum_abs / n), format_double(sum_abs / sum_b)});
      }
    }
    diffs.save(out_dir + "/attack_diffs.csv");

    CsvWriter tt({"round", "ce_method", "tail", "n", "p_value"});
    for (int t = 0; t <= cfg.rounds; ++t) {
      const bool overall = t == cfg.rounds;
      for (CeMethod m : cfg.ce_methods) {
        std::vector<double> signed_diffs;
        for (int r = 0; r < cfg.repetitions; ++r) {
          for (int u = overall ? 0 : t; u < (overall ? cfg.rounds : t + 1); ++u) {
            const auto [b, a] = score_pair(r, u, m);
            signed_diffs.push_back(a - b);
          }
        }
        tt.row({overall ? "all" : std::to_string(t + 1), ce_method_name(m), tail_name,
                std::to_string(signed_diffs.size()),
                format_double(paired_t_test(signed_diffs, tail))});
      }
    }
    tt.save(out_dir + "/ttests.csv");

    CsvWriter losses({"seed", "round", "baseline_loss", "attack_loss"});
    for (int r = 0; r < cfg.repetitions; ++r) {
      for (int t = 0; t < cfg.rounds; ++t) {
        losses.row({std::to_string(baseline.repetitions[r].seed), std::to_string(t + 1),
                    format_double(baseline.repetitions[r].rounds[t].global_loss),
                    format_double(attacked.repetitions[r].rounds[t].global_loss)});
      }
    }
    losses.save(out_dir + "/losses.csv");

    write_manifest(out_dir, cfg, {"attack_diffs.csv", "ttests.csv", "losses.csv"},
                   clock.seconds());
  });
}

}  // namespace fedscore
