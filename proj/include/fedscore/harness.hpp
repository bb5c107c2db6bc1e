#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedscore/aggregation.hpp"
#include "fedscore/attacks.hpp"
#include "fedscore/contribution.hpp"
#include "fedscore/data.hpp"
#include "fedscore/train.hpp"

namespace fedscore {

struct DataConfig {
  enum class Source { synthetic, csv };
  enum class Partition { iid, dirichlet };

  Source source = Source::synthetic;
  SyntheticSpec synthetic;
  std::string csv_path;
  std::string label_column;
  Normalization normalization = Normalization::zscore;
  Partition partition = Partition::iid;
  double alpha = 1.0;                // Dirichlet concentration
  bool linear_label_noise = false;   // per-client noise ramp 0 .. 1
  double holdout_fraction = 0.2;     // server-side validation share
};

struct ModelConfig {
  int hidden = 0;  // 0 = logistic regression, > 0 = one tanh layer
};

struct ExperimentConfig {
  std::string experiment_id = "experiment";
  int clients = 5;
  int rounds = 3;
  int repetitions = 10;
  std::uint64_t base_seed = 42;
  int threads = 0;  // parallel repetitions; 0 = hardware concurrency
  DataConfig data;
  ModelConfig model;
  TrainingHyperParams training;
  int local_steps_min = 0;  // when max > 0, per-client step counts are drawn
  int local_steps_max = 0;  // uniformly from [min, max] once per repetition
  AggregatorConfig aggregator;
  std::vector<CeMethod> ce_methods{CeMethod::sv, CeMethod::gtg, CeMethod::loo, CeMethod::adp};
  GtgConfig gtg;
  bool adp_on_deltas = false;  // cosine drift on update deltas instead of raw vectors
  UtilityKind utility = UtilityKind::neg_loss;
  AttackConfig attack;
};

// Cross-field validation; throws std::invalid_argument naming the field.
void validate_config(const ExperimentConfig& cfg);

// Everything the attack loop reports about one round, minus the update itself.
struct AttackTrace {
  double score_before = 0.0;
  double score_after = 0.0;
  bool feasible = true;
  double constraint_slack = 0.0;
  int accepted_steps = 0;
};

struct RoundRecord {
  int round = 0;  // 1-based
  double global_loss = 0.0;
  double global_accuracy = 0.0;
  int krum_selected = -1;      // 0-based; -1 when the rule is not krum
  std::vector<int> zeno_kept;  // 0-based, ascending; empty when not zeno
  std::map<CeMethod, ScoreVector> raw_scores;
  std::map<CeMethod, ScoreVector> norm_scores;
  bool adp_zero_norm = false;
  std::optional<AttackTrace> attack;
};

struct RepetitionResult {
  std::uint64_t seed = 0;
  std::vector<std::size_t> client_sizes;
  std::vector<RoundRecord> rounds;
  // Across-round aggregates: raw is the mean of raw per-round scores over the
  // rounds the method kept; norm is the unit-sum aggregate of the normalized
  // per-round scores.
  std::map<CeMethod, ScoreVector> final_raw;
  std::map<CeMethod, ScoreVector> final_norm;
};

struct ExperimentResult {
  std::vector<RepetitionResult> repetitions;
};

// One repetition's live state, exposed so tests can drive single rounds.
struct ExperimentState {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  Rng root{0};
  std::vector<ClientDataset> clients;
  std::vector<int> local_steps;  // per client
  Dataset validation;
  Dataset attacker_view;
  ModelParams global;
  AdpState adp;
  int next_round = 1;
};

// Builds data, partition, holdout, attacker view and the initial model for
// seed. Deterministic: the same (cfg, seed) always yields the same state.
ExperimentState init_repetition(const ExperimentConfig& cfg, std::uint64_t seed);

// Runs one round: honest local training, the configured attack's
// modification, aggregation, and every configured score method on the
// submitted updates.
RoundRecord run_round(ExperimentState& st);

RepetitionResult run_repetition(const ExperimentConfig& cfg, std::uint64_t seed);

// Repetition r uses seed base_seed + r; repetitions run in parallel and are
// merged by index, so thread count never affects results.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace fedscore
