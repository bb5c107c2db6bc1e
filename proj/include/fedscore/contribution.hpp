#pragma once

#include <cstdint>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "fedscore/aggregation.hpp"
#include "fedscore/dataset.hpp"
#include "fedscore/rng.hpp"

namespace fedscore {

enum class UtilityKind { neg_loss, accuracy };

enum class CeMethod { sv, gtg, loo, adp };

const char* ce_method_name(CeMethod m);

// Coalition utility v(S) = utility(fed_avg over S) measured on a fixed
// validation set; v(empty) is the utility of the broadcast model. Values are
// memoized per coalition bitmask and safe to query from multiple threads.
class CoalitionEvaluator {
 public:
  CoalitionEvaluator(const RoundUpdateSet& set, const Dataset& validation, UtilityKind utility);

  int num_clients() const { return clients_; }
  std::uint32_t full_mask() const { return (std::uint32_t{1} << clients_) - 1; }

  double value(std::uint32_t mask) const;

  std::uint64_t lookups() const;
  std::uint64_t evaluations() const;

 private:
  const RoundUpdateSet& set_;
  const Dataset& validation_;
  UtilityKind utility_;
  int clients_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint32_t, double> cache_;
  mutable std::uint64_t lookups_ = 0;
  mutable std::uint64_t evaluations_ = 0;
};

// One method's per-client scores for one round.
struct ScoreVector {
  CeMethod method = CeMethod::sv;
  int round = 0;
  bool skipped = false;  // round ignored by the method's relevance gate
  std::vector<double> values;
};

struct GtgConfig {
  double eps0 = 2e-4;  // skip the round when |v(full) - v(empty)| falls below this
  double eps1 = 0.75;  // fraction of the permutation budget actually evaluated
  double eps2 = 1e-4;  // stop scanning a permutation once a marginal drops to this (<= 0 disables)
  std::uint64_t max_permutations = 120;
};

// Exact Shapley values over all coalitions; requires num_clients <= 16.
ScoreVector exact_shapley(const CoalitionEvaluator& ev);

// Permutation sample used by the truncated estimator: leaders rotate
// round-robin so every client heads an equal share. Below 9 clients (and
// count <= clients!) suffixes are drawn without replacement, so asking for
// exactly clients! permutations yields each one exactly once.
std::vector<std::vector<int>> gtg_sample_permutations(int clients, std::uint64_t count, Rng& rng);

// ceil(eps1 * min(clients!, max_permutations)), the sample size gtg_shapley
// actually runs.
std::uint64_t gtg_permutation_count(int clients, const GtgConfig& cfg);

// Truncated Monte-Carlo Shapley with a round-relevance gate: runs
// ceil(eps1 * min(clients!, max_permutations)) sampled permutations and
// accumulates marginals until one drops to eps2, at which point the rest of
// the permutation (including that position) contributes nothing.
ScoreVector gtg_shapley(const CoalitionEvaluator& ev, const GtgConfig& cfg, Rng& rng);

// v(all) - v(all minus k) per client.
ScoreVector leave_one_out(const CoalitionEvaluator& ev);

// Running mean of (1 - cos) between each client's submission and the
// aggregated model, carried across rounds.
struct AdpState {
  std::vector<double> drift;  // one running mean per client
  int rounds_seen = 0;
};

struct AdpRoundResult {
  ScoreVector scores;
  bool zero_norm = false;  // some cosine hit a zero-length vector this round
};

// Updates the drift state in place and scores each client as
// (1 - exp(-1/drift)) / (1 + exp(-1/drift)), with drift 0 scoring 1. When
// on_deltas is set, cosines compare update deltas from prev_global instead of
// raw parameter vectors.
AdpRoundResult adp_round(AdpState& state, const RoundUpdateSet& set,
                         const ModelParams& aggregated, bool on_deltas);

// Shifts scores by their minimum and scales to unit sum; an all-equal vector
// becomes uniform.
ScoreVector normalize_scores(const ScoreVector& raw);

// Mean of the non-skipped rounds, rescaled to unit sum. All rounds skipped
// yields a uniform vector.
ScoreVector aggregate_final_scores(const std::vector<ScoreVector>& rounds);

}  // namespace fedscore
