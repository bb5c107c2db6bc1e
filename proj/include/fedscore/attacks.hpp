#pragma once

#include "fedscore/aggregation.hpp"
#include "fedscore/contribution.hpp"
#include "fedscore/dataset.hpp"
#include "fedscore/rng.hpp"
#include "fedscore/train.hpp"

namespace fedscore {

enum class AttackKind { none, label_flip, gradient_flip, self_improvement, targeted_decrease };

// How the self-improvement attacker builds its submission: `direct` ascends
// the score gradient, `surrogate` trains on its view of the validation data.
enum class SiMode { direct, surrogate };

struct AttackConfig {
  AttackKind kind = AttackKind::none;
  int attacker = 0;                      // 0-based client index
  int target = 1;                        // victim, targeted_decrease only
  CeMethod ce_method = CeMethod::loo;    // score being gamed (loo or gtg)
  SiMode si_mode = SiMode::direct;
  double reg_weight = 0.001;             // norm regularizer, targeted_decrease
  double loss_budget = 0.005;            // bound on (loss shift)^2, targeted_decrease
  double view_fraction = 1.0;            // share of the validation set the attacker sees
  int steps = 50;
  double step_size = 0.1;
};

// Shifts every label to the next class, (y + 1) mod classes.
ClientDataset label_flip(const ClientDataset& client);

// Reflects an honest update through the broadcast model: 2 * prev - honest.
ModelParams gradient_flip(const ModelParams& honest, const ModelParams& prev_global);

// The attacker's reconstruction of a server-side score, computed on its view:
// loo ignores `perms`; gtg walks the given frozen permutations with the usual
// truncation rule (eps2 <= 0 disables it).
double proxy_score(const RoundUpdateSet& set, int score_of, const Dataset& view,
                   CeMethod method, const std::vector<std::vector<int>>& perms, double eps2);

// Gradient of proxy_score with respect to the attacker's update, exploiting
// that size-weighted averaging is linear in each submission.
std::vector<double> proxy_score_gradient(const RoundUpdateSet& set, int attacker, int score_of,
                                         const Dataset& view, CeMethod method,
                                         const std::vector<std::vector<int>>& perms,
                                         double eps2);

struct AttackResult {
  ModelParams update;
  double score_before = 0.0;     // proxy score of the honest submission
  double score_after = 0.0;      // proxy score of the returned submission
  bool feasible = true;          // targeted_decrease found a constraint-satisfying iterate
  double constraint_slack = 0.0; // loss_budget minus the achieved squared loss shift
  int accepted_steps = 0;
};

// Gradient ascent on the attacker's own score, starting from its honest
// update; returns the best-scoring iterate seen (the honest update included).
// In surrogate mode the single candidate is a model trained on the view.
// `set` holds every client's honest update for the round.
AttackResult self_improvement(const RoundUpdateSet& set, const Dataset& view,
                              const GtgConfig& gtg, const AttackConfig& cfg,
                              const TrainingHyperParams& surrogate_hp, Rng& rng);

// Gradient descent on the victim's score plus a norm regularizer, keeping the
// squared shift of the aggregated validation loss (relative to aggregation
// without the attacker) under cfg.loss_budget via step halving. Returns the
// best feasible iterate, or the honest update flagged infeasible when no
// iterate satisfies the constraint.
AttackResult targeted_decrease(const RoundUpdateSet& set, const Dataset& view,
                               const GtgConfig& gtg, const AttackConfig& cfg, Rng& rng);

}  // namespace fedscore
