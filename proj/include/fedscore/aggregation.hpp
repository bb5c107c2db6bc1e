#pragma once

#include <cstdint>
#include <vector>

#include "fedscore/dataset.hpp"
#include "fedscore/model.hpp"

namespace fedscore {

enum class AggRule { fedavg, fedprox, fednova, krum, zeno };

const char* agg_rule_name(AggRule rule);

// Throws std::invalid_argument for anything but the five rule names.
AggRule parse_agg_rule(const std::string& name);

// FedNova's update scaling. `literal` divides each client delta by the sum of
// local step counts; `normalized` multiplies that by the number of clients,
// which reduces to dataset-weighted averaging when step counts are equal.
enum class FedNovaMode { literal, normalized };

struct AggregatorConfig {
  AggRule rule = AggRule::fedavg;
  int kappa = 0;           // tolerated adversaries (krum, zeno)
  double rho = 1e-4;       // norm penalty in the zeno descent score
  FedNovaMode fednova_mode = FedNovaMode::literal;
};

// One round's submissions: the broadcast model, each client's result, its
// dataset size and its local step count, aligned by index.
struct RoundUpdateSet {
  ModelParams prev_global;
  std::vector<ModelParams> updates;
  std::vector<std::size_t> sizes;
  std::vector<int> steps;

  std::size_t clients() const { return updates.size(); }
};

// Dataset-size weighted average over the clients listed in `subset`
// (deduplicated, order-insensitive). An empty subset returns prev_global.
ModelParams fed_avg(const RoundUpdateSet& set, const std::vector<int>& subset);

// Same, with the coalition given as a bitmask over client indices.
ModelParams fed_avg_mask(const RoundUpdateSet& set, std::uint32_t mask);

// All clients.
ModelParams fed_avg_all(const RoundUpdateSet& set);

// prev_global - sum_k (steps_k * n_k) / (steps_total * n) * (prev_global - update_k),
// times clients() in normalized mode.
ModelParams fed_nova(const RoundUpdateSet& set, FedNovaMode mode);

struct KrumResult {
  ModelParams model;
  int selected = -1;            // 0-based client index
  std::vector<double> scores;   // sum of squared distances to nearest peers
};

// Picks the client whose update minimizes the summed squared distance to its
// clients() - kappa - 2 nearest peers; ties go to the lowest index.
KrumResult krum(const RoundUpdateSet& set, int kappa);

struct ZenoResult {
  ModelParams model;
  std::vector<int> kept;        // 0-based, ascending
  std::vector<double> scores;   // loss descent minus norm penalty
};

// Scores each update by validation loss descent relative to prev_global minus
// rho * ||update||^2, keeps the clients() - kappa best (ties to the lowest
// index) and averages them weighted by dataset size.
ZenoResult zeno(const RoundUpdateSet& set, int kappa, double rho, const Dataset& validation);

// Dispatch on cfg.rule. Outputs for krum/zeno report the selection; for the
// other rules they stay empty.
struct AggregateResult {
  ModelParams model;
  int krum_selected = -1;
  std::vector<int> zeno_kept;
};

AggregateResult aggregate(const RoundUpdateSet& set, const AggregatorConfig& cfg,
                          const Dataset& validation);

}  // namespace fedscore
