#include "fedscore/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace fedscore {

ClientDataset label_flip(const ClientDataset& client) {
  ClientDataset out = client;
  const int c = out.data.classes;
  if (c < 2) {
    throw std::invalid_argument("label_flip: need at least two classes");
  }
  for (auto& y : out.data.labels) {
    y = (y + 1) % c;
  }
  out.provenance = Provenance::label_flipped;
  return out;
}

ModelParams gradient_flip(const ModelParams& honest, const ModelParams& prev_global) {
  if (!(honest.arch == prev_global.arch)) {
    throw std::invalid_argument("gradient_flip: arch mismatch");
  }
  ModelParams out = prev_global;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = 2.0 * prev_global.values[i] - honest.values[i];
  }
  return out;
}

namespace {

// One attacker's working copy of a round. Coalition utilities (negative view
// loss) and view-loss gradients are cached per coalition mask and thrown away
// whenever the attacker's candidate update changes.
class AttackContext {
 public:
  AttackContext(const RoundUpdateSet& base, int attacker, const Dataset& view)
      : set_(base), attacker_(attacker), view_(view) {
    const std::size_t k = set_.clients();
    if (k == 0 || k > 31) {
      throw std::invalid_argument("attack: need between 1 and 31 clients");
    }
    if (attacker < 0 || static_cast<std::size_t>(attacker) >= k) {
      throw std::invalid_argument("attack: attacker index out of range");
    }
    if (view.rows() == 0) {
      throw std::invalid_argument("attack: view is empty");
    }
  }

  const RoundUpdateSet& set() const { return set_; }
  std::uint32_t full_mask() const { return (std::uint32_t{1} << set_.clients()) - 1; }
  std::uint32_t bit(int c) const { return std::uint32_t{1} << c; }

  void set_attacker(const std::vector<double>& values) {
    set_.updates[attacker_].values = values;
    values_.clear();
    gradients_.clear();
  }

  const std::vector<double>& attacker_values() const {
    return set_.updates[attacker_].values;
  }

  // Negative mean view loss of the coalition's size-weighted average; the
  // empty coalition evaluates the broadcast model.
  double value(std::uint32_t mask) {
    auto it = values_.find(mask);
    if (it != values_.end()) {
      return it->second;
    }
    const ModelParams model = mask == 0 ? set_.prev_global : fed_avg_mask(set_, mask);
    const double v = -forward_loss(model, view_).loss;
    values_.emplace(mask, v);
    return v;
  }

  const std::vector<double>& loss_grad(std::uint32_t mask) {
    auto it = gradients_.find(mask);
    if (it != gradients_.end()) {
      return it->second;
    }
    const ModelParams model = mask == 0 ? set_.prev_global : fed_avg_mask(set_, mask);
    return gradients_.emplace(mask, loss_gradient(model, view_)).first->second;
  }

  // n_attacker / total size of the coalition.
  double attacker_weight(std::uint32_t mask) const {
    double total = 0.0;
    for (std::size_t i = 0; i < set_.clients(); ++i) {
      if (mask & (std::uint32_t{1} << i)) {
        total += static_cast<double>(set_.sizes[i]);
      }
    }
    return static_cast<double>(set_.sizes[attacker_]) / total;
  }

  double loo_score(int c) {
    return value(full_mask()) - value(full_mask() & ~bit(c));
  }

  double gtg_score(int c, const std::vector<std::vector<int>>& perms, double eps2) {
    if (perms.empty()) {
      throw std::invalid_argument("attack: no permutations for the sampled score");
    }
    double acc = 0.0;
    for (const auto& perm : perms) {
      std::uint32_t mask = 0;
      double prev = value(0);
      for (int x : perm) {
        const double cur = value(mask | bit(x));
        const double marginal = cur - prev;
        if (eps2 > 0.0 && marginal <= eps2) {
          break;
        }
        if (x == c) {
          acc += marginal;
        }
        mask |= bit(x);
        prev = cur;
      }
    }
    return acc / static_cast<double>(perms.size());
  }

  // d score(c) / d attacker update. Every coalition utility is
  // -loss(size-weighted average), so the chain rule turns each active
  // marginal into +-(attacker weight) times the loss gradient at that
  // coalition's average.
  std::vector<double> score_gradient(int c, CeMethod method,
                                     const std::vector<std::vector<int>>& perms, double eps2) {
    std::map<std::uint32_t, double> coeff;
    auto add = [&](std::uint32_t mask, double sign) {
      if (mask & bit(attacker_)) {
        coeff[mask] += sign * -attacker_weight(mask);
      }
    };
    if (method == CeMethod::loo) {
      add(full_mask(), 1.0);
      add(full_mask() & ~bit(c), -1.0);
    } else {
      for (const auto& perm : perms) {
        std::uint32_t mask = 0;
        double prev = value(0);
        for (int x : perm) {
          const std::uint32_t with = mask | bit(x);
          const double cur = value(with);
          const double marginal = cur - prev;
          if (eps2 > 0.0 && marginal <= eps2) {
            break;
          }
          if (x == c) {
            add(with, 1.0);
            if (mask != 0) {
              add(mask, -1.0);
            }
          }
          mask = with;
          prev = cur;
        }
      }
      const double inv = 1.0 / static_cast<double>(perms.size());
      for (auto& [mask, w] : coeff) {
        w *= inv;
      }
    }
    std::vector<double> g(set_.prev_global.values.size(), 0.0);
    for (const auto& [mask, w] : coeff) {
      if (w == 0.0) {
        continue;
      }
      const auto& lg = loss_grad(mask);
      for (std::size_t j = 0; j < g.size(); ++j) {
        g[j] += w * lg[j];
      }
    }
    return g;
  }

  double score(int c, CeMethod method, const std::vector<std::vector<int>>& perms,
               double eps2) {
    if (method == CeMethod::loo) {
      return loo_score(c);
    }
    if (method == CeMethod::gtg) {
      return gtg_score(c, perms, eps2);
    }
    throw std::invalid_argument("attack: score must be loo or gtg");
  }

 private:
  RoundUpdateSet set_;
  int attacker_;
  const Dataset& view_;
  std::map<std::uint32_t, double> values_;
  std::map<std::uint32_t, std::vector<double>> gradients_;
};

void check_attack_config(const RoundUpdateSet& set, const AttackConfig& cfg) {
  if (cfg.ce_method != CeMethod::loo && cfg.ce_method != CeMethod::gtg) {
    throw std::invalid_argument("attack: ce_method must be loo or gtg");
  }
  if (cfg.attacker < 0 || static_cast<std::size_t>(cfg.attacker) >= set.clients()) {
    throw std::invalid_argument("attack: attacker index out of range");
  }
  if (cfg.steps < 1) {
    throw std::invalid_argument("attack: steps must be >= 1");
  }
  if (!(cfg.step_size > 0.0)) {
    throw std::invalid_argument("attack: step_size must be positive");
  }
}

std::vector<std::vector<int>> frozen_permutations(const RoundUpdateSet& set,
                                                  const AttackConfig& cfg, const GtgConfig& gtg,
                                                  Rng& rng) {
  if (cfg.ce_method != CeMethod::gtg) {
    return {};
  }
  const int k = static_cast<int>(set.clients());
  return gtg_sample_permutations(k, gtg_permutation_count(k, gtg), rng);
}

}  // namespace

double proxy_score(const RoundUpdateSet& set, int score_of, const Dataset& view,
                   CeMethod method, const std::vector<std::vector<int>>& perms, double eps2) {
  AttackContext ctx(set, score_of, view);
  return ctx.score(score_of, method, perms, eps2);
}

std::vector<double> proxy_score_gradient(const RoundUpdateSet& set, int attacker, int score_of,
                                         const Dataset& view, CeMethod method,
                                         const std::vector<std::vector<int>>& perms,
                                         double eps2) {
  AttackContext ctx(set, attacker, view);
  return ctx.score_gradient(score_of, method, perms, eps2);
}

AttackResult self_improvement(const RoundUpdateSet& set, const Dataset& view,
                              const GtgConfig& gtg, const AttackConfig& cfg,
                              const TrainingHyperParams& surrogate_hp, Rng& rng) {
  check_attack_config(set, cfg);
  const auto perms = frozen_permutations(set, cfg, gtg, rng);
  AttackContext ctx(set, cfg.attacker, view);

  AttackResult res;
  res.update = set.updates[cfg.attacker];
  res.score_before = ctx.score(cfg.attacker, cfg.ce_method, perms, gtg.eps2);
  res.score_after = res.score_before;

  if (cfg.si_mode == SiMode::surrogate) {
    const ModelParams candidate =
        local_train(set.prev_global, view, surrogate_hp, rng.fork("surrogate"));
    ctx.set_attacker(candidate.values);
    const double s = ctx.score(cfg.attacker, cfg.ce_method, perms, gtg.eps2);
    if (std::isfinite(s) && s > res.score_after) {
      res.update = candidate;
      res.score_after = s;
      res.accepted_steps = 1;
    }
    return res;
  }

  std::vector<double> cur = set.updates[cfg.attacker].values;
  for (int step = 0; step < cfg.steps; ++step) {
    const auto g = ctx.score_gradient(cfg.attacker, cfg.ce_method, perms, gtg.eps2);
    for (std::size_t j = 0; j < cur.size(); ++j) {
      cur[j] += cfg.step_size * g[j];
    }
    if (!all_finite(cur)) {
      break;
    }
    ctx.set_attacker(cur);
    const double s = ctx.score(cfg.attacker, cfg.ce_method, perms, gtg.eps2);
    if (std::isfinite(s) && s > res.score_after) {
      res.update.values = cur;
      res.score_after = s;
      ++res.accepted_steps;
    }
  }
  return res;
}

AttackResult targeted_decrease(const RoundUpdateSet& set, const Dataset& view,
                               const GtgConfig& gtg, const AttackConfig& cfg, Rng& rng) {
  check_attack_config(set, cfg);
  if (cfg.target == cfg.attacker || cfg.target < 0 ||
      static_cast<std::size_t>(cfg.target) >= set.clients()) {
    throw std::invalid_argument("attack: target must be another client");
  }
  if (!(cfg.loss_budget > 0.0)) {
    throw std::invalid_argument("attack: loss_budget must be positive");
  }
  if (cfg.reg_weight < 0.0) {
    throw std::invalid_argument("attack: reg_weight must be >= 0");
  }
  const auto perms = frozen_permutations(set, cfg, gtg, rng);
  AttackContext ctx(set, cfg.attacker, view);

  const std::uint32_t full = ctx.full_mask();
  const std::uint32_t without_attacker = full & ~ctx.bit(cfg.attacker);
  const double loss_without = -ctx.value(without_attacker);
  auto shift_sq = [&]() {
    const double loss_with = -ctx.value(full);
    return (loss_with - loss_without) * (loss_with - loss_without);
  };
  auto objective = [&]() {
    return ctx.score(cfg.target, cfg.ce_method, perms, gtg.eps2) +
           cfg.reg_weight * squared_norm(ctx.attacker_values());
  };

  AttackResult res;
  res.update = set.updates[cfg.attacker];
  res.score_before = ctx.score(cfg.target, cfg.ce_method, perms, gtg.eps2);
  res.score_after = res.score_before;

  double best_objective = std::numeric_limits<double>::infinity();
  bool feasible_seen = false;
  if (shift_sq() < cfg.loss_budget) {
    feasible_seen = true;
    best_objective = objective();
    res.constraint_slack = cfg.loss_budget - shift_sq();
  }

  std::vector<double> cur = set.updates[cfg.attacker].values;
  for (int step = 0; step < cfg.steps; ++step) {
    auto g = ctx.score_gradient(cfg.target, cfg.ce_method, perms, gtg.eps2);
    for (std::size_t j = 0; j < g.size(); ++j) {
      g[j] += 2.0 * cfg.reg_weight * cur[j];
    }
    double eta = cfg.step_size;
    bool accepted = false;
    std::vector<double> cand(cur.size());
    for (int halving = 0; halving < 20; ++halving) {
      for (std::size_t j = 0; j < cur.size(); ++j) {
        cand[j] = cur[j] - eta * g[j];
      }
      if (!all_finite(cand)) {
        eta /= 2.0;
        continue;
      }
      ctx.set_attacker(cand);
      if (shift_sq() < cfg.loss_budget) {
        accepted = true;
        break;
      }
      eta /= 2.0;
    }
    if (!accepted) {
      ctx.set_attacker(cur);
      break;
    }
    cur = cand;
    ++res.accepted_steps;
    const double obj = objective();
    if (std::isfinite(obj) && obj < best_objective) {
      best_objective = obj;
      feasible_seen = true;
      res.update.values = cur;
      res.score_after = ctx.score(cfg.target, cfg.ce_method, perms, gtg.eps2);
      res.constraint_slack = cfg.loss_budget - shift_sq();
    }
  }

  if (!feasible_seen) {
    // Nothing satisfied the stealth constraint; fall back to honesty.
    res.update = set.updates[cfg.attacker];
    res.score_after = res.score_before;
    res.feasible = false;
    res.constraint_slack = 0.0;
    res.accepted_steps = 0;
  }
  return res;
}

}  // namespace fedscore
