#include "fedscore/contribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace fedscore {

namespace {

std::uint64_t factorial_capped(int n, std::uint64_t cap) {
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) {
    if (f > cap / static_cast<std::uint64_t>(i)) {
      return cap;
    }
    f *= static_cast<std::uint64_t>(i);
  }
  return std::min(f, cap);
}

}  // namespace

const char* ce_method_name(CeMethod m) {
  switch (m) {
    case CeMethod::sv:
      return "sv";
    case CeMethod::gtg:
      return "gtg";
    case CeMethod::loo:
      return "loo";
    case CeMethod::adp:
      return "adp";
  }
  return "?";
}

CoalitionEvaluator::CoalitionEvaluator(const RoundUpdateSet& set, const Dataset& validation,
                                       UtilityKind utility)
    : set_(set), validation_(validation), utility_(utility),
      clients_(static_cast<int>(set.clients())) {
  if (clients_ < 1 || clients_ > 31) {
    throw std::invalid_argument("coalition: need between 1 and 31 clients");
  }
  if (validation.rows() == 0) {
    throw std::invalid_argument("coalition: validation set is empty");
  }
}

double CoalitionEvaluator::value(std::uint32_t mask) const {
  if (mask & ~full_mask()) {
    throw std::invalid_argument("coalition: mask has bits beyond the client count");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  ++lookups_;
  auto it = cache_.find(mask);
  if (it != cache_.end()) {
    return it->second;
  }
  const ModelParams model = mask == 0 ? set_.prev_global : fed_avg_mask(set_, mask);
  const EvalResult eval = forward_loss(model, validation_);
  const double v = utility_ == UtilityKind::neg_loss ? -eval.loss : eval.accuracy;
  ++evaluations_;
  cache_.emplace(mask, v);
  return v;
}

std::uint64_t CoalitionEvaluator::lookups() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return lookups_;
}

std::uint64_t CoalitionEvaluator::evaluations() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return evaluations_;
}

ScoreVector exact_shapley(const CoalitionEvaluator& ev) {
  const int k = ev.num_clients();
  if (k > 16) {
    throw std::invalid_argument("shapley: exact evaluation is limited to 16 clients");
  }
  // weight[s] = s! (k-1-s)! / k! for a coalition of size s not containing the
  // client under evaluation. 16! < 2^53, so the factorials are exact.
  std::vector<double> fact(k + 1, 1.0);
  for (int i = 1; i <= k; ++i) {
    fact[i] = fact[i - 1] * static_cast<double>(i);
  }
  std::vector<double> weight(k);
  for (int s = 0; s < k; ++s) {
    weight[s] = fact[s] * fact[k - 1 - s] / fact[k];
  }

  ScoreVector out;
  out.method = CeMethod::sv;
  out.values.assign(k, 0.0);
  const std::uint32_t full = ev.full_mask();
  for (int i = 0; i < k; ++i) {
    const std::uint32_t bit = std::uint32_t{1} << i;
    const std::uint32_t rest = full & ~bit;
    // Enumerate subsets of `rest`, including the empty one.
    std::uint32_t sub = 0;
    for (;;) {
      const int size = std::popcount(sub);
      out.values[i] += weight[size] * (ev.value(sub | bit) - ev.value(sub));
      if (sub == rest) {
        break;
      }
      sub = (sub - rest) & rest;
    }
  }
  return out;
}

std::vector<std::vector<int>> gtg_sample_permutations(int clients, std::uint64_t count,
                                                      Rng& rng) {
  if (clients < 1) {
    throw std::invalid_argument("permutations: need at least one client");
  }
  if (count == 0) {
    throw std::invalid_argument("permutations: count must be positive");
  }
  std::vector<std::vector<int>> perms;
  perms.reserve(count);

  const std::uint64_t total = factorial_capped(clients, UINT64_MAX);
  if (clients <= 8 && count <= total) {
    // One bucket of suffixes per leader, each a full enumeration in random
    // order; emitting round-robin over leaders never repeats a permutation.
    std::vector<std::vector<std::vector<int>>> buckets(clients);
    for (int lead = 0; lead < clients; ++lead) {
      std::vector<int> rest;
      for (int i = 0; i < clients; ++i) {
        if (i != lead) {
          rest.push_back(i);
        }
      }
      do {
        std::vector<int> p;
        p.reserve(clients);
        p.push_back(lead);
        p.insert(p.end(), rest.begin(), rest.end());
        buckets[lead].push_back(std::move(p));
      } while (std::next_permutation(rest.begin(), rest.end()));
      rng.shuffle(buckets[lead]);
    }
    for (std::uint64_t i = 0; i < count; ++i) {
      perms.push_back(buckets[i % clients][i / clients]);
    }
    return perms;
  }

  for (std::uint64_t i = 0; i < count; ++i) {
    const int lead = static_cast<int>(i % static_cast<std::uint64_t>(clients));
    std::vector<int> rest;
    for (int c = 0; c < clients; ++c) {
      if (c != lead) {
        rest.push_back(c);
      }
    }
    rng.shuffle(rest);
    std::vector<int> p;
    p.reserve(clients);
    p.push_back(lead);
    p.insert(p.end(), rest.begin(), rest.end());
    perms.push_back(std::move(p));
  }
  return perms;
}

std::uint64_t gtg_permutation_count(int clients, const GtgConfig& cfg) {
  if (!(cfg.eps1 > 0.0) || cfg.eps1 > 1.0) {
    throw std::invalid_argument("gtg: eps1 must be in (0, 1]");
  }
  if (cfg.max_permutations == 0) {
    throw std::invalid_argument("gtg: max_permutations must be positive");
  }
  const std::uint64_t budget = factorial_capped(clients, cfg.max_permutations);
  const std::uint64_t m =
      static_cast<std::uint64_t>(std::ceil(cfg.eps1 * static_cast<double>(budget)));
  return std::clamp<std::uint64_t>(m, 1, budget);
}

ScoreVector gtg_shapley(const CoalitionEvaluator& ev, const GtgConfig& cfg, Rng& rng) {
  if (!(cfg.eps0 >= 0.0)) {
    throw std::invalid_argument("gtg: eps0 must be >= 0");
  }
  const int k = ev.num_clients();
  ScoreVector out;
  out.method = CeMethod::gtg;
  out.values.assign(k, 0.0);

  const double v_empty = ev.value(0);
  const double v_full = ev.value(ev.full_mask());
  if (std::abs(v_full - v_empty) < cfg.eps0) {
    out.skipped = true;
    return out;
  }

  const std::uint64_t m = gtg_permutation_count(k, cfg);
  const auto perms = gtg_sample_permutations(k, m, rng);
  for (const auto& perm : perms) {
    std::uint32_t mask = 0;
    double prev = v_empty;
    for (int c : perm) {
      const double cur = ev.value(mask | (std::uint32_t{1} << c));
      const double marginal = cur - prev;
      if (cfg.eps2 > 0.0 && marginal <= cfg.eps2) {
        break;  // the tail of this permutation, this position included, adds nothing
      }
      out.values[c] += marginal;
      mask |= std::uint32_t{1} << c;
      prev = cur;
    }
  }
  for (double& v : out.values) {
    v /= static_cast<double>(m);
  }
  return out;
}

ScoreVector leave_one_out(const CoalitionEvaluator& ev) {
  const int k = ev.num_clients();
  ScoreVector out;
  out.method = CeMethod::loo;
  out.values.assign(k, 0.0);
  const double v_full = ev.value(ev.full_mask());
  for (int i = 0; i < k; ++i) {
    out.values[i] = v_full - ev.value(ev.full_mask() & ~(std::uint32_t{1} << i));
  }
  return out;
}

AdpRoundResult adp_round(AdpState& state, const RoundUpdateSet& set,
                         const ModelParams& aggregated, bool on_deltas) {
  const std::size_t k = set.clients();
  if (state.drift.empty()) {
    state.drift.assign(k, 0.0);
  }
  if (state.drift.size() != k) {
    throw std::invalid_argument("adp: state size does not match client count");
  }
  if (!(aggregated.arch == set.prev_global.arch)) {
    throw std::invalid_argument("adp: aggregated model arch mismatch");
  }

  AdpRoundResult res;
  res.scores.method = CeMethod::adp;
  res.scores.values.assign(k, 0.0);

  std::vector<double> agg_ref = aggregated.values;
  if (on_deltas) {
    for (std::size_t j = 0; j < agg_ref.size(); ++j) {
      agg_ref[j] -= set.prev_global.values[j];
    }
  }
  const double t = static_cast<double>(state.rounds_seen);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> u = set.updates[i].values;
    if (on_deltas) {
      for (std::size_t j = 0; j < u.size(); ++j) {
        u[j] -= set.prev_global.values[j];
      }
    }
    if (l2_norm(u) == 0.0 || l2_norm(agg_ref) == 0.0) {
      res.zero_norm = true;
    }
    // Rounding can push the cosine a hair past +/-1 (e.g. when a client's
    // update equals the aggregate under krum); clamp so drift stays >= 0.
    const double c = std::clamp(cosine_similarity(u, agg_ref), -1.0, 1.0);
    state.drift[i] = (t * state.drift[i] + (1.0 - c)) / (t + 1.0);
    const double theta = state.drift[i];
    if (theta == 0.0) {
      res.scores.values[i] = 1.0;
    } else {
      const double e = std::exp(-1.0 / theta);
      res.scores.values[i] = (1.0 - e) / (1.0 + e);
    }
  }
  state.rounds_seen += 1;
  return res;
}

ScoreVector normalize_scores(const ScoreVector& raw) {
  if (raw.values.empty()) {
    throw std::invalid_argument("normalize: empty score vector");
  }
  ScoreVector out = raw;
  const double lo = *std::min_element(out.values.begin(), out.values.end());
  double sum = 0.0;
  for (double& v : out.values) {
    v -= lo;
    sum += v;
  }
  if (sum <= 0.0) {
    std::fill(out.values.begin(), out.values.end(), 1.0 / static_cast<double>(out.values.size()));
  } else {
    for (double& v : out.values) {
      v /= sum;
    }
  }
  return out;
}

ScoreVector aggregate_final_scores(const std::vector<ScoreVector>& rounds) {
  if (rounds.empty()) {
    throw std::invalid_argument("aggregate_final_scores: no rounds");
  }
  const std::size_t k = rounds.front().values.size();
  ScoreVector out;
  out.method = rounds.front().method;
  out.round = -1;
  out.values.assign(k, 0.0);
  std::size_t used = 0;
  for (const auto& r : rounds) {
    if (r.method != out.method || r.values.size() != k) {
      throw std::invalid_argument("aggregate_final_scores: mixed score vectors");
    }
    if (r.skipped) {
      continue;
    }
    for (std::size_t i = 0; i < k; ++i) {
      out.values[i] += r.values[i];
    }
    ++used;
  }
  if (used == 0) {
    std::fill(out.values.begin(), out.values.end(), 1.0 / static_cast<double>(k));
    return out;
  }
  double sum = 0.0;
  for (double& v : out.values) {
    v /= static_cast<double>(used);
    sum += v;
  }
  if (sum <= 0.0) {
    std::fill(out.values.begin(), out.values.end(), 1.0 / static_cast<double>(k));
  } else {
    for (double& v : out.values) {
      v /= sum;
    }
  }
  return out;
}

}  // namespace fedscore
