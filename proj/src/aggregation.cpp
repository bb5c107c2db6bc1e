#include "fedscore/aggregation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedscore {

namespace {

void check_set(const RoundUpdateSet& set) {
  const std::size_t k = set.updates.size();
  if (k == 0) {
    throw std::invalid_argument("aggregate: no client updates");
  }
  if (set.sizes.size() != k || set.steps.size() != k) {
    throw std::invalid_argument("aggregate: sizes/steps not aligned with updates");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!(set.updates[i].arch == set.prev_global.arch)) {
      throw std::invalid_argument("aggregate: update arch mismatch");
    }
    if (set.updates[i].values.size() != set.prev_global.values.size()) {
      throw std::invalid_argument("aggregate: update size mismatch");
    }
    if (set.sizes[i] == 0) {
      throw std::invalid_argument("aggregate: client dataset size is zero");
    }
    if (set.steps[i] < 1) {
      throw std::invalid_argument("aggregate: client step count must be >= 1");
    }
  }
}

void check_finite(const ModelParams& m, const char* who) {
  if (!all_finite(m.values)) {
    throw std::runtime_error(std::string(who) + ": non-finite aggregate");
  }
}

}  // namespace

const char* agg_rule_name(AggRule rule) {
  switch (rule) {
    case AggRule::fedavg:
      return "fedavg";
    case AggRule::fedprox:
      return "fedprox";
    case AggRule::fednova:
      return "fednova";
    case AggRule::krum:
      return "krum";
    case AggRule::zeno:
      return "zeno";
  }
  return "?";
}

AggRule parse_agg_rule(const std::string& name) {
  for (AggRule r : {AggRule::fedavg, AggRule::fedprox, AggRule::fednova, AggRule::krum,
                    AggRule::zeno}) {
    if (name == agg_rule_name(r)) {
      return r;
    }
  }
  throw std::invalid_argument("unknown aggregator '" + name + "'");
}

ModelParams fed_avg_mask(const RoundUpdateSet& set, std::uint32_t mask) {
  check_set(set);
  const std::size_t k = set.clients();
  if (k > 32) {
    throw std::invalid_argument("fed_avg: more than 32 clients");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (mask & (std::uint32_t{1} << i)) {
      total += static_cast<double>(set.sizes[i]);
    }
  }
  if (total == 0.0) {
    return set.prev_global;
  }
  ModelParams out = zero_params(set.prev_global.arch);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(mask & (std::uint32_t{1} << i))) {
      continue;
    }
    const double w = static_cast<double>(set.sizes[i]) / total;
    const auto& v = set.updates[i].values;
    for (std::size_t j = 0; j < v.size(); ++j) {
      out.values[j] += w * v[j];
    }
  }
  check_finite(out, "fed_avg");
  return out;
}

ModelParams fed_avg(const RoundUpdateSet& set, const std::vector<int>& subset) {
  check_set(set);
  std::uint32_t mask = 0;
  for (int i : subset) {
    if (i < 0 || static_cast<std::size_t>(i) >= set.clients()) {
      throw std::invalid_argument("fed_avg: client index out of range");
    }
    mask |= std::uint32_t{1} << i;
  }
  return fed_avg_mask(set, mask);
}

ModelParams fed_avg_all(const RoundUpdateSet& set) {
  check_set(set);
  if (set.clients() > 32) {
    throw std::invalid_argument("fed_avg: more than 32 clients");
  }
  return fed_avg_mask(set, (std::uint32_t{1} << set.clients()) - 1);
}

ModelParams fed_nova(const RoundUpdateSet& set, FedNovaMode mode) {
  check_set(set);
  const std::size_t k = set.clients();
  const double n_total = static_cast<double>(std::accumulate(set.sizes.begin(), set.sizes.end(),
                                                             std::size_t{0}));
  const double steps_total =
      static_cast<double>(std::accumulate(set.steps.begin(), set.steps.end(), 0));
  ModelParams out = set.prev_global;
  const double scale = mode == FedNovaMode::normalized ? static_cast<double>(k) : 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double coeff = scale * static_cast<double>(set.steps[i]) *
                         static_cast<double>(set.sizes[i]) / (steps_total * n_total);
    const auto& v = set.updates[i].values;
    for (std::size_t j = 0; j < v.size(); ++j) {
      out.values[j] -= coeff * (set.prev_global.values[j] - v[j]);
    }
  }
  check_finite(out, "fed_nova");
  return out;
}

KrumResult krum(const RoundUpdateSet& set, int kappa) {
  check_set(set);
  const std::size_t k = set.clients();
  if (kappa < 0 || static_cast<std::size_t>(kappa) + 2 >= k) {
    throw std::invalid_argument("krum: need clients - kappa - 2 >= 1");
  }
  const std::size_t neighbors = k - static_cast<std::size_t>(kappa) - 2;

  std::vector<std::vector<double>> dist(k, std::vector<double>(k, 0.0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double d2 = 0.0;
      const auto& va = set.updates[a].values;
      const auto& vb = set.updates[b].values;
      for (std::size_t j = 0; j < va.size(); ++j) {
        const double diff = va[j] - vb[j];
        d2 += diff * diff;
      }
      dist[a][b] = d2;
      dist[b][a] = d2;
    }
  }

  KrumResult res;
  res.scores.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> others;
    others.reserve(k - 1);
    for (std::size_t b = 0; b < k; ++b) {
      if (b != a) {
        others.push_back(dist[a][b]);
      }
    }
    std::sort(others.begin(), others.end());
    res.scores[a] = std::accumulate(others.begin(), others.begin() + neighbors, 0.0);
  }
  res.selected = static_cast<int>(
      std::min_element(res.scores.begin(), res.scores.end()) - res.scores.begin());
  res.model = set.updates[res.selected];
  return res;
}

ZenoResult zeno(const RoundUpdateSet& set, int kappa, double rho, const Dataset& validation) {
  check_set(set);
  const std::size_t k = set.clients();
  if (kappa < 0 || static_cast<std::size_t>(kappa) >= k) {
    throw std::invalid_argument("zeno: need clients - kappa >= 1");
  }
  if (validation.rows() == 0) {
    throw std::invalid_argument("zeno: validation set is empty");
  }
  const double loss_before = forward_loss(set.prev_global, validation).loss;

  ZenoResult res;
  res.scores.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double loss_after = forward_loss(set.updates[i], validation).loss;
    res.scores[i] = loss_before - loss_after - rho * squared_norm(set.updates[i].values);
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return res.scores[a] > res.scores[b];
  });
  const std::size_t keep = k - static_cast<std::size_t>(kappa);
  res.kept.assign(order.begin(), order.begin() + keep);
  std::sort(res.kept.begin(), res.kept.end());
  res.model = fed_avg(set, res.kept);
  return res;
}

AggregateResult aggregate(const RoundUpdateSet& set, const AggregatorConfig& cfg,
                          const Dataset& validation) {
  AggregateResult res;
  switch (cfg.rule) {
    case AggRule::fedavg:
    case AggRule::fedprox:
      res.model = fed_avg_all(set);
      break;
    case AggRule::fednova:
      res.model = fed_nova(set, cfg.fednova_mode);
      break;
    case AggRule::krum: {
      KrumResult kr = krum(set, cfg.kappa);
      res.model = std::move(kr.model);
      res.krum_selected = kr.selected;
      break;
    }
    case AggRule::zeno: {
      ZenoResult zr = zeno(set, cfg.kappa, cfg.rho, validation);
      res.model = std::move(zr.model);
      res.zeno_kept = std::move(zr.kept);
      break;
    }
  }
  return res;
}

}  // namespace fedscore
