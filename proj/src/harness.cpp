#include "fedscore/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace fedscore {

namespace {

bool uses_method(const ExperimentConfig& cfg, CeMethod m) {
  return std::find(cfg.ce_methods.begin(), cfg.ce_methods.end(), m) != cfg.ce_methods.end();
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.clients < 2 || cfg.clients > 31) {
    throw std::invalid_argument("config: clients must be between 2 and 31");
  }
  if (cfg.rounds < 1) {
    throw std::invalid_argument("config: rounds must be >= 1");
  }
  if (cfg.repetitions < 1) {
    throw std::invalid_argument("config: repetitions must be >= 1");
  }
  if (cfg.threads < 0) {
    throw std::invalid_argument("config: threads must be >= 0");
  }
  if (cfg.data.source == DataConfig::Source::csv && cfg.data.csv_path.empty()) {
    throw std::invalid_argument("config: data.csv_path is required for the csv source");
  }
  if (cfg.data.source == DataConfig::Source::csv && cfg.data.label_column.empty()) {
    throw std::invalid_argument("config: data.label_column is required for the csv source");
  }
  if (cfg.data.partition == DataConfig::Partition::dirichlet && !(cfg.data.alpha > 0.0)) {
    throw std::invalid_argument("config: data.alpha must be positive");
  }
  if (!(cfg.data.holdout_fraction > 0.0) || cfg.data.holdout_fraction >= 1.0) {
    throw std::invalid_argument("config: data.holdout_fraction must be in (0, 1)");
  }
  if (cfg.model.hidden < 0) {
    throw std::invalid_argument("config: model.hidden must be >= 0");
  }
  if (cfg.local_steps_max != 0 || cfg.local_steps_min != 0) {
    if (cfg.local_steps_min < 1 || cfg.local_steps_max < cfg.local_steps_min) {
      throw std::invalid_argument(
          "config: training.local_steps_min/max must satisfy 1 <= min <= max");
    }
  }
  if (cfg.ce_methods.empty()) {
    throw std::invalid_argument("config: ce_methods must not be empty");
  }
  for (std::size_t i = 0; i < cfg.ce_methods.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.ce_methods.size(); ++j) {
      if (cfg.ce_methods[i] == cfg.ce_methods[j]) {
        throw std::invalid_argument("config: ce_methods has duplicates");
      }
    }
  }
  if (uses_method(cfg, CeMethod::sv) && cfg.clients > 16) {
    throw std::invalid_argument("config: the sv method needs clients <= 16");
  }
  switch (cfg.aggregator.rule) {
    case AggRule::krum:
      if (cfg.aggregator.kappa < 0 || cfg.aggregator.kappa + 2 >= cfg.clients) {
        throw std::invalid_argument("config: aggregator.kappa must satisfy clients - kappa - 2 >= 1");
      }
      break;
    case AggRule::zeno:
      if (cfg.aggregator.kappa < 0 || cfg.aggregator.kappa >= cfg.clients) {
        throw std::invalid_argument("config: aggregator.kappa must satisfy clients - kappa >= 1");
      }
      if (cfg.aggregator.rho < 0.0) {
        throw std::invalid_argument("config: aggregator.rho must be >= 0");
      }
      break;
    default:
      break;
  }
  // GTG ranges are checked by the method itself; surface them early here.
  if (uses_method(cfg, CeMethod::gtg) || cfg.attack.ce_method == CeMethod::gtg) {
    if (!(cfg.gtg.eps0 >= 0.0)) {
      throw std::invalid_argument("config: gtg.eps0 must be >= 0");
    }
    if (!(cfg.gtg.eps1 > 0.0) || cfg.gtg.eps1 > 1.0) {
      throw std::invalid_argument("config: gtg.eps1 must be in (0, 1]");
    }
    if (cfg.gtg.max_permutations == 0) {
      throw std::invalid_argument("config: gtg.max_permutations must be >= 1");
    }
  }
  const AttackConfig& atk = cfg.attack;
  if (atk.kind != AttackKind::none) {
    if (atk.attacker < 0 || atk.attacker >= cfg.clients) {
      throw std::invalid_argument("config: attack.attacker is out of range");
    }
  }
  if (atk.kind == AttackKind::self_improvement || atk.kind == AttackKind::targeted_decrease) {
    if (atk.ce_method != CeMethod::loo && atk.ce_method != CeMethod::gtg) {
      throw std::invalid_argument("config: attack.ce_method must be loo or gtg");
    }
    if (!uses_method(cfg, atk.ce_method)) {
      throw std::invalid_argument("config: attack.ce_method must be listed in ce_methods");
    }
    if (atk.steps < 1) {
      throw std::invalid_argument("config: attack.steps must be >= 1");
    }
    if (!(atk.step_size > 0.0)) {
      throw std::invalid_argument("config: attack.step_size must be positive");
    }
    if (!(atk.view_fraction > 0.0) || atk.view_fraction > 1.0) {
      throw std::invalid_argument("config: attack.view_fraction must be in (0, 1]");
    }
  }
  if (atk.kind == AttackKind::targeted_decrease) {
    if (atk.target < 0 || atk.target >= cfg.clients || atk.target == atk.attacker) {
      throw std::invalid_argument("config: attack.target must be another client");
    }
    if (!(atk.loss_budget > 0.0)) {
      throw std::invalid_argument("config: attack.loss_budget must be positive");
    }
    if (atk.reg_weight < 0.0) {
      throw std::invalid_argument("config: attack.reg_weight must be >= 0");
    }
  }
}

ExperimentState init_repetition(const ExperimentConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  ExperimentState st;
  st.cfg = cfg;
  st.seed = seed;
  st.root = Rng(seed);

  Dataset full;
  if (cfg.data.source == DataConfig::Source::synthetic) {
    Rng data_rng = st.root.fork("data");
    full = generate_synthetic(cfg.data.synthetic, data_rng);
  } else {
    full = load_csv(cfg.data.csv_path, cfg.data.label_column, cfg.data.normalization);
  }

  Rng holdout_rng = st.root.fork("holdout");
  auto [train, holdout] = split_holdout(full, cfg.data.holdout_fraction, holdout_rng);
  st.validation = std::move(holdout);
  if (st.validation.rows() == 0) {
    throw std::invalid_argument("config: data.holdout_fraction leaves no validation rows");
  }

  Rng part_rng = st.root.fork("partition");
  st.clients = cfg.data.partition == DataConfig::Partition::iid
                   ? iid_partition(train, cfg.clients, part_rng)
                   : dirichlet_partition(train, cfg.clients, cfg.data.alpha, part_rng);

  if (cfg.data.linear_label_noise) {
    Rng noise_rng = st.root.fork("noise");
    st.clients = inject_linear_label_noise(std::move(st.clients), noise_rng);
  }
  if (cfg.attack.kind == AttackKind::label_flip) {
    st.clients[cfg.attack.attacker] = label_flip(st.clients[cfg.attack.attacker]);
  }

  st.local_steps.assign(cfg.clients, cfg.training.local_steps);
  if (cfg.local_steps_max > 0) {
    for (int k = 0; k < cfg.clients; ++k) {
      Rng step_rng = st.root.fork("steps", static_cast<std::uint64_t>(k));
      const std::uint64_t span =
          static_cast<std::uint64_t>(cfg.local_steps_max - cfg.local_steps_min) + 1;
      st.local_steps[k] = cfg.local_steps_min + static_cast<int>(step_rng.uniform_int(span));
    }
  }

  const Arch arch{full.dim, cfg.model.hidden, full.classes};
  Rng init_rng = st.root.fork("init");
  st.global = init_params(arch, init_rng);

  st.attacker_view = st.validation;
  if ((cfg.attack.kind == AttackKind::self_improvement ||
       cfg.attack.kind == AttackKind::targeted_decrease) &&
      cfg.attack.view_fraction < 1.0) {
    Rng view_rng = st.root.fork("attack_view");
    const std::size_t n = st.validation.rows();
    std::size_t m = static_cast<std::size_t>(
        std::llround(cfg.attack.view_fraction * static_cast<double>(n)));
    m = std::clamp<std::size_t>(m, 1, n);
    auto perm = view_rng.permutation(n);
    perm.resize(m);
    std::sort(perm.begin(), perm.end());
    Dataset view;
    view.dim = st.validation.dim;
    view.classes = st.validation.classes;
    for (std::size_t r : perm) {
      const auto x = st.validation.row(r);
      view.features.insert(view.features.end(), x.begin(), x.end());
      view.labels.push_back(st.validation.labels[r]);
    }
    st.attacker_view = std::move(view);
  }
  return st;
}

RoundRecord run_round(ExperimentState& st) {
  const ExperimentConfig& cfg = st.cfg;
  const int t = st.next_round;
  const std::uint64_t tu = static_cast<std::uint64_t>(t);

  RoundUpdateSet set;
  set.prev_global = st.global;
  set.sizes.resize(cfg.clients);
  set.steps.resize(cfg.clients);
  set.updates.reserve(cfg.clients);
  for (int k = 0; k < cfg.clients; ++k) {
    TrainingHyperParams hp = cfg.training;
    hp.local_steps = st.local_steps[k];
    if (cfg.aggregator.rule != AggRule::fedprox) {
      hp.proximal_mu = 0.0;
    }
    Rng train_rng = st.root.fork("train", tu, static_cast<std::uint64_t>(k));
    set.updates.push_back(local_train(st.global, st.clients[k].data, hp, train_rng));
    set.sizes[k] = st.clients[k].data.rows();
    set.steps[k] = st.local_steps[k];
  }

  RoundRecord rec;
  rec.round = t;
  switch (cfg.attack.kind) {
    case AttackKind::gradient_flip:
      set.updates[cfg.attack.attacker] =
          gradient_flip(set.updates[cfg.attack.attacker], st.global);
      break;
    case AttackKind::self_improvement: {
      Rng attack_rng = st.root.fork("attack", tu);
      AttackResult ar =
          self_improvement(set, st.attacker_view, cfg.gtg, cfg.attack, cfg.training, attack_rng);
      set.updates[cfg.attack.attacker] = ar.update;
      rec.attack = AttackTrace{ar.score_before, ar.score_after, ar.feasible,
                               ar.constraint_slack, ar.accepted_steps};
      break;
    }
    case AttackKind::targeted_decrease: {
      Rng attack_rng = st.root.fork("attack", tu);
      AttackResult ar = targeted_decrease(set, st.attacker_view, cfg.gtg, cfg.attack, attack_rng);
      set.updates[cfg.attack.attacker] = ar.update;
      rec.attack = AttackTrace{ar.score_before, ar.score_after, ar.feasible,
                               ar.constraint_slack, ar.accepted_steps};
      break;
    }
    default:
      break;
  }

  const AggregateResult agg = aggregate(set, cfg.aggregator, st.validation);
  rec.krum_selected = agg.krum_selected;
  rec.zeno_kept = agg.zeno_kept;

  CoalitionEvaluator ev(set, st.validation, cfg.utility);
  for (CeMethod m : cfg.ce_methods) {
    ScoreVector raw;
    switch (m) {
      case CeMethod::sv:
        raw = exact_shapley(ev);
        break;
      case CeMethod::gtg: {
        Rng gtg_rng = st.root.fork("gtg", tu);
        raw = gtg_shapley(ev, cfg.gtg, gtg_rng);
        break;
      }
      case CeMethod::loo:
        raw = leave_one_out(ev);
        break;
      case CeMethod::adp: {
        AdpRoundResult ar = adp_round(st.adp, set, agg.model, cfg.adp_on_deltas);
        raw = std::move(ar.scores);
        rec.adp_zero_norm = ar.zero_norm;
        break;
      }
    }
    raw.round = t;
    ScoreVector norm = normalize_scores(raw);
    rec.raw_scores.emplace(m, std::move(raw));
    rec.norm_scores.emplace(m, std::move(norm));
  }

  const EvalResult global_eval = forward_loss(agg.model, st.validation);
  rec.global_loss = global_eval.loss;
  rec.global_accuracy = global_eval.accuracy;

  st.global = agg.model;
  st.next_round += 1;
  return rec;
}

RepetitionResult run_repetition(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentState st = init_repetition(cfg, seed);
  RepetitionResult rep;
  rep.seed = seed;
  for (const auto& c : st.clients) {
    rep.client_sizes.push_back(c.data.rows());
  }
  for (int t = 0; t < cfg.rounds; ++t) {
    rep.rounds.push_back(run_round(st));
  }
  for (CeMethod m : cfg.ce_methods) {
    std::vector<ScoreVector> raw_rounds;
    std::vector<ScoreVector> norm_rounds;
    for (const auto& r : rep.rounds) {
      raw_rounds.push_back(r.raw_scores.at(m));
      norm_rounds.push_back(r.norm_scores.at(m));
    }
    // Mean of raw scores over kept rounds, without rescaling.
    ScoreVector raw_final;
    raw_final.method = m;
    raw_final.round = -1;
    raw_final.values.assign(cfg.clients, 0.0);
    std::size_t used = 0;
    for (const auto& r : raw_rounds) {
      if (r.skipped) {
        continue;
      }
      for (int c = 0; c < cfg.clients; ++c) {
        raw_final.values[c] += r.values[c];
      }
      ++used;
    }
    if (used > 0) {
      for (double& v : raw_final.values) {
        v /= static_cast<double>(used);
      }
    }
    rep.final_raw.emplace(m, std::move(raw_final));
    rep.final_norm.emplace(m, aggregate_final_scores(norm_rounds));
  }
  return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ExperimentResult out;
  out.repetitions.resize(cfg.repetitions);

  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                     : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min(workers, static_cast<unsigned>(cfg.repetitions)));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= cfg.repetitions) {
        return;
      }
      try {
        out.repetitions[r] =
            run_repetition(cfg, cfg.base_seed + static_cast<std::uint64_t>(r));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) {
      pool.emplace_back(worker);
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  return out;
}

}  // namespace fedscore
