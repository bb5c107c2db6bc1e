#include "fedscore/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fedscore {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config: field '" + path + "' " + what);
}

// Strict object reader: every key must be consumed, leftovers are errors.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j_->is_object()) {
      fail(path_, "must be an object");
    }
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  std::string member_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* take(const std::string& key) {
    used_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  template <typename T>
  void number(const std::string& key, T& out) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    if (!v->is_number()) {
      fail(member_path(key), "must be a number");
    }
    out = v->get<T>();
  }

  void integer(const std::string& key, int& out) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    if (!v->is_number_integer()) {
      fail(member_path(key), "must be an integer");
    }
    out = v->get<int>();
  }

  void unsigned64(const std::string& key, std::uint64_t& out) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    if (!v->is_number_integer() || (v->is_number_integer() && v->get<long long>() < 0)) {
      fail(member_path(key), "must be a non-negative integer");
    }
    out = v->get<std::uint64_t>();
  }

  void size(const std::string& key, std::size_t& out) {
    std::uint64_t v = out;
    unsigned64(key, v);
    out = static_cast<std::size_t>(v);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    if (!v->is_boolean()) {
      fail(member_path(key), "must be true or false");
    }
    out = v->get<bool>();
  }

  void text(const std::string& key, std::string& out) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    if (!v->is_string()) {
      fail(member_path(key), "must be a string");
    }
    out = v->get<std::string>();
  }

  template <typename Enum>
  void choice(const std::string& key, Enum& out,
              std::initializer_list<std::pair<const char*, Enum>> options) {
    std::string s;
    bool present = has(key);
    text(key, s);
    if (!present) {
      return;
    }
    for (const auto& [name, value] : options) {
      if (s == name) {
        out = value;
        return;
      }
    }
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (!allowed.empty()) {
        allowed += ", ";
      }
      allowed += name;
    }
    fail(member_path(key), "must be one of: " + allowed);
  }

  // Returns nullptr when absent.
  const json* object(const std::string& key) {
    const json* v = take(key);
    if (v == nullptr) {
      return nullptr;
    }
    if (!v->is_object()) {
      fail(member_path(key), "must be an object");
    }
    return v;
  }

  void finish() {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.contains(it.key())) {
        fail(member_path(it.key()), "is not a recognized setting");
      }
    }
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

constexpr std::initializer_list<std::pair<const char*, CeMethod>> kCeOptions = {
    {"sv", CeMethod::sv}, {"gtg", CeMethod::gtg}, {"loo", CeMethod::loo}, {"adp", CeMethod::adp}};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  ObjectReader top(root, "");
  top.text("experiment_id", cfg.experiment_id);
  top.integer("clients", cfg.clients);
  top.integer("rounds", cfg.rounds);
  top.integer("repetitions", cfg.repetitions);
  top.unsigned64("base_seed", cfg.base_seed);
  top.integer("threads", cfg.threads);

  if (const json* j = top.object("data")) {
    ObjectReader data(*j, "data");
    data.choice("source", cfg.data.source,
                {{"synthetic", DataConfig::Source::synthetic}, {"csv", DataConfig::Source::csv}});
    if (const json* s = data.object("synthetic")) {
      ObjectReader syn(*s, "data.synthetic");
      syn.size("samples", cfg.data.synthetic.samples);
      syn.integer("dim", cfg.data.synthetic.dim);
      syn.integer("classes", cfg.data.synthetic.classes);
      syn.number("separation", cfg.data.synthetic.separation);
      syn.finish();
    }
    data.text("csv_path", cfg.data.csv_path);
    data.text("label_column", cfg.data.label_column);
    data.choice("normalization", cfg.data.normalization,
                {{"none", Normalization::none}, {"zscore", Normalization::zscore}});
    data.choice("partition", cfg.data.partition,
                {{"iid", DataConfig::Partition::iid},
                 {"dirichlet", DataConfig::Partition::dirichlet}});
    data.number("alpha", cfg.data.alpha);
    data.boolean("linear_label_noise", cfg.data.linear_label_noise);
    data.number("holdout_fraction", cfg.data.holdout_fraction);
    data.finish();
  }

  if (const json* j = top.object("model")) {
    ObjectReader model(*j, "model");
    model.integer("hidden", cfg.model.hidden);
    model.finish();
  }

  if (const json* j = top.object("training")) {
    ObjectReader tr(*j, "training");
    tr.number("learning_rate", cfg.training.learning_rate);
    tr.number("lr_decay", cfg.training.lr_decay);
    tr.number("momentum", cfg.training.momentum);
    tr.number("proximal_mu", cfg.training.proximal_mu);
    tr.integer("local_steps", cfg.training.local_steps);
    tr.integer("batch_size", cfg.training.batch_size);
    tr.integer("local_steps_min", cfg.local_steps_min);
    tr.integer("local_steps_max", cfg.local_steps_max);
    tr.finish();
  }

  if (const json* j = top.object("aggregator")) {
    ObjectReader agg(*j, "aggregator");
    agg.choice("rule", cfg.aggregator.rule,
               {{"fedavg", AggRule::fedavg},
                {"fedprox", AggRule::fedprox},
                {"fednova", AggRule::fednova},
                {"krum", AggRule::krum},
                {"zeno", AggRule::zeno}});
    agg.integer("kappa", cfg.aggregator.kappa);
    agg.number("rho", cfg.aggregator.rho);
    agg.choice("fednova_mode", cfg.aggregator.fednova_mode,
               {{"literal", FedNovaMode::literal}, {"normalized", FedNovaMode::normalized}});
    agg.finish();
  }

  if (const json* v = top.take("ce_methods")) {
    if (!v->is_array()) {
      fail("ce_methods", "must be an array");
    }
    cfg.ce_methods.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& item = (*v)[i];
      const std::string path = "ce_methods[" + std::to_string(i) + "]";
      if (!item.is_string()) {
        fail(path, "must be a string");
      }
      const std::string s = item.get<std::string>();
      bool found = false;
      for (const auto& [name, value] : kCeOptions) {
        if (s == name) {
          cfg.ce_methods.push_back(value);
          found = true;
          break;
        }
      }
      if (!found) {
        fail(path, "must be one of: sv, gtg, loo, adp");
      }
    }
  }

  if (const json* j = top.object("gtg")) {
    ObjectReader gtg(*j, "gtg");
    gtg.number("eps0", cfg.gtg.eps0);
    gtg.number("eps1", cfg.gtg.eps1);
    gtg.number("eps2", cfg.gtg.eps2);
    std::uint64_t cap = cfg.gtg.max_permutations;
    gtg.unsigned64("max_permutations", cap);
    cfg.gtg.max_permutations = cap;
    gtg.finish();
  }

  top.boolean("adp_on_deltas", cfg.adp_on_deltas);
  top.choice("utility", cfg.utility,
             {{"neg_loss", UtilityKind::neg_loss}, {"accuracy", UtilityKind::accuracy}});

  if (const json* j = top.object("attack")) {
    ObjectReader atk(*j, "attack");
    atk.choice("kind", cfg.attack.kind,
               {{"none", AttackKind::none},
                {"label_flip", AttackKind::label_flip},
                {"gradient_flip", AttackKind::gradient_flip},
                {"self_improvement", AttackKind::self_improvement},
                {"targeted_decrease", AttackKind::targeted_decrease}});
    int attacker = cfg.attack.attacker + 1;
    int target = cfg.attack.target + 1;
    atk.integer("attacker", attacker);
    atk.integer("target", target);
    if (attacker < 1) {
      fail("attack.attacker", "is 1-based and must be >= 1");
    }
    if (target < 1) {
      fail("attack.target", "is 1-based and must be >= 1");
    }
    cfg.attack.attacker = attacker - 1;
    cfg.attack.target = target - 1;
    atk.choice("ce_method", cfg.attack.ce_method, kCeOptions);
    atk.choice("mode", cfg.attack.si_mode,
               {{"direct", SiMode::direct}, {"surrogate", SiMode::surrogate}});
    atk.number("reg_weight", cfg.attack.reg_weight);
    atk.number("loss_budget", cfg.attack.loss_budget);
    atk.number("view_fraction", cfg.attack.view_fraction);
    atk.integer("steps", cfg.attack.steps);
    atk.number("step_size", cfg.attack.step_size);
    atk.finish();
  }

  top.finish();
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("config: cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

const char* ce_name(CeMethod m) { return ce_method_name(m); }

const char* source_name(DataConfig::Source s) {
  return s == DataConfig::Source::synthetic ? "synthetic" : "csv";
}

const char* partition_name(DataConfig::Partition p) {
  return p == DataConfig::Partition::iid ? "iid" : "dirichlet";
}

const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::none:
      return "none";
    case AttackKind::label_flip:
      return "label_flip";
    case AttackKind::gradient_flip:
      return "gradient_flip";
    case AttackKind::self_improvement:
      return "self_improvement";
    case AttackKind::targeted_decrease:
      return "targeted_decrease";
  }
  return "?";
}

}  // namespace

std::string canonical_config_text(const ExperimentConfig& cfg) {
  json j;
  j["experiment_id"] = cfg.experiment_id;
  j["clients"] = cfg.clients;
  j["rounds"] = cfg.rounds;
  j["repetitions"] = cfg.repetitions;
  j["base_seed"] = cfg.base_seed;
  j["threads"] = cfg.threads;
  j["data"]["source"] = source_name(cfg.data.source);
  j["data"]["synthetic"]["samples"] = cfg.data.synthetic.samples;
  j["data"]["synthetic"]["dim"] = cfg.data.synthetic.dim;
  j["data"]["synthetic"]["classes"] = cfg.data.synthetic.classes;
  j["data"]["synthetic"]["separation"] = cfg.data.synthetic.separation;
  j["data"]["csv_path"] = cfg.data.csv_path;
  j["data"]["label_column"] = cfg.data.label_column;
  j["data"]["normalization"] = cfg.data.normalization == Normalization::none ? "none" : "zscore";
  j["data"]["partition"] = partition_name(cfg.data.partition);
  j["data"]["alpha"] = cfg.data.alpha;
  j["data"]["linear_label_noise"] = cfg.data.linear_label_noise;
  j["data"]["holdout_fraction"] = cfg.data.holdout_fraction;
  j["model"]["hidden"] = cfg.model.hidden;
  j["training"]["learning_rate"] = cfg.training.learning_rate;
  j["training"]["lr_decay"] = cfg.training.lr_decay;
  j["training"]["momentum"] = cfg.training.momentum;
  j["training"]["proximal_mu"] = cfg.training.proximal_mu;
  j["training"]["local_steps"] = cfg.training.local_steps;
  j["training"]["batch_size"] = cfg.training.batch_size;
  j["training"]["local_steps_min"] = cfg.local_steps_min;
  j["training"]["local_steps_max"] = cfg.local_steps_max;
  j["aggregator"]["rule"] = agg_rule_name(cfg.aggregator.rule);
  j["aggregator"]["kappa"] = cfg.aggregator.kappa;
  j["aggregator"]["rho"] = cfg.aggregator.rho;
  j["aggregator"]["fednova_mode"] =
      cfg.aggregator.fednova_mode == FedNovaMode::literal ? "literal" : "normalized";
  json methods = json::array();
  for (CeMethod m : cfg.ce_methods) {
    methods.push_back(ce_name(m));
  }
  j["ce_methods"] = methods;
  j["gtg"]["eps0"] = cfg.gtg.eps0;
  j["gtg"]["eps1"] = cfg.gtg.eps1;
  j["gtg"]["eps2"] = cfg.gtg.eps2;
  j["gtg"]["max_permutations"] = cfg.gtg.max_permutations;
  j["adp_on_deltas"] = cfg.adp_on_deltas;
  j["utility"] = cfg.utility == UtilityKind::neg_loss ? "neg_loss" : "accuracy";
  j["attack"]["kind"] = attack_name(cfg.attack.kind);
  j["attack"]["attacker"] = cfg.attack.attacker + 1;
  j["attack"]["target"] = cfg.attack.target + 1;
  j["attack"]["ce_method"] = ce_name(cfg.attack.ce_method);
  j["attack"]["mode"] = cfg.attack.si_mode == SiMode::direct ? "direct" : "surrogate";
  j["attack"]["reg_weight"] = cfg.attack.reg_weight;
  j["attack"]["loss_budget"] = cfg.attack.loss_budget;
  j["attack"]["view_fraction"] = cfg.attack.view_fraction;
  j["attack"]["steps"] = cfg.attack.steps;
  j["attack"]["step_size"] = cfg.attack.step_size;
  return j.dump(2);
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  const std::uint64_t h = hash_label(canonical_config_text(cfg));
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) {
    out[15 - i] = digits[(h >> (4 * i)) & 0xf];
  }
  return out;
}

}  // namespace fedscore
