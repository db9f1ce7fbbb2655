#include "aepo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aepo/errors.hpp"

namespace aepo::cli {
namespace {

using nlohmann::json;

// Strict field-by-field reader: every key must be known, spelled correctly
// and of the right JSON type. Misspelled or stale keys in a config file are
// an error, not a silent fallback to defaults.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string context)
      : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) {
      throw SchemaError(context_ + ": expected a JSON object");
    }
  }

  void read_double(const char* key, double& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number()) throw type_error(key, "number");
    out = v->get<double>();
  }

  void read_int(const char* key, int& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) throw type_error(key, "integer");
    out = v->get<int>();
  }

  void read_seed(const char* key, std::uint64_t& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    bool ok = v->is_number_unsigned() ||
              (v->is_number_integer() && v->get<std::int64_t>() >= 0);
    if (!ok) throw type_error(key, "non-negative integer");
    out = v->get<std::uint64_t>();
  }

  void read_bool(const char* key, bool& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_boolean()) throw type_error(key, "boolean");
    out = v->get<bool>();
  }

  void read_string(const char* key, std::string& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_string()) throw type_error(key, "string");
    out = v->get<std::string>();
  }

  void read_seed_list(const char* key, std::vector<std::uint64_t>& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_array()) throw type_error(key, "array of integers");
    std::vector<std::uint64_t> parsed;
    for (const auto& item : *v) {
      if (!item.is_number_integer() ||
          (!item.is_number_unsigned() && item.get<std::int64_t>() < 0)) {
        throw type_error(key, "array of non-negative integers");
      }
      parsed.push_back(item.get<std::uint64_t>());
    }
    out = std::move(parsed);
  }

  void read_int_list(const char* key, std::vector<int>& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_array()) throw type_error(key, "array of integers");
    std::vector<int> parsed;
    for (const auto& item : *v) {
      if (!item.is_number_integer()) {
        throw type_error(key, "array of integers");
      }
      parsed.push_back(item.get<int>());
    }
    out = std::move(parsed);
  }

  const json* object(const char* key) {
    return find(key);
  }

  // Call after all fields were read; leftover keys are unknown.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        throw SchemaError(context_ + ": unknown key \"" + it.key() + "\"");
      }
    }
  }

 private:
  const json* find(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  SchemaError type_error(const char* key, const char* expected) const {
    return SchemaError(context_ + "." + key + ": expected " + expected);
  }

  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

void read_env(const json& j, env::EnvConfig& cfg) {
  ObjectReader r(j, "env");
  r.read_double("width", cfg.width);
  r.read_double("height", cfg.height);
  r.read_int("elements", cfg.elements);
  r.read_int("feature_dim", cfg.feature_dim);
  r.read_double("row_prob", cfg.row_prob);
  r.read_double("trap_prob", cfg.trap_prob);
  r.read_double("trap_gap", cfg.trap_gap);
  r.read_double("trap_gap_jitter", cfg.trap_gap_jitter);
  r.read_double("target_margin", cfg.target_margin);
  r.read_double("margin_jitter", cfg.margin_jitter);
  r.finish();
}

trainer::Mode parse_mode(const std::string& name) {
  if (name == "aepo") return trainer::Mode::aepo;
  if (name == "naive") return trainer::Mode::naive;
  throw SchemaError("train.mode: expected \"aepo\" or \"naive\", got \"" +
                    name + "\"");
}

reward::SuccessRule parse_success_rule(const std::string& name) {
  if (name == "aer") return reward::SuccessRule::aer;
  if (name == "ignore_rank") return reward::SuccessRule::ignore_rank;
  if (name == "flat_one") return reward::SuccessRule::flat_one;
  throw SchemaError(
      "train.success_rule: expected \"aer\", \"ignore_rank\" or "
      "\"flat_one\", got \"" +
      name + "\"");
}

reward::FailureRule parse_failure_rule(const std::string& name) {
  if (name == "inverse_n") return reward::FailureRule::inverse_n;
  if (name == "flat_minus_one") return reward::FailureRule::flat_minus_one;
  throw SchemaError(
      "train.failure_rule: expected \"inverse_n\" or \"flat_minus_one\", "
      "got \"" +
      name + "\"");
}

void read_train(const json& j, trainer::TrainConfig& cfg) {
  ObjectReader r(j, "train");
  r.read_double("learning_rate", cfg.learning_rate);
  r.read_int("group_size", cfg.group_size);
  r.read_int("batch_size", cfg.batch_size);
  r.read_int("epochs", cfg.epochs);
  r.read_double("temperature", cfg.temperature);
  r.read_int("n_max", cfg.n_max);
  r.read_double("eps_rel", cfg.eps_rel);
  r.read_seed("seed", cfg.seed);
  r.read_double("grad_clip", cfg.grad_clip);
  r.read_bool("collinear_penalty", cfg.collinear_penalty);
  std::string mode;
  r.read_string("mode", mode);
  if (!mode.empty()) cfg.mode = parse_mode(mode);
  std::string success_rule;
  r.read_string("success_rule", success_rule);
  if (!success_rule.empty()) cfg.success_rule = parse_success_rule(success_rule);
  std::string failure_rule;
  r.read_string("failure_rule", failure_rule);
  if (!failure_rule.empty()) cfg.failure_rule = parse_failure_rule(failure_rule);
  r.finish();
}

void read_dataset(const json& j, DatasetSettings& cfg) {
  ObjectReader r(j, "dataset");
  r.read_int("count", cfg.count);
  r.read_seed("seed", cfg.seed);
  r.finish();
}

void read_eval(const json& j, EvalSettings& cfg) {
  ObjectReader r(j, "eval");
  r.read_seed_list("seeds", cfg.seeds);
  r.read_double("temperature", cfg.temperature);
  r.read_int_list("pass_k_values", cfg.pass_k_values);
  r.read_seed("label_seed", cfg.label_seed);
  r.read_int("label_trials", cfg.label_trials);
  r.finish();
}

void validate(const ExperimentConfig& cfg) {
  env::validate(cfg.env);
  trainer::validate(cfg.train);
  if (cfg.dataset.count < 1) {
    throw ConfigError("dataset.count must be at least 1");
  }
  if (cfg.eval.seeds.empty()) {
    throw ConfigError("eval.seeds must not be empty");
  }
  if (!(cfg.eval.temperature > 0.0)) {
    throw ConfigError("eval.temperature must be positive");
  }
  if (cfg.eval.pass_k_values.empty()) {
    throw ConfigError("eval.pass_k_values must not be empty");
  }
  for (int k : cfg.eval.pass_k_values) {
    if (k < 1) throw ConfigError("eval.pass_k_values entries must be >= 1");
  }
  if (cfg.eval.label_trials < 1) {
    throw ConfigError("eval.label_trials must be at least 1");
  }
  if (cfg.output_dir.empty()) {
    throw ConfigError("output_dir must not be empty");
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw SchemaError("config: not valid JSON");
  }
  ExperimentConfig cfg;
  ObjectReader r(j, "config");
  if (const json* section = r.object("env")) read_env(*section, cfg.env);
  if (const json* section = r.object("train")) read_train(*section, cfg.train);
  if (const json* section = r.object("dataset")) {
    read_dataset(*section, cfg.dataset);
  }
  if (const json* section = r.object("eval")) read_eval(*section, cfg.eval);
  r.read_string("output_dir", cfg.output_dir);
  r.finish();
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed to read config file: " + path);
  try {
    return config_from_json(buffer.str());
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

const std::vector<AblationVariant>& all_ablation_variants() {
  static const std::vector<AblationVariant> variants{
      AblationVariant::full,          AblationVariant::no_multi_answer,
      AblationVariant::no_aer,        AblationVariant::no_rank_factor,
      AblationVariant::no_collinear,
  };
  return variants;
}

const char* ablation_variant_name(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_multi_answer: return "no_multi_answer";
    case AblationVariant::no_aer: return "no_aer";
    case AblationVariant::no_rank_factor: return "no_rank_factor";
    case AblationVariant::no_collinear: return "no_collinear";
  }
  throw ConfigError("unknown ablation variant");
}

trainer::TrainConfig apply_variant(trainer::TrainConfig cfg,
                                   AblationVariant variant) {
  switch (variant) {
    case AblationVariant::full:
      break;
    case AblationVariant::no_multi_answer:
      cfg.mode = trainer::Mode::naive;
      break;
    case AblationVariant::no_aer:
      cfg.success_rule = reward::SuccessRule::flat_one;
      cfg.failure_rule = reward::FailureRule::flat_minus_one;
      break;
    case AblationVariant::no_rank_factor:
      cfg.success_rule = reward::SuccessRule::ignore_rank;
      break;
    case AblationVariant::no_collinear:
      cfg.collinear_penalty = false;
      break;
  }
  return cfg;
}

}  // namespace aepo::cli
