#include "maeguard/harness/config.hpp"

#include <fstream>
#include <sstream>

#include "maeguard/models/serialize.hpp"

namespace maeguard::attacks {

void to_json(nlohmann::json& j, const AttackSpec& s) {
  j = {{"kind", to_string(s.kind)}, {"epsilon", s.epsilon}, {"alpha", s.alpha},
       {"steps", s.steps},          {"lambda", s.lambda},   {"masks", s.masks},
       {"cw_c", s.cw_c},            {"cw_kappa", s.cw_kappa}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, AttackSpec& s) {
  AttackSpec d;
  s.kind = parse_attack_kind(j.value("kind", to_string(d.kind)));
  s.epsilon = j.value("epsilon", d.epsilon);
  s.alpha = j.value("alpha", d.alpha);
  s.steps = j.value("steps", d.steps);
  s.lambda = j.value("lambda", d.lambda);
  s.masks = j.value("masks", d.masks);
  s.cw_c = j.value("cw_c", d.cw_c);
  s.cw_kappa = j.value("cw_kappa", d.cw_kappa);
  s.seed = j.value("seed", d.seed);
}

}  // namespace maeguard::attacks

namespace maeguard::repair {

void to_json(nlohmann::json& j, const RepairConfig& c) {
  j = {{"epsilon", c.epsilon}, {"alpha", c.alpha}, {"iters", c.iters}, {"init", to_string(c.init)},
       {"masks", c.masks},     {"seed", c.seed},   {"batch_size", c.batch_size}};
}

void from_json(const nlohmann::json& j, RepairConfig& c) {
  RepairConfig d;
  c.epsilon = j.value("epsilon", d.epsilon);
  c.alpha = j.value("alpha", d.alpha);
  c.iters = j.value("iters", d.iters);
  c.init = parse_repair_init(j.value("init", to_string(d.init)));
  c.masks = j.value("masks", d.masks);
  c.seed = j.value("seed", d.seed);
  c.batch_size = j.value("batch_size", d.batch_size);
}

}  // namespace maeguard::repair

namespace maeguard::detection {

namespace {
std::string rule_name(TargetRule r) {
  switch (r) {
    case TargetRule::kRunnerUp: return "runner-up";
    case TargetRule::kLeastLikely: return "least-likely";
    case TargetRule::kFixed: return "fixed";
  }
  return "runner-up";
}
TargetRule parse_rule(const std::string& s) {
  if (s == "runner-up") return TargetRule::kRunnerUp;
  if (s == "least-likely") return TargetRule::kLeastLikely;
  if (s == "fixed") return TargetRule::kFixed;
  throw std::invalid_argument("unknown target rule '" + s + "' (runner-up, least-likely, fixed)");
}
}  // namespace

void to_json(nlohmann::json& j, const TdConfig& c) {
  j = {{"rule", rule_name(c.rule)}, {"fixed_target", c.fixed_target}, {"epsilon", c.epsilon},
       {"alpha", c.alpha},          {"max_steps", c.max_steps}};
}

void from_json(const nlohmann::json& j, TdConfig& c) {
  TdConfig d;
  c.rule = parse_rule(j.value("rule", rule_name(d.rule)));
  c.fixed_target = j.value("fixed_target", d.fixed_target);
  c.epsilon = j.value("epsilon", d.epsilon);
  c.alpha = j.value("alpha", d.alpha);
  c.max_steps = j.value("max_steps", d.max_steps);
}

}  // namespace maeguard::detection

namespace maeguard::harness {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataConfig, format, images, labels, synthetic_count,
                                                train, calibration, test, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DetectionConfig, masks, window, p_threshold, calibrate,
                                                fpr_target, bootstrap_batches, reference_size, seed,
                                                fs_bits, nd_radius, nd_trials, td)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepConfig, iters, epsilons, daa_lambdas, daa_examples,
                                                daa)

namespace {

using nlohmann::json;

void check_keys(const json& given, const json& schema, const std::string& where) {
  if (!given.is_object() || !schema.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    if (!schema.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
    const auto& expected = schema.at(key);
    if (value.is_object()) check_keys(value, expected, where + key + ".");
    if (value.is_array() && expected.is_array() && !expected.empty() && expected.front().is_object()) {
      for (std::size_t i = 0; i < value.size(); ++i)
        check_keys(value[i], expected.front(), where + key + "[" + std::to_string(i) + "].");
    }
  }
}

}  // namespace

ExperimentConfig default_config() {
  using attacks::AttackKind;
  using attacks::AttackSpec;
  ExperimentConfig c;
  c.classifier_train.epochs = 10;
  c.classifier_train.sgd.lr = 0.05;
  c.mae_train.epochs = 45;
  c.mae_train.sgd.lr = 0.5;
  c.mae_train.sgd.warmup_steps = 100;
  c.mae_train.sgd.clip_norm = 1.0;
  c.attacks = {
      AttackSpec{AttackKind::kFgsm, 0.1, 0.0, 1},
      AttackSpec{AttackKind::kPgdLinf, 0.1, 0.0125, 20},
      AttackSpec{AttackKind::kBim, 0.1, 0.01, 10},
      AttackSpec{AttackKind::kPgdL2, 1.5, 0.25, 20},
      AttackSpec{AttackKind::kCwL2, 3.0, 0.1, 30},
  };
  c.sweeps.daa = AttackSpec{AttackKind::kDaa, 0.1, 0.0125, 20};
  return c;
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"data", c.data},
           {"classifier", c.classifier},
           {"classifier_train", c.classifier_train},
           {"mae", c.mae},
           {"mae_train", c.mae_train},
           {"attacks", c.attacks},
           {"attack_examples", c.attack_examples},
           {"attack_batch", c.attack_batch},
           {"detection", c.detection},
           {"repair", c.repair},
           {"gated_repair", c.gated_repair},
           {"sweeps", c.sweeps},
           {"seed", c.seed},
           {"output_dir", c.output_dir}};
}

ExperimentConfig config_from_json(const json& j) {
  json schema = default_config();
  if (schema["attacks"].empty()) schema["attacks"].push_back(attacks::AttackSpec{});
  check_keys(j, schema, "");
  ExperimentConfig c = default_config();
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("data", c.data);
    get("classifier", c.classifier);
    get("classifier_train", c.classifier_train);
    get("mae", c.mae);
    get("mae_train", c.mae_train);
    get("attacks", c.attacks);
    get("attack_examples", c.attack_examples);
    get("attack_batch", c.attack_batch);
    get("detection", c.detection);
    get("repair", c.repair);
    get("gated_repair", c.gated_repair);
    get("sweeps", c.sweeps);
    get("seed", c.seed);
    get("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path.string() + ": top level must be an object");
  return config_from_json(j);
}

std::string dump_config(const ExperimentConfig& c) { return json(c).dump(2) + "\n"; }

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  const auto& d = c.data;
  if (d.format != "synthetic" && d.format != "idx" && d.format != "manifest")
    fail("data.format must be synthetic, idx or manifest");
  namespace fs = std::filesystem;
  if (d.format != "synthetic") {
    if (d.images.empty() || !fs::exists(d.images)) fail("data.images '" + d.images + "' does not exist");
    if (d.format == "idx" && (d.labels.empty() || !fs::exists(d.labels)))
      fail("data.labels '" + d.labels + "' does not exist");
  } else if (d.synthetic_count < d.train + d.calibration + d.test) {
    fail("data.synthetic_count is smaller than train + calibration + test");
  }
  if (d.train == 0 || d.test == 0) fail("data.train and data.test must be positive");
  try {
    c.classifier.grid.validate();
    c.mae.grid.validate();
    for (const auto& a : c.attacks) a.validate();
    c.sweeps.daa.validate();
    c.repair.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (c.classifier.grid.height != c.mae.grid.height || c.classifier.grid.width != c.mae.grid.width ||
      c.classifier.grid.channels != c.mae.grid.channels)
    fail("classifier and mae must share the image height, width and channels");
  if (c.attack_examples == 0 || c.attack_examples > d.test) fail("attack_examples must be in [1, data.test]");
  if (c.attack_batch == 0) fail("attack_batch must be positive");
  const auto& t = c.detection;
  if (t.masks < 1) fail("detection.masks must be at least 1");
  if (t.window < detection::kMinBatch) fail("detection.window is below the batch floor of 8");
  if (t.reference_size < 100 || t.reference_size > d.calibration)
    fail("detection.reference_size must be in [100, data.calibration]");
  if (!(t.fpr_target > 0.0 && t.fpr_target < 1.0)) fail("detection.fpr_target must be in (0,1)");
  if (!(t.p_threshold >= 0.0 && t.p_threshold <= 1.0)) fail("detection.p_threshold must be in [0,1]");
  if (t.nd_trials == 0) fail("detection.nd_trials must be positive");
  if (c.sweeps.daa_examples == 0 || c.sweeps.daa_examples > c.attack_examples)
    fail("sweeps.daa_examples must be in [1, attack_examples]");
  if (c.sweeps.daa.kind != attacks::AttackKind::kDaa) fail("sweeps.daa.kind must be daa");
  for (double e : c.sweeps.epsilons)
    if (!(e > 0.0)) fail("sweeps.epsilons must be positive");
  for (const auto* tc : {&c.classifier_train, &c.mae_train}) {
    const auto& o = tc->sgd;
    if (o.method != "sgd" && o.method != "adam") fail("sgd.method must be sgd or adam, got '" + o.method + "'");
    if (!(o.lr > 0.0)) fail("sgd.lr must be positive");
    if (tc->epochs == 0 || tc->batch_size == 0) fail("training epochs and batch_size must be positive");
  }
  if (c.output_dir.empty()) fail("output_dir must be set");
}

}  // namespace maeguard::harness
