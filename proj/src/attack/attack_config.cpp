#include "segadv/attack/attack_config.hpp"

#include <charconv>
#include <cctype>
#include <cmath>

#include "segadv/error.hpp"

namespace segadv {

std::string to_string(AttackFamily f) {
  switch (f) {
    case AttackFamily::fgsm: return "fgsm";
    case AttackFamily::ifgsm: return "ifgsm";
    case AttackFamily::pgd: return "pgd";
    case AttackFamily::subset_ifgsm: return "subset_ifgsm";
  }
  return "?";
}

std::string to_string(LossScheme s) {
  switch (s) {
    case LossScheme::plain: return "plain";
    case LossScheme::entropy_weighted: return "entropy_weighted";
    case LossScheme::margin_weighted: return "margin_weighted";
    case LossScheme::maxmin_weighted: return "maxmin_weighted";
    case LossScheme::meanmargin_weighted: return "meanmargin_weighted";
    case LossScheme::zero_out: return "zero_out";
  }
  return "?";
}

std::string to_string(WeightsPolicy p) { return p == WeightsPolicy::per_iteration ? "per_iteration" : "frozen_clean"; }

AttackFamily parse_family(const std::string& s) {
  for (auto f : {AttackFamily::fgsm, AttackFamily::ifgsm, AttackFamily::pgd, AttackFamily::subset_ifgsm})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown attack family '" + s + "'");
}

LossScheme parse_loss_scheme(const std::string& s) {
  for (auto l : {LossScheme::plain, LossScheme::entropy_weighted, LossScheme::margin_weighted,
                 LossScheme::maxmin_weighted, LossScheme::meanmargin_weighted, LossScheme::zero_out})
    if (to_string(l) == s) return l;
  throw ConfigError("unknown loss scheme '" + s + "'");
}

WeightsPolicy parse_weights_policy(const std::string& s) {
  if (s == "per_iteration") return WeightsPolicy::per_iteration;
  if (s == "frozen_clean") return WeightsPolicy::frozen_clean;
  throw ConfigError("unknown weights policy '" + s + "'");
}

int scheduled_iterations(double epsilon) {
  const double n = std::floor(std::min(epsilon + 4.0, 1.25 * epsilon));
  return std::max(1, static_cast<int>(n));
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void AttackConfig::validate() const {
  for (char ch : name)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.'))
      throw ConfigError("attack: name '" + name + "' may only use letters, digits, '_', '-' and '.'");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("attack: epsilon must be finite and >= 0");
  if (family != AttackFamily::fgsm && !(alpha > 0.0)) throw ConfigError("attack: alpha must be > 0");
  if (iterations < 0) throw ConfigError("attack: iterations must be >= 1 (or 0 for the schedule)");
  if (restarts < 1) throw ConfigError("attack: restarts must be >= 1");
  if (restarts > 1 && family != AttackFamily::pgd) throw ConfigError("attack: restarts only apply to pgd");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("attack: tau must be in (0, 1]");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
    throw ConfigError("attack: subset_fraction must be in (0, 1]");
  if (subset_fraction < 1.0 && family != AttackFamily::subset_ifgsm)
    throw ConfigError("attack: subset_fraction only applies to subset_ifgsm");
}

int AttackConfig::resolved_iterations() const {
  if (family == AttackFamily::fgsm) return 1;
  return iterations > 0 ? iterations : scheduled_iterations(epsilon);
}

std::vector<std::string> AttackConfig::preset_names() {
  return {"fgsm", "ifgsm", "pgd", "subset_ifgsm", "pgd_fine_255", "pgd_fine_unit"};
}

AttackConfig AttackConfig::preset(const std::string& name) {
  AttackConfig c;
  c.name = name;
  if (name == "fgsm") {
    c.family = AttackFamily::fgsm;
  } else if (name == "ifgsm") {
    c.family = AttackFamily::ifgsm;
  } else if (name == "pgd") {
    c.family = AttackFamily::pgd;
    c.iterations = 40;
  } else if (name == "subset_ifgsm") {
    c.family = AttackFamily::subset_ifgsm;
    c.epsilon = 32.0;
    c.subset_fraction = 0.05;
    c.loss = LossScheme::zero_out;
  } else if (name == "pgd_fine_255") {
    c.family = AttackFamily::pgd;
    c.epsilon = 1.0;
    c.alpha = 1.0 / 30.0;
    c.iterations = 40;
  } else if (name == "pgd_fine_unit") {
    c.family = AttackFamily::pgd;
    c.epsilon = 255.0;
    c.alpha = 255.0 / 30.0;
    c.iterations = 40;
  } else {
    throw ConfigError("unknown attack preset '" + name + "'");
  }
  return c;
}

AttackConfig AttackConfig::from_config(const KvConfig& cfg) {
  cfg.check_keys({"preset", "name", "family", "epsilon", "alpha", "iterations", "restarts", "loss", "tau",
                  "subset_fraction", "mask_seed", "seed", "weights", "num_classes"},
                 "attack config");
  AttackConfig c;
  if (cfg.has("preset")) c = preset(cfg.get_string("preset", ""));
  if (cfg.has("family")) c.family = parse_family(cfg.get_string("family", ""));
  c.name = cfg.get_string("name", c.name.empty() ? to_string(c.family) : c.name);
  c.epsilon = cfg.get_double("epsilon", c.epsilon);
  c.alpha = cfg.get_double("alpha", c.alpha);
  c.iterations = static_cast<int>(cfg.get_int("iterations", c.iterations));
  c.restarts = static_cast<int>(cfg.get_int("restarts", c.restarts));
  if (cfg.has("loss")) c.loss = parse_loss_scheme(cfg.get_string("loss", ""));
  c.tau = cfg.get_double("tau", c.tau);
  c.subset_fraction = cfg.get_double("subset_fraction", c.subset_fraction);
  c.mask_seed = cfg.get_u64("mask_seed", c.mask_seed);
  c.seed = cfg.get_u64("seed", c.seed);
  if (cfg.has("weights")) c.weights = parse_weights_policy(cfg.get_string("weights", ""));
  c.num_classes = static_cast<std::size_t>(cfg.get_int("num_classes", 0));
  c.validate();
  return c;
}

KvConfig AttackConfig::to_config() const {
  KvConfig k;
  k.set("name", name);
  k.set("family", to_string(family));
  k.set("epsilon", format_double(epsilon));
  k.set("alpha", format_double(alpha));
  k.set("iterations", std::to_string(iterations));
  k.set("restarts", std::to_string(restarts));
  k.set("loss", to_string(loss));
  k.set("tau", format_double(tau));
  k.set("subset_fraction", format_double(subset_fraction));
  k.set("mask_seed", std::to_string(mask_seed));
  k.set("seed", std::to_string(seed));
  k.set("weights", to_string(weights));
  k.set("num_classes", std::to_string(num_classes));
  return k;
}

std::string AttackConfig::summary() const {
  std::string out;
  const auto kv = to_config();
  for (const auto& [k, v] : kv.values()) {
    if (!out.empty()) out += ';';
    out += k + '=' + v;
  }
  return out;
}

}  // namespace segadv
