#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "clasp/calibration.hpp"
#include "clasp/compliance.hpp"
#include "clasp/error.hpp"
#include "clasp/policy.hpp"
#include "clasp/sim.hpp"

namespace clasp {

/// Declarative configuration for controllers, labeling, training, and
/// scenario overrides. JSON; every key optional, defaults as in the structs.
/// Schema documented in the README.
struct AppConfig {
  AdmittanceParams admittance;
  GraspControllerParams grasp;
  SafetyLimits safety;
  ActionLimits action;
  LabelingConfig labeling;
  TrainingConfig training;
  nlohmann::json scenario_overrides;  // { "<name>": { knob: value, ... } }
};

namespace detail {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void maybe_vec3(const nlohmann::json& j, const char* key, Vec3& out) {
  if (j.contains(key)) {
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 3) throw ConfigError(std::string(key) + " needs 3 values");
    out = Vec3(v[0], v[1], v[2]);
  }
}

inline void maybe_pair(const nlohmann::json& j, const char* key,
                       std::array<double, 2>& out) {
  if (j.contains(key)) {
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw ConfigError(std::string(key) + " needs 2 values");
    out = {v[0], v[1]};
  }
}

}  // namespace detail

inline AppConfig parse_config(const nlohmann::json& j) {
  AppConfig cfg;
  if (j.contains("admittance")) {
    const auto& a = j.at("admittance");
    detail::maybe_vec3(a, "mass", cfg.admittance.mass);
    detail::maybe(a, "damping_ratio", cfg.admittance.damping_ratio);
    detail::maybe(a, "rate", cfg.admittance.rate);
    detail::maybe(a, "k_max", cfg.admittance.k_max);
    detail::maybe(a, "v_max", cfg.admittance.v_max);
    cfg.admittance.validate();
  }
  if (j.contains("grasp")) {
    const auto& g = j.at("grasp");
    detail::maybe(g, "k_p", cfg.grasp.k_p);
    detail::maybe(g, "k_f", cfg.grasp.k_f);
    detail::maybe_pair(g, "width_limits", cfg.grasp.width_limits);
    detail::maybe(g, "v_max", cfg.grasp.v_max);
    detail::maybe(g, "rate", cfg.grasp.rate);
    cfg.grasp.validate();
  }
  if (j.contains("safety")) {
    const auto& s = j.at("safety");
    detail::maybe(s, "grasp_axis_limit", cfg.safety.grasp_axis_limit);
    detail::maybe(s, "other_axes_limit", cfg.safety.other_axes_limit);
    cfg.safety.validate();
  }
  if (j.contains("action")) {
    const auto& a = j.at("action");
    detail::maybe(a, "k_min", cfg.action.k_min);
    detail::maybe(a, "k_max", cfg.action.k_max);
    detail::maybe_pair(a, "width_limits", cfg.action.width_limits);
    cfg.action.validate();
  }
  if (j.contains("labeling")) {
    const auto& l = j.at("labeling");
    detail::maybe(l, "k_min", cfg.labeling.k_min);
    detail::maybe(l, "k_max", cfg.labeling.k_max);
    detail::maybe(l, "f_ref", cfg.labeling.f_ref);
    detail::maybe(l, "smoothing_window", cfg.labeling.smoothing_window);
    cfg.labeling.validate();
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    detail::maybe(t, "epochs", cfg.training.epochs);
    detail::maybe(t, "batch_size", cfg.training.batch_size);
    detail::maybe(t, "learning_rate", cfg.training.learning_rate);
    detail::maybe(t, "warmup_epochs", cfg.training.warmup_epochs);
    detail::maybe(t, "seed", cfg.training.seed);
    detail::maybe(t, "hidden", cfg.training.hidden);
    cfg.training.validate();
  }
  if (j.contains("scenarios")) cfg.scenario_overrides = j.at("scenarios");
  return cfg;
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_config(j);
}

/// Builds a scenario from the registry, applies shared controller settings,
/// then any per-scenario knob overrides from the config file.
inline Scenario scenario_from_config(const AppConfig& cfg,
                                     const std::string& name, uint64_t seed) {
  Scenario s = scenario_by_name(name, seed);
  s.admittance = cfg.admittance;
  s.grasp = cfg.grasp;
  s.action = cfg.action;
  // Task-specific safety thresholds (e.g. the higher insert grasp limit)
  // survive unless the config overrides them explicitly.
  if (cfg.scenario_overrides.contains(name)) {
    const auto& o = cfg.scenario_overrides.at(name);
    detail::maybe(o, "duration", s.duration);
    detail::maybe(o, "sensor_noise_sd", s.sensor_noise_sd);
    detail::maybe(o, "contact_force_target", s.contact_force_target);
    detail::maybe(o, "grasp_force_target", s.grasp_force_target);
    detail::maybe(o, "press_stiffness", s.press_stiffness);
    detail::maybe(o, "approach_lead", s.approach_lead);
    detail::maybe(o, "wipe_speed", s.wipe_speed);
    detail::maybe(o, "wipe_span", s.wipe_span);
    detail::maybe(o, "wipe_start_time", s.wipe_start_time);
    detail::maybe(o, "advance_lead", s.advance_lead);
    detail::maybe(o, "advance_depth", s.advance_depth);
    detail::maybe(o, "rotation_angle", s.rotation_angle);
    detail::maybe(o, "rotation_step", s.rotation_step);
    detail::maybe(o, "initial_width", s.initial_width);
    if (o.contains("grasp_axis_limit"))
      s.limits.grasp_axis_limit = o.at("grasp_axis_limit").get<double>();
    if (o.contains("other_axes_limit"))
      s.limits.other_axes_limit = o.at("other_axes_limit").get<double>();
  }
  s.validate();
  return s;
}

}  // namespace clasp
