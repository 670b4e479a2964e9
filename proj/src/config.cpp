#include "atoc/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "atoc/errors.hpp"

namespace atoc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError("config." + key + ": " + what);
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

bool as_flag(const json& v, const std::string& key) {
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::string as_text(const json& v, const std::string& key) {
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

}  // namespace

void RunConfig::validate() const {
  scenario.validate();
  train.validate();
  comm.validate();
  if (eval_episodes == 0) throw ConfigError("config.eval_episodes: must be positive");
  if (out.empty()) throw ConfigError("config.out: must be non-empty");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (!j.contains("scenario")) throw ConfigError("config.scenario: required");

  // Scenario defaults first; every later key overrides one field.
  const std::string sname = as_text(j.at("scenario"), "scenario");
  RunConfig rc;
  const Scenario sc = scenario_from_name(sname);
  std::size_t n_agents = 6, n_prey = 3, n_landmarks = 6;
  if (j.contains("n_agents")) n_agents = as_count(j.at("n_agents"), "n_agents");
  if (j.contains("n_prey")) n_prey = as_count(j.at("n_prey"), "n_prey");
  if (j.contains("n_landmarks")) n_landmarks = as_count(j.at("n_landmarks"), "n_landmarks");
  switch (sc) {
    case Scenario::Navigation: rc.scenario = navigation_config(n_agents, n_landmarks); break;
    case Scenario::Pushball: rc.scenario = pushball_config(n_agents); break;
    case Scenario::PredatorPrey:
      rc.scenario = predprey_config(n_agents, n_prey, n_landmarks);
      break;
  }

  for (const auto& [key, value] : j.items()) {
    if (key == "scenario" || key == "n_agents" || key == "n_prey" ||
        key == "n_landmarks") {
      continue;  // consumed above
    } else if (key == "episode_len") {
      rc.scenario.episode_len = as_count(value, key);
    } else if (key == "bound") {
      rc.scenario.bound = as_real(value, key);
    } else if (key == "episodes") {
      rc.train.episodes = as_count(value, key);
    } else if (key == "seed") {
      rc.train.seed = as_u64(value, key);
    } else if (key == "lr") {
      rc.train.lr = as_real(value, key);
    } else if (key == "gamma") {
      rc.train.gamma = as_real(value, key);
    } else if (key == "tau") {
      rc.train.tau = as_real(value, key);
    } else if (key == "minibatch") {
      rc.train.minibatch = as_count(value, key);
    } else if (key == "warmup_episodes") {
      rc.train.warmup_episodes = as_count(value, key);
    } else if (key == "buffer_capacity") {
      rc.train.buffer_capacity = as_count(value, key);
    } else if (key == "ou_theta") {
      rc.train.ou_theta = as_real(value, key);
    } else if (key == "ou_sigma") {
      rc.train.ou_sigma = as_real(value, key);
    } else if (key == "checkpoint_every") {
      rc.train.checkpoint_every = as_count(value, key);
    } else if (key == "checkpoint_buffer") {
      rc.train.checkpoint_buffer = as_flag(value, key);
    } else if (key == "comm") {
      const std::string mode = as_text(value, key);
      if (mode != "on" && mode != "off") fail(key, "expected \"on\" or \"off\"");
      rc.comm_enabled = mode == "on";
    } else if (key == "channel") {
      rc.kind = channel_kind_from_name(as_text(value, key));
    } else if (key == "T") {
      rc.comm.T = as_count(value, key);
    } else if (key == "m") {
      rc.comm.m = as_count(value, key);
    } else if (key == "comm_radius") {
      rc.comm.radius = as_real(value, key);
    } else if (key == "threshold") {
      rc.comm.threshold = as_real(value, key);
    } else if (key == "exploration") {
      rc.comm.exploration = as_real(value, key);
    } else if (key == "out") {
      rc.out = as_text(value, key);
    } else if (key == "eval_episodes") {
      rc.eval_episodes = as_count(value, key);
    } else if (key == "comm_log") {
      rc.comm_log = as_flag(value, key);
    } else {
      fail(key, "unknown key");
    }
  }
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config file not found: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace atoc
