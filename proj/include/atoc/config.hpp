#pragma once

#include <string>

#include "atoc/training.hpp"

namespace atoc {

// One fully resolved run: scenario, learning, and communication settings
// plus artifact paths. Built from a JSON config file; every key is checked
// against the schema (unknown keys are rejected with their path) before any
// work starts.
struct RunConfig {
  ScenarioConfig scenario;
  TrainConfig train;
  CommConfig comm;
  ChannelKind kind = ChannelKind::Lstm;
  bool comm_enabled = true;
  std::string out = "runs/out";
  std::size_t eval_episodes = 30;
  bool comm_log = false;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

}  // namespace atoc
