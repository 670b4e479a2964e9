#pragma once

#include <limits>
#include <string>
#include <vector>

#include "atoc/training.hpp"

namespace atoc {

// Aggregate over one greedy evaluation run (noise off, gate exploration off).
struct EvalReport {
  Scenario scenario = Scenario::Navigation;
  std::size_t episodes = 0;
  double mean_reward = 0.0;             // per agent per step
  double collisions_per_episode = 0.0;  // overlap pairs (navigation) / catches (predator-prey)
  double occupied_landmarks_pct = 0.0;  // navigation, episode-end occupancy, [0,100]
  double normalized_reward = std::numeric_limits<double>::quiet_NaN();  // see normalize_reports
  double predator_score = 0.0;          // predator reward per predator per step
  double comm_rate = 0.0;               // fraction of agent-steps inside a group
};

// Optional CSV sinks for evaluation rollouts. Trajectory rows are
// (episode, step, entity, position, velocity, action, reward, group) with
// post-step state; group is the initiator id or -1. Communication rows are
// (episode, step, initiator, members, gate_prob), members '|'-separated.
struct EvalSinks {
  std::string trajectory_path;
  std::string comm_path;
};

// Greedy rollouts of the trainer's current policies on a fresh rng stream
// derived from `seed`. Pure: repeated calls with the same trainer state and
// seed produce identical reports. `comm_enabled` additionally gates the
// trainer's own communication flag (used by the comm-off probe).
EvalReport evaluate(Trainer& trainer, std::size_t episodes, std::uint64_t seed,
                    bool comm_enabled = true, const EvalSinks& sinks = {});

// Same parameters and seeds, with and without the attention gate. First
// report is comm-on, second comm-off.
std::pair<EvalReport, EvalReport> comm_off_eval(Trainer& trainer, std::size_t episodes,
                                                std::uint64_t seed);

// Uniform random actions in [-1,1]^2, same aggregation as evaluate.
EvalReport evaluate_random(const ScenarioConfig& scenario, std::size_t episodes,
                           std::uint64_t seed);

// Min-max of mean rewards across a comparison set, written into each
// report's normalized_reward; both endpoints attained. Degenerate range
// maps to 0.5.
void normalize_reports(std::vector<EvalReport*>& reports);

// One predator-prey matchup: predators from `pred`, prey from `prey`.
// Returns the raw predator score. Scenario configs must agree.
double crossplay_match(Trainer& pred, Trainer& prey, std::size_t episodes,
                       std::uint64_t seed);

// Full tournament over entrants: every (predator i, prey j) pairing. Raw
// scores row-major over (i, j); normalized by min-max across the whole
// tournament with both endpoints attained.
struct CrossplayResult {
  std::size_t entrants = 0;
  std::vector<double> raw;         // entrants * entrants
  std::vector<double> normalized;  // same layout, in [0,1]
};

CrossplayResult crossplay_tournament(std::vector<Trainer*> entrants, std::size_t episodes,
                                     std::uint64_t seed);

}  // namespace atoc
