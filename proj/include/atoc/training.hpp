#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "atoc/adam.hpp"
#include "atoc/env.hpp"
#include "atoc/nets.hpp"
#include "atoc/noise.hpp"
#include "atoc/protocol.hpp"
#include "atoc/replay.hpp"
#include "atoc/rng.hpp"

namespace atoc {

enum class ChannelKind { Lstm, Mean, None };

std::string channel_kind_name(ChannelKind k);
ChannelKind channel_kind_from_name(const std::string& name);

struct TrainConfig {
  double lr = 0.001;
  double gamma = 0.96;
  double tau = 0.001;
  std::size_t minibatch = 2560;
  std::size_t warmup_episodes = 30;
  std::size_t episodes = 2000;
  std::size_t buffer_capacity = 100000;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  std::size_t checkpoint_every = 0;  // episodes; 0 = final only
  bool checkpoint_buffer = true;
  std::uint64_t seed = 1;

  void validate() const;
};

// Learner for one team of agents: all four networks, their targets,
// optimizer states, replay buffer, exploration noise, and the per-episode
// gain queue feeding the attention classifier.
struct Side {
  std::size_t lo = 0;  // world agent range [lo, hi)
  std::size_t hi = 0;

  ActorNet actor;
  CriticNet critic;
  AttentionClassifier clf;
  CommChannel channel;
  ActorNet actor_target;
  CriticNet critic_target;
  CommChannel channel_target;

  AdamState actor_opt;
  AdamState critic_opt;
  AdamState clf_opt;
  AdamState channel_opt;

  ReplayBuffer buffer{1};
  OUNoise noise{1};
  Rng gate_rng{0};
  Rng noise_rng{0};
  Rng sample_rng{0};

  GroupSet groups;  // side-local ids, current T-window
  std::vector<Array> queue_thoughts;  // decision-time initiator thoughts
  std::vector<double> queue_dq;

  std::size_t n_agents() const { return hi - lo; }
};

// Sampled transitions flattened to (transition, agent) rows; groups carry
// batch-row indices, transitions in sample order.
struct AssembledBatch {
  Array obs;
  Array act;
  Array next_obs;
  Array y;  // [R,1], filled by compute_targets
  std::vector<double> rew;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> comm_rows;
  std::vector<std::size_t> nocomm_rows;

  std::size_t rows() const { return obs.numel() ? obs.rows() : 0; }
};

AssembledBatch assemble_batch(const std::vector<const Transition*>& sample,
                              std::size_t n_agents);

// y = r + gamma * Q'(o', a') with a' from the target actor; rows with
// communication route their target thoughts through the target channel over
// the stored groups.
void compute_targets(Side& side, AssembledBatch& batch, ChannelKind kind, double gamma);

// One Adam step minimizing mean squared (Q(o,a) - y)^2 over `rows`.
double critic_step(Side& side, const AssembledBatch& batch,
                   const std::vector<std::size_t>& rows, double lr);

// One Adam step ascending mean Q(o, mu(o)) over no-communication rows with a
// zero-filled integrated-thought slot. Critic parameters are left untouched.
// Returns the applied gradient norm.
double actor_step(Side& side, const AssembledBatch& batch,
                  const std::vector<std::size_t>& rows, double lr);

// Joint channel+actor Adam step ascending mean Q over communication rows,
// backpropagating through the channel pass. Returns (channel gradient norm,
// actor gradient norm); the channel norm is 0 for the mean channel.
std::pair<double, double> channel_step(Side& side, const AssembledBatch& batch,
                                       ChannelKind kind, double lr);

// Mean critic value gain of executed group actions over independent ones.
double delta_q(CriticNet& critic, const Array& obs_rows, const Array& executed_actions,
               const Array& independent_actions);

// Min-max to [0,1]; a degenerate range (or a single record) maps to 0.5.
std::vector<double> minmax_normalize(const std::vector<double>& values);

// One Adam step on the clamped log loss over the tagged queue.
double classifier_step(AttentionClassifier& clf, AdamState& opt, const Array& thoughts,
                       const std::vector<double>& tags, double lr);

// One acting pass for a side: thoughts, gate re-decision every T steps,
// channel integration, greedy actions. Exploration noise is the caller's.
struct ActOutput {
  Array thoughts;  // [n,128]
  Array h_tilde;   // [n,128], zero rows for agents outside any group
  Array actions;   // [n,2]
  std::vector<double> gate_probs;  // filled at re-decision steps
  bool redecided = false;
};

ActOutput act_side(Side& side, const WorldState& world, const ScenarioConfig& scenario,
                   const CommConfig& comm, ChannelKind kind, bool comm_enabled,
                   std::size_t t, bool training, double exploration);

struct EpisodeStats {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double critic_loss = 0.0;
  double actor_grad_norm = 0.0;
  double channel_grad_norm = 0.0;
  double classifier_loss = 0.0;
  double comm_rate = 0.0;
  std::size_t update_steps = 0;
  std::size_t dq_records = 0;
};

// Full training loop. Members are open for checkpointing and tests.
struct Trainer {
  Trainer(const ScenarioConfig& scenario, const TrainConfig& train, const CommConfig& comm,
          ChannelKind kind, bool comm_enabled);

  EpisodeStats run_episode();

  // Runs the remaining episodes, appending one metrics row per episode to
  // out_dir/metrics.csv (plus comm events to out_dir/comm.csv when enabled)
  // and writing periodic + final checkpoints.
  void run(const std::string& out_dir, bool comm_log = false);

  ScenarioConfig scenario;
  TrainConfig train;
  CommConfig comm;
  ChannelKind kind;
  bool comm_enabled;

  std::vector<Side> sides;
  Rng env_rng{0};
  std::size_t episode = 0;  // completed episodes
  std::vector<EpisodeStats> history;

  double current_exploration() const;

 private:
  struct CommEvent {
    std::size_t step;
    std::size_t initiator;
    std::vector<std::size_t> members;
    double prob;
  };
  std::vector<CommEvent> episode_comm_events_;

  void update_side(Side& side, EpisodeStats& stats);
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpisodeStats& s);

}  // namespace atoc
