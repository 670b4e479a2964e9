#include "atoc/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "atoc/checkpoint.hpp"
#include "atoc/errors.hpp"
#include "atoc/graph.hpp"
#include "atoc/log.hpp"
#include "atoc/lstm.hpp"

namespace atoc {

std::string channel_kind_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::Lstm: return "lstm";
    case ChannelKind::Mean: return "mean";
    case ChannelKind::None: return "none";
  }
  return "?";
}

ChannelKind channel_kind_from_name(const std::string& name) {
  if (name == "lstm") return ChannelKind::Lstm;
  if (name == "mean") return ChannelKind::Mean;
  if (name == "none") return ChannelKind::None;
  throw ConfigError("unknown channel kind '" + name + "'");
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0,1]");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must lie in [0,1]");
  if (minibatch == 0) throw ConfigError("minibatch must be positive");
  if (minibatch > buffer_capacity) {
    throw ConfigError("minibatch cannot exceed the replay capacity");
  }
  if (episodes == 0) throw ConfigError("episode count must be positive");
  if (ou_theta < 0.0 || ou_theta > 1.0 || ou_sigma < 0.0) {
    throw ConfigError("OU parameters out of range");
  }
}

namespace {

// Rows of a batch array selected into a fresh array.
Array take_rows(const Array& src, const std::vector<std::size_t>& rows) {
  const std::size_t c = src.cols();
  Array out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.v.data() + rows[i] * c, c, out.v.data() + i * c);
  }
  return out;
}

double grad_norm(const std::map<std::string, Array>& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads) {
    for (double x : g.v) s += x * x;
  }
  return std::sqrt(s);
}

// Integrated-thought matrix: channel outputs on member rows, zero elsewhere.
int masked_h_tilde(Graph& g, int integrated, const std::vector<std::size_t>& members,
                   std::size_t rows) {
  const std::size_t d = g.value(integrated).cols();
  const int zeros = g.constant(Array({rows, d}));
  if (members.empty()) return zeros;
  return g.scatter_rows(zeros, g.gather_rows(integrated, members), members);
}

int channel_pass_of(Graph& g, Side& side, ChannelKind kind, bool target, int thoughts,
                    const WavePlan& plan) {
  if (kind == ChannelKind::Mean) return mean_channel_pass(g, thoughts, plan);
  return lstm_channel_pass(g, target ? side.channel_target.params : side.channel.params,
                           thoughts, plan);
}

Array side_observations(const WorldState& world, const ScenarioConfig& scenario,
                        std::size_t lo, std::size_t hi) {
  const std::size_t d = observation_dim(scenario);
  Array out({hi - lo, d});
  for (std::size_t i = lo; i < hi; ++i) {
    const Array oi = observe(world, i, scenario);
    std::copy_n(oi.v.data(), d, out.v.data() + (i - lo) * d);
  }
  return out;
}

}  // namespace

AssembledBatch assemble_batch(const std::vector<const Transition*>& sample,
                              std::size_t n_agents) {
  if (sample.empty()) throw Error("cannot assemble an empty batch");
  const std::size_t obs_dim = sample[0]->obs.cols();
  const std::size_t act_dim = sample[0]->act.cols();
  const std::size_t rows = sample.size() * n_agents;
  AssembledBatch b;
  b.obs = Array({rows, obs_dim});
  b.act = Array({rows, act_dim});
  b.next_obs = Array({rows, obs_dim});
  b.rew.resize(rows);
  std::vector<bool> comm(rows, false);
  for (std::size_t s = 0; s < sample.size(); ++s) {
    const Transition& tr = *sample[s];
    if (tr.obs.rows() != n_agents || tr.rew.size() != n_agents) {
      throw ShapeError("transition row count does not match the learner");
    }
    std::copy_n(tr.obs.v.data(), n_agents * obs_dim, b.obs.v.data() + s * n_agents * obs_dim);
    std::copy_n(tr.act.v.data(), n_agents * act_dim, b.act.v.data() + s * n_agents * act_dim);
    std::copy_n(tr.next_obs.v.data(), n_agents * obs_dim,
                b.next_obs.v.data() + s * n_agents * obs_dim);
    std::copy_n(tr.rew.data(), n_agents, b.rew.data() + s * n_agents);
    for (const Group& grp : tr.comm.groups) {
      std::vector<std::size_t> rows_of;
      rows_of.reserve(grp.members.size());
      for (std::size_t m : grp.members) {
        if (m >= n_agents) throw ShapeError("stored group member out of range");
        const std::size_t r = s * n_agents + m;
        rows_of.push_back(r);
        comm[r] = true;
      }
      b.groups.push_back(std::move(rows_of));
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    (comm[r] ? b.comm_rows : b.nocomm_rows).push_back(r);
  }
  return b;
}

void compute_targets(Side& side, AssembledBatch& batch, ChannelKind kind, double gamma) {
  const std::size_t rows = batch.rows();
  Graph g;
  const int nobs = g.constant(batch.next_obs);
  const int ht = actor_thought(g, side.actor_target, nobs, BnMode::Infer);
  int h_tilde;
  if (!batch.groups.empty() && kind != ChannelKind::None) {
    const WavePlan plan = plan_channel_waves(batch.groups);
    const int integ = channel_pass_of(g, side, kind, /*target=*/true, ht, plan);
    h_tilde = masked_h_tilde(g, integ, plan.member_rows, rows);
  } else {
    h_tilde = g.constant(Array({rows, kThoughtDim}));
  }
  const int a = actor_action(g, side.actor_target, ht, h_tilde);
  const int q = critic_q(g, side.critic_target, nobs, a, BnMode::Infer);
  batch.y = Array({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    batch.y.v[r] = batch.rew[r] + gamma * g.value(q).v[r];
  }
}

double critic_step(Side& side, const AssembledBatch& batch,
                   const std::vector<std::size_t>& rows, double lr) {
  if (rows.empty()) return 0.0;
  if (batch.y.numel() != batch.rows()) {
    throw ShapeError("critic step before compute_targets");
  }
  Graph g;
  BnFolds folds;
  const int obs = g.constant(take_rows(batch.obs, rows));
  const int act = g.constant(take_rows(batch.act, rows));
  const int q = critic_q(g, side.critic, obs, act, BnMode::Train, &folds);
  const int err = g.sub(q, g.constant(take_rows(batch.y, rows)));
  const int loss = g.reduce_mean(g.mul(err, err));
  g.backward(loss);
  adam_step(side.critic.params, g.param_grads(side.critic.params), side.critic_opt, lr);
  apply_bn_folds(g, folds);
  return g.value(loss).v[0];
}

double actor_step(Side& side, const AssembledBatch& batch,
                  const std::vector<std::size_t>& rows, double lr) {
  if (rows.empty()) return 0.0;
  Graph g;
  BnFolds folds;
  const int obs = g.constant(take_rows(batch.obs, rows));
  const int h = actor_thought(g, side.actor, obs, BnMode::Train, &folds);
  const int h_tilde = g.constant(Array({rows.size(), kThoughtDim}));
  const int a = actor_action(g, side.actor, h, h_tilde);
  const int q = critic_q(g, side.critic, obs, a, BnMode::Infer, nullptr, /*frozen=*/true);
  const int loss = g.scale(g.reduce_mean(q), -1.0);
  g.backward(loss);
  const auto grads = g.param_grads(side.actor.params);
  adam_step(side.actor.params, grads, side.actor_opt, lr);
  apply_bn_folds(g, folds);
  return grad_norm(grads);
}

std::pair<double, double> channel_step(Side& side, const AssembledBatch& batch,
                                       ChannelKind kind, double lr) {
  if (batch.comm_rows.empty() || kind == ChannelKind::None) return {0.0, 0.0};
  // Compact the communication rows so the channel pass runs on a dense
  // thought matrix; groups are re-indexed into that compact space.
  std::map<std::size_t, std::size_t> compact;
  for (std::size_t i = 0; i < batch.comm_rows.size(); ++i) {
    compact[batch.comm_rows[i]] = i;
  }
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(batch.groups.size());
  for (const auto& grp : batch.groups) {
    std::vector<std::size_t> rows_of;
    rows_of.reserve(grp.size());
    for (std::size_t r : grp) rows_of.push_back(compact.at(r));
    groups.push_back(std::move(rows_of));
  }
  const WavePlan plan = plan_channel_waves(groups);

  Graph g;
  BnFolds folds;
  const int obs = g.constant(take_rows(batch.obs, batch.comm_rows));
  const int h = actor_thought(g, side.actor, obs, BnMode::Train, &folds);
  const int integ = channel_pass_of(g, side, kind, /*target=*/false, h, plan);
  const int a = actor_action(g, side.actor, h, integ);
  const int q = critic_q(g, side.critic, obs, a, BnMode::Infer, nullptr, /*frozen=*/true);
  const int loss = g.scale(g.reduce_mean(q), -1.0);
  g.backward(loss);
  double channel_norm = 0.0;
  if (kind == ChannelKind::Lstm) {
    const auto cgrads = g.param_grads(side.channel.params);
    adam_step(side.channel.params, cgrads, side.channel_opt, lr);
    channel_norm = grad_norm(cgrads);
  }
  const auto agrads = g.param_grads(side.actor.params);
  adam_step(side.actor.params, agrads, side.actor_opt, lr);
  apply_bn_folds(g, folds);
  return {channel_norm, grad_norm(agrads)};
}

double delta_q(CriticNet& critic, const Array& obs_rows, const Array& executed_actions,
               const Array& independent_actions) {
  if (obs_rows.rows() == 0) throw Error("delta_q over an empty group");
  const Array q_comm = critic_forward(critic, obs_rows, executed_actions);
  const Array q_ind = critic_forward(critic, obs_rows, independent_actions);
  double s = 0.0;
  for (std::size_t r = 0; r < q_comm.rows(); ++r) s += q_comm.v[r] - q_ind.v[r];
  return s / static_cast<double>(q_comm.rows());
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  std::vector<double> tags(values.size(), 0.5);
  if (values.empty()) return tags;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return tags;  // degenerate: uninformative labels
  for (std::size_t i = 0; i < values.size(); ++i) {
    tags[i] = (values[i] - *lo) / range;
  }
  return tags;
}

double classifier_step(AttentionClassifier& clf, AdamState& opt, const Array& thoughts,
                       const std::vector<double>& tags, double lr) {
  const std::size_t k = thoughts.rows();
  if (k == 0 || tags.size() != k) {
    throw ShapeError("classifier step needs one tag per thought");
  }
  Array t({k, 1});
  Array t_inv({k, 1});
  for (std::size_t i = 0; i < k; ++i) {
    if (tags[i] < 0.0 || tags[i] > 1.0) throw NumericError("tag outside [0,1]");
    t.v[i] = tags[i];
    t_inv.v[i] = 1.0 - tags[i];
  }
  Graph g;
  const int p = classifier_prob(g, clf, g.constant(thoughts));
  const int pc = g.clamp(p, 1e-7, 1.0 - 1e-7);
  const int one_minus = g.sub(g.constant(Array::full({k, 1}, 1.0)), pc);
  const int ll = g.add(g.mul(g.log_(pc), g.constant(t)),
                       g.mul(g.log_(one_minus), g.constant(t_inv)));
  const int loss = g.scale(g.reduce_mean(ll), -1.0);
  g.backward(loss);
  adam_step(clf.params, g.param_grads(clf.params), opt, lr);
  return g.value(loss).v[0];
}

ActOutput act_side(Side& side, const WorldState& world, const ScenarioConfig& scenario,
                   const CommConfig& comm, ChannelKind kind, bool comm_enabled,
                   std::size_t t, bool training, double exploration) {
  const std::size_t n = side.n_agents();
  ActOutput out;
  Graph g;
  const int obs = g.constant(side_observations(world, scenario, side.lo, side.hi));
  const int h = actor_thought(g, side.actor, obs, BnMode::Infer);
  int h_tilde = -1;
  const bool comm_on = comm_enabled && kind != ChannelKind::None;
  if (comm_on) {
    if (t % comm.T == 0) {
      const int p = classifier_prob(g, side.clf, h);
      out.gate_probs.assign(g.value(p).v.begin(), g.value(p).v.end());
      CommConfig cfg = comm;
      cfg.exploration = exploration;
      const auto initiators =
          decide_initiators(out.gate_probs, cfg, side.lo, training, side.gate_rng);
      const GroupSet formed = form_groups(initiators, world, cfg, side.lo, side.hi, t);
      side.groups.groups.clear();
      for (const Group& grp : formed.groups) {
        Group local;
        local.initiator = grp.initiator - side.lo;
        local.formed_at = grp.formed_at;
        for (std::size_t m : grp.members) local.members.push_back(m - side.lo);
        side.groups.groups.push_back(std::move(local));
      }
      out.redecided = true;
    }
    if (!side.groups.empty()) {
      std::vector<std::vector<std::size_t>> rows;
      rows.reserve(side.groups.groups.size());
      for (const Group& grp : side.groups.groups) rows.push_back(grp.members);
      const WavePlan plan = plan_channel_waves(rows);
      const int integ = channel_pass_of(g, side, kind, /*target=*/false, h, plan);
      h_tilde = masked_h_tilde(g, integ, plan.member_rows, n);
    }
  } else if (t % comm.T == 0) {
    side.groups.groups.clear();
    out.redecided = true;
  }
  if (h_tilde < 0) h_tilde = g.constant(Array({n, kThoughtDim}));
  const int a = actor_action(g, side.actor, h, h_tilde);
  out.thoughts = g.value(h);
  out.h_tilde = g.value(h_tilde);
  out.actions = g.value(a);
  return out;
}

Trainer::Trainer(const ScenarioConfig& sc, const TrainConfig& tc, const CommConfig& cc,
                 ChannelKind k, bool ce)
    : scenario(sc), train(tc), comm(cc), kind(k), comm_enabled(ce) {
  train.validate();
  comm.validate();
  Rng root(train.seed);
  env_rng = root.split("env");
  const std::size_t obs_dim = observation_dim(scenario);
  const bool two_sides = scenario.scenario == Scenario::PredatorPrey;
  const std::size_t n_sides = two_sides ? 2 : 1;
  for (std::size_t s = 0; s < n_sides; ++s) {
    Side side;
    side.lo = s == 0 ? 0 : scenario.n_agents;
    side.hi = s == 0 && two_sides ? scenario.n_agents : scenario.total_agents();
    const std::string tag = std::to_string(s);
    Rng actor_rng = root.split("actor/" + tag);
    Rng critic_rng = root.split("critic/" + tag);
    Rng clf_rng = root.split("clf/" + tag);
    Rng channel_rng = root.split("channel/" + tag);
    side.actor = make_actor(obs_dim, actor_rng);
    side.critic = make_critic(obs_dim, kActionDim, critic_rng);
    side.clf = make_classifier(clf_rng);
    side.channel = make_channel(channel_rng);
    side.actor_target = side.actor;
    side.critic_target = side.critic;
    side.channel_target = side.channel;
    side.actor_opt = AdamState(side.actor.params);
    side.critic_opt = AdamState(side.critic.params);
    side.clf_opt = AdamState(side.clf.params);
    side.channel_opt = AdamState(side.channel.params);
    side.buffer = ReplayBuffer(train.buffer_capacity);
    side.noise = OUNoise(side.n_agents(), train.ou_theta, train.ou_sigma);
    side.gate_rng = root.split("gate/" + tag);
    side.noise_rng = root.split("ou/" + tag);
    side.sample_rng = root.split("sample/" + tag);
    sides.push_back(std::move(side));
  }
}

double Trainer::current_exploration() const {
  const double frac = static_cast<double>(episode) / static_cast<double>(train.episodes);
  return comm.exploration * std::max(0.0, 1.0 - frac);
}

void Trainer::update_side(Side& side, EpisodeStats& stats) {
  const auto sample = side.buffer.sample(train.minibatch, side.sample_rng);
  AssembledBatch batch = assemble_batch(sample, side.n_agents());
  compute_targets(side, batch, kind, train.gamma);
  double loss_sum = 0.0;
  std::size_t loss_n = 0;
  if (!batch.nocomm_rows.empty()) {
    loss_sum += critic_step(side, batch, batch.nocomm_rows, train.lr);
    ++loss_n;
    stats.actor_grad_norm += actor_step(side, batch, batch.nocomm_rows, train.lr);
  }
  if (!batch.comm_rows.empty()) {
    loss_sum += critic_step(side, batch, batch.comm_rows, train.lr);
    ++loss_n;
    const auto [cn, an] = channel_step(side, batch, kind, train.lr);
    stats.channel_grad_norm += cn;
    stats.actor_grad_norm += an;
  }
  if (loss_n > 0) stats.critic_loss += loss_sum / static_cast<double>(loss_n);
  soft_update(side.actor_target, side.actor, train.tau);
  soft_update(side.critic_target, side.critic, train.tau);
  if (kind == ChannelKind::Lstm) {
    soft_update(side.channel_target, side.channel, train.tau);
  }
}

EpisodeStats Trainer::run_episode() {
  EpisodeStats stats;
  stats.episode = episode;
  episode_comm_events_.clear();
  WorldState world = reset(scenario, env_rng);
  for (Side& side : sides) {
    side.noise.reset();
    side.groups.groups.clear();
    side.queue_thoughts.clear();
    side.queue_dq.clear();
  }
  const std::size_t n_total = scenario.total_agents();
  const bool updating = episode >= train.warmup_episodes;
  double reward_sum = 0.0;
  std::size_t comm_agent_steps = 0;

  for (std::size_t t = 0; t < scenario.episode_len; ++t) {
    std::vector<Vec2> actions(n_total);
    std::vector<Array> side_obs(sides.size());
    std::vector<Array> side_act(sides.size());
    for (std::size_t s = 0; s < sides.size(); ++s) {
      Side& side = sides[s];
      const std::size_t n = side.n_agents();
      side_obs[s] = side_observations(world, scenario, side.lo, side.hi);
      ActOutput out = act_side(side, world, scenario, comm, kind, comm_enabled, t,
                               /*training=*/true, current_exploration());
      const auto& noise = side.noise.step(side.noise_rng);
      Array executed({n, kActionDim});
      for (std::size_t i = 0; i < n; ++i) {
        const double ax = std::clamp(out.actions.at(i, 0) + noise[i].x, -1.0, 1.0);
        const double ay = std::clamp(out.actions.at(i, 1) + noise[i].y, -1.0, 1.0);
        executed.at(i, 0) = ax;
        executed.at(i, 1) = ay;
        actions[side.lo + i] = {ax, ay};
      }
      side_act[s] = executed;
      comm_agent_steps += side.groups.member_union().size();
      if (out.redecided) {
        for (const Group& grp : side.groups.groups) {
          // One gain record per (initiator, window), at formation time.
          Array grp_obs({grp.members.size(), side_obs[s].cols()});
          Array a_exec({grp.members.size(), kActionDim});
          for (std::size_t j = 0; j < grp.members.size(); ++j) {
            const std::size_t m = grp.members[j];
            std::copy_n(side_obs[s].v.data() + m * side_obs[s].cols(), side_obs[s].cols(),
                        grp_obs.v.data() + j * side_obs[s].cols());
            a_exec.at(j, 0) = executed.at(m, 0);
            a_exec.at(j, 1) = executed.at(m, 1);
          }
          const Array h_rows = take_rows(out.thoughts, grp.members);
          const Array a_ind =
              act_forward(side.actor, h_rows, Array({grp.members.size(), kThoughtDim}));
          const double dq = delta_q(side.critic, grp_obs, a_exec, a_ind);
          Array h_init({1, kThoughtDim});
          std::copy_n(out.thoughts.v.data() + grp.initiator * kThoughtDim, kThoughtDim,
                      h_init.v.data());
          side.queue_thoughts.push_back(std::move(h_init));
          side.queue_dq.push_back(dq);
          CommEvent ev;
          ev.step = t;
          ev.initiator = side.lo + grp.initiator;
          for (std::size_t m : grp.members) ev.members.push_back(side.lo + m);
          ev.prob = out.gate_probs.empty() ? 0.0 : out.gate_probs[grp.initiator];
          episode_comm_events_.push_back(std::move(ev));
        }
      }
    }

    const StepResult res = step(world, actions, scenario);
    for (std::size_t s = 0; s < sides.size(); ++s) {
      Side& side = sides[s];
      Transition tr;
      tr.obs = std::move(side_obs[s]);
      tr.act = std::move(side_act[s]);
      tr.rew.assign(res.rewards.begin() + static_cast<std::ptrdiff_t>(side.lo),
                    res.rewards.begin() + static_cast<std::ptrdiff_t>(side.hi));
      tr.next_obs = side_observations(res.state, scenario, side.lo, side.hi);
      tr.comm = side.groups;
      for (double r : tr.rew) reward_sum += r;
      side.buffer.push(std::move(tr));
    }
    if (updating) {
      for (Side& side : sides) update_side(side, stats);
      ++stats.update_steps;
    }
    world = res.state;
  }

  double clf_loss_sum = 0.0;
  std::size_t clf_updates = 0;
  for (Side& side : sides) {
    stats.dq_records += side.queue_dq.size();
    if (updating && !side.queue_dq.empty()) {
      const auto tags = minmax_normalize(side.queue_dq);
      Array thoughts({side.queue_thoughts.size(), kThoughtDim});
      for (std::size_t i = 0; i < side.queue_thoughts.size(); ++i) {
        std::copy_n(side.queue_thoughts[i].v.data(), kThoughtDim,
                    thoughts.v.data() + i * kThoughtDim);
      }
      clf_loss_sum += classifier_step(side.clf, side.clf_opt, thoughts, tags, train.lr);
      ++clf_updates;
    }
    side.queue_thoughts.clear();
    side.queue_dq.clear();
  }
  if (clf_updates > 0) stats.classifier_loss = clf_loss_sum / static_cast<double>(clf_updates);

  const double steps = static_cast<double>(scenario.episode_len);
  stats.mean_reward = reward_sum / (static_cast<double>(n_total) * steps);
  stats.comm_rate =
      static_cast<double>(comm_agent_steps) / (static_cast<double>(n_total) * steps);
  if (stats.update_steps > 0) {
    const double u = static_cast<double>(stats.update_steps);
    stats.critic_loss /= u;
    stats.actor_grad_norm /= u;
    stats.channel_grad_norm /= u;
  }
  ++episode;
  history.push_back(stats);
  return stats;
}

std::string metrics_csv_header() {
  return "episode,mean_reward,critic_loss,actor_grad_norm,channel_grad_norm,"
         "classifier_loss,comm_rate";
}

std::string metrics_csv_row(const EpisodeStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", s.episode,
                s.mean_reward, s.critic_loss, s.actor_grad_norm, s.channel_grad_norm,
                s.classifier_loss, s.comm_rate);
  return buf;
}

void Trainer::run(const std::string& out_dir, bool comm_log) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path metrics_path = fs::path(out_dir) / "metrics.csv";
  const bool fresh = !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw ConfigError("cannot open " + metrics_path.string());
  if (fresh) metrics << metrics_csv_header() << "\n";
  std::ofstream comm_out;
  if (comm_log) {
    const fs::path comm_path = fs::path(out_dir) / "comm.csv";
    const bool comm_fresh = !fs::exists(comm_path);
    comm_out.open(comm_path, std::ios::app);
    if (comm_fresh) comm_out << "episode,step,initiator,members,gate_prob\n";
  }

  while (episode < train.episodes) {
    const EpisodeStats stats = run_episode();
    metrics << metrics_csv_row(stats) << "\n";
    metrics.flush();
    if (comm_out.is_open()) {
      for (const CommEvent& ev : episode_comm_events_) {
        comm_out << stats.episode << ',' << ev.step << ',' << ev.initiator << ',';
        for (std::size_t i = 0; i < ev.members.size(); ++i) {
          if (i) comm_out << '|';
          comm_out << ev.members[i];
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", ev.prob);
        comm_out << ',' << buf << "\n";
      }
      comm_out.flush();
    }
    if ((train.checkpoint_every > 0 && episode % train.checkpoint_every == 0) ||
        episode == train.episodes) {
      const std::string name =
          episode == train.episodes ? "checkpoint_final.ckpt"
                                    : "checkpoint_ep" + std::to_string(episode) + ".ckpt";
      save_checkpoint((fs::path(out_dir) / name).string(), *this);
      ATOC_LOG_INFO("episode %zu/%zu reward %.4f -> %s", episode, train.episodes,
                    stats.mean_reward, name.c_str());
    }
  }
}

}  // namespace atoc
