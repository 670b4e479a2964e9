#include "atoc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "atoc/errors.hpp"

namespace atoc {

namespace {

// One team inside a rollout, with the communication settings of the trainer
// it came from (crossplay mixes teams from different trainers).
struct SideRef {
  Side* side;
  ChannelKind kind;
  const CommConfig* comm;
  bool comm_enabled;
};

struct Sums {
  double reward = 0.0;
  double predator_reward = 0.0;
  std::size_t collisions = 0;
  std::size_t comm_agent_steps = 0;
  std::size_t occupied = 0;
};

void write_trajectory_rows(std::ofstream& out, std::size_t episode, std::size_t t,
                           const WorldState& state, const std::vector<Vec2>& actions,
                           const std::vector<double>& rewards,
                           const std::vector<long long>& group_of,
                           const ScenarioConfig& scenario) {
  char buf[256];
  for (std::size_t e = 0; e < scenario.n_entities(); ++e) {
    const bool agent = e < scenario.total_agents();
    const Vec2 a = agent ? actions[e] : Vec2{0.0, 0.0};
    const double r = agent ? rewards[e] : 0.0;
    const long long grp = agent ? group_of[e] : -1;
    std::snprintf(buf, sizeof(buf),
                  "%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld", episode, t,
                  e, state.pos[e].x, state.pos[e].y, state.vel[e].x, state.vel[e].y, a.x,
                  a.y, r, grp);
    out << buf << "\n";
  }
}

EvalReport run_rollout(const ScenarioConfig& scenario, const std::vector<SideRef>& refs,
                       std::size_t episodes, std::uint64_t seed, const EvalSinks& sinks) {
  if (episodes == 0) throw ConfigError("evaluation needs at least one episode");
  Rng env_rng = Rng(seed).split("eval-env");

  std::ofstream traj;
  if (!sinks.trajectory_path.empty()) {
    traj.open(sinks.trajectory_path, std::ios::trunc);
    if (!traj) throw ConfigError("cannot open " + sinks.trajectory_path);
    traj << "episode,step,entity,pos_x,pos_y,vel_x,vel_y,act_x,act_y,reward,group\n";
  }
  std::ofstream comm_out;
  if (!sinks.comm_path.empty()) {
    comm_out.open(sinks.comm_path, std::ios::trunc);
    if (!comm_out) throw ConfigError("cannot open " + sinks.comm_path);
    comm_out << "episode,step,initiator,members,gate_prob\n";
  }

  const std::size_t n_total = scenario.total_agents();
  const std::size_t n_pred = scenario.n_agents;
  Sums sums;

  for (std::size_t ep = 0; ep < episodes; ++ep) {
    WorldState world = reset(scenario, env_rng);
    for (std::size_t t = 0; t < scenario.episode_len; ++t) {
      std::vector<Vec2> actions(n_total);
      std::vector<long long> group_of(n_total, -1);
      for (const SideRef& ref : refs) {
        Side& side = *ref.side;
        const ActOutput out = act_side(side, world, scenario, *ref.comm, ref.kind,
                                       ref.comm_enabled, t, /*training=*/false, 0.0);
        for (std::size_t i = 0; i < side.n_agents(); ++i) {
          actions[side.lo + i] = {out.actions.at(i, 0), out.actions.at(i, 1)};
        }
        for (const Group& grp : side.groups.groups) {
          for (std::size_t m : grp.members) {
            group_of[side.lo + m] = static_cast<long long>(side.lo + grp.initiator);
          }
        }
        sums.comm_agent_steps += side.groups.member_union().size();
        if (out.redecided && comm_out.is_open()) {
          for (const Group& grp : side.groups.groups) {
            comm_out << ep << ',' << t << ',' << side.lo + grp.initiator << ',';
            for (std::size_t i = 0; i < grp.members.size(); ++i) {
              if (i) comm_out << '|';
              comm_out << side.lo + grp.members[i];
            }
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6f",
                          out.gate_probs.empty() ? 0.0 : out.gate_probs[grp.initiator]);
            comm_out << ',' << buf << "\n";
          }
        }
      }
      const StepResult res = step(world, actions, scenario);
      for (std::size_t i = 0; i < n_total; ++i) {
        sums.reward += res.rewards[i];
        if (i < n_pred) sums.predator_reward += res.rewards[i];
      }
      for (std::size_t n : res.collisions) sums.collisions += n;
      if (traj.is_open()) {
        write_trajectory_rows(traj, ep, t, res.state, actions, res.rewards, group_of,
                              scenario);
      }
      world = res.state;
    }
    if (scenario.scenario == Scenario::Navigation) {
      sums.occupied += count_occupied_landmarks(world, scenario);
    }
  }

  EvalReport rep;
  rep.scenario = scenario.scenario;
  rep.episodes = episodes;
  const double agent_steps =
      static_cast<double>(n_total) * static_cast<double>(scenario.episode_len) *
      static_cast<double>(episodes);
  rep.mean_reward = sums.reward / agent_steps;
  rep.collisions_per_episode =
      static_cast<double>(sums.collisions) / static_cast<double>(episodes);
  if (scenario.scenario == Scenario::Navigation && scenario.n_landmarks > 0) {
    rep.occupied_landmarks_pct =
        100.0 * static_cast<double>(sums.occupied) /
        (static_cast<double>(scenario.n_landmarks) * static_cast<double>(episodes));
  }
  if (scenario.scenario == Scenario::PredatorPrey && n_pred > 0) {
    rep.predator_score = sums.predator_reward /
                         (static_cast<double>(n_pred) *
                          static_cast<double>(scenario.episode_len) *
                          static_cast<double>(episodes));
  }
  rep.comm_rate = static_cast<double>(sums.comm_agent_steps) / agent_steps;
  return rep;
}

std::vector<SideRef> refs_of(Trainer& t, bool comm_enabled) {
  std::vector<SideRef> refs;
  for (Side& s : t.sides) {
    refs.push_back({&s, t.kind, &t.comm, comm_enabled && t.comm_enabled});
  }
  return refs;
}

}  // namespace

EvalReport evaluate(Trainer& trainer, std::size_t episodes, std::uint64_t seed,
                    bool comm_enabled, const EvalSinks& sinks) {
  return run_rollout(trainer.scenario, refs_of(trainer, comm_enabled), episodes, seed,
                     sinks);
}

std::pair<EvalReport, EvalReport> comm_off_eval(Trainer& trainer, std::size_t episodes,
                                                std::uint64_t seed) {
  if (trainer.kind == ChannelKind::None || !trainer.comm_enabled) {
    throw ConfigError("communication-off probe needs a communicating policy");
  }
  EvalReport on = evaluate(trainer, episodes, seed, /*comm_enabled=*/true);
  EvalReport off = evaluate(trainer, episodes, seed, /*comm_enabled=*/false);
  return {on, off};
}

EvalReport evaluate_random(const ScenarioConfig& scenario, std::size_t episodes,
                           std::uint64_t seed) {
  if (episodes == 0) throw ConfigError("evaluation needs at least one episode");
  Rng root(seed);
  Rng env_rng = root.split("eval-env");
  Rng act_rng = root.split("eval-act");
  const std::size_t n_total = scenario.total_agents();
  const std::size_t n_pred = scenario.n_agents;
  Sums sums;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    WorldState world = reset(scenario, env_rng);
    for (std::size_t t = 0; t < scenario.episode_len; ++t) {
      std::vector<Vec2> actions(n_total);
      for (std::size_t i = 0; i < n_total; ++i) {
        actions[i].x = act_rng.uniform(-1.0, 1.0);
        actions[i].y = act_rng.uniform(-1.0, 1.0);
      }
      const StepResult res = step(world, actions, scenario);
      for (std::size_t i = 0; i < n_total; ++i) {
        sums.reward += res.rewards[i];
        if (i < n_pred) sums.predator_reward += res.rewards[i];
      }
      for (std::size_t n : res.collisions) sums.collisions += n;
      world = res.state;
    }
    if (scenario.scenario == Scenario::Navigation) {
      sums.occupied += count_occupied_landmarks(world, scenario);
    }
  }
  EvalReport rep;
  rep.scenario = scenario.scenario;
  rep.episodes = episodes;
  const double agent_steps =
      static_cast<double>(n_total) * static_cast<double>(scenario.episode_len) *
      static_cast<double>(episodes);
  rep.mean_reward = sums.reward / agent_steps;
  rep.collisions_per_episode =
      static_cast<double>(sums.collisions) / static_cast<double>(episodes);
  if (scenario.scenario == Scenario::Navigation && scenario.n_landmarks > 0) {
    rep.occupied_landmarks_pct =
        100.0 * static_cast<double>(sums.occupied) /
        (static_cast<double>(scenario.n_landmarks) * static_cast<double>(episodes));
  }
  if (scenario.scenario == Scenario::PredatorPrey && n_pred > 0) {
    rep.predator_score = sums.predator_reward /
                         (static_cast<double>(n_pred) *
                          static_cast<double>(scenario.episode_len) *
                          static_cast<double>(episodes));
  }
  return rep;
}

void normalize_reports(std::vector<EvalReport*>& reports) {
  if (reports.empty()) return;
  double lo = reports[0]->mean_reward;
  double hi = lo;
  for (const EvalReport* r : reports) {
    lo = std::min(lo, r->mean_reward);
    hi = std::max(hi, r->mean_reward);
  }
  const double range = hi - lo;
  for (EvalReport* r : reports) {
    r->normalized_reward = range > 0.0 ? (r->mean_reward - lo) / range : 0.5;
  }
}

double crossplay_match(Trainer& pred, Trainer& prey, std::size_t episodes,
                       std::uint64_t seed) {
  const ScenarioConfig& a = pred.scenario;
  const ScenarioConfig& b = prey.scenario;
  if (a.scenario != Scenario::PredatorPrey || b.scenario != Scenario::PredatorPrey) {
    throw ConfigError("crossplay needs predator-prey policies");
  }
  if (a.n_agents != b.n_agents || a.n_prey != b.n_prey ||
      a.n_landmarks != b.n_landmarks || a.episode_len != b.episode_len) {
    throw ConfigError("crossplay scenario mismatch");
  }
  if (pred.sides.size() != 2 || prey.sides.size() != 2) {
    throw ConfigError("crossplay needs two-team policies");
  }
  std::vector<SideRef> refs;
  refs.push_back({&pred.sides[0], pred.kind, &pred.comm, pred.comm_enabled});
  refs.push_back({&prey.sides[1], prey.kind, &prey.comm, prey.comm_enabled});
  return run_rollout(a, refs, episodes, seed, {}).predator_score;
}

CrossplayResult crossplay_tournament(std::vector<Trainer*> entrants, std::size_t episodes,
                                     std::uint64_t seed) {
  if (entrants.empty()) throw ConfigError("tournament needs at least one entrant");
  CrossplayResult res;
  res.entrants = entrants.size();
  const std::size_t k = entrants.size();
  res.raw.resize(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      res.raw[i * k + j] = crossplay_match(*entrants[i], *entrants[j], episodes, seed);
    }
  }
  const auto [lo, hi] = std::minmax_element(res.raw.begin(), res.raw.end());
  const double range = *hi - *lo;
  res.normalized.resize(k * k);
  for (std::size_t idx = 0; idx < res.raw.size(); ++idx) {
    res.normalized[idx] = range > 0.0 ? (res.raw[idx] - *lo) / range : 0.5;
  }
  return res;
}

}  // namespace atoc
