#include "atoc/env.hpp"

#include <algorithm>
#include <limits>

#include "atoc/errors.hpp"

namespace atoc {

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Navigation: return "navigation";
    case Scenario::Pushball: return "pushball";
    case Scenario::PredatorPrey: return "predator_prey";
  }
  return "?";
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "navigation") return Scenario::Navigation;
  if (name == "pushball") return Scenario::Pushball;
  if (name == "predator_prey") return Scenario::PredatorPrey;
  throw ConfigError("unknown scenario '" + name + "'");
}

double ScenarioConfig::radius_of(std::size_t entity) const {
  if (entity < total_agents()) return agent_radius;
  if (has_ball() && entity == ball_index()) return ball_radius;
  return landmark_radius;
}

double ScenarioConfig::max_speed_of(std::size_t entity) const {
  if (entity < total_agents()) {
    return is_prey(entity) ? prey_max_speed : agent_max_speed;
  }
  if (has_ball() && entity == ball_index()) return ball_max_speed;
  return 0.0;
}

void ScenarioConfig::validate() const {
  if (n_agents == 0) throw ConfigError("scenario needs at least one agent");
  if (scenario == Scenario::PredatorPrey && n_prey == 0) {
    throw ConfigError("predator-prey needs at least one prey");
  }
  if (scenario != Scenario::PredatorPrey && n_prey != 0) {
    throw ConfigError("prey agents only exist in predator-prey");
  }
  if (scenario == Scenario::Navigation && n_landmarks == 0) {
    throw ConfigError("navigation needs at least one landmark");
  }
  if (episode_len == 0) throw ConfigError("episode length must be positive");
  if (dt <= 0.0 || agent_radius <= 0.0 || bound <= 0.0) {
    throw ConfigError("dt, radii, and bounds must be positive");
  }
  if (damping < 0.0 || damping >= 1.0) {
    throw ConfigError("damping must lie in [0,1)");
  }
}

ScenarioConfig navigation_config(std::size_t n_agents, std::size_t n_landmarks) {
  ScenarioConfig c;
  c.scenario = Scenario::Navigation;
  c.n_agents = n_agents;
  c.n_landmarks = n_landmarks;
  c.episode_len = 100;
  c.validate();
  return c;
}

ScenarioConfig pushball_config(std::size_t n_agents) {
  ScenarioConfig c;
  c.scenario = Scenario::Pushball;
  c.n_agents = n_agents;
  c.n_landmarks = 0;
  c.episode_len = 300;
  c.validate();
  return c;
}

ScenarioConfig predprey_config(std::size_t n_predators, std::size_t n_prey,
                               std::size_t n_landmarks) {
  ScenarioConfig c;
  c.scenario = Scenario::PredatorPrey;
  c.n_agents = n_predators;
  c.n_prey = n_prey;
  c.n_landmarks = n_landmarks;
  c.episode_len = 200;
  c.validate();
  return c;
}

std::size_t observation_dim(const ScenarioConfig& config) {
  switch (config.scenario) {
    case Scenario::Navigation: return 4 + 3 * 4 + 4 * 2;
    case Scenario::Pushball: return 4 + 2 + 10 * 4;
    case Scenario::PredatorPrey: return 4 + 5 * 4 + 3 * 4 + 2 * 2;
  }
  return 0;
}

WorldState reset(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const std::size_t n = config.n_entities();
  WorldState s;
  s.pos.resize(n);
  s.vel.assign(n, Vec2{});
  // Largest entities first keeps rejection sampling feasible: the pushball
  // ball is placed before the agents that must fit around it.
  std::vector<std::size_t> order;
  if (config.has_ball()) order.push_back(config.ball_index());
  for (std::size_t i = 0; i < config.total_agents(); ++i) order.push_back(i);
  for (std::size_t k = 0; k < config.n_landmarks; ++k) {
    order.push_back(config.landmark_index(k));
  }
  std::vector<bool> placed(n, false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t e = order[oi];
    const double r = config.radius_of(e);
    const double lim = std::max(config.bound - r, config.bound * 0.01);
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      const Vec2 p{rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
      ok = true;
      for (std::size_t other = 0; other < n; ++other) {
        if (!placed[other]) continue;
        if ((p - s.pos[other]).norm() < r + config.radius_of(other)) {
          ok = false;
          break;
        }
      }
      if (ok) s.pos[e] = p;
    }
    if (!ok) {
      throw ConfigError("could not place entity " + std::to_string(e) +
                        " without overlap; world too crowded");
    }
    placed[e] = true;
  }
  s.t = 0;
  return s;
}

namespace {

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

bool collidable(const ScenarioConfig& c, std::size_t e) {
  return e < c.total_agents() || (c.has_ball() && e == c.ball_index());
}

double mass_of(const ScenarioConfig& c, std::size_t e) {
  return (c.has_ball() && e == c.ball_index()) ? c.ball_mass : 1.0;
}

std::size_t overlap_count(const WorldState& s, const ScenarioConfig& c, std::size_t agent,
                          std::size_t lo, std::size_t hi) {
  std::size_t k = 0;
  for (std::size_t j = lo; j < hi; ++j) {
    if (j == agent) continue;
    if ((s.pos[agent] - s.pos[j]).norm() < c.radius_of(agent) + c.radius_of(j)) ++k;
  }
  return k;
}

}  // namespace

StepResult step(const WorldState& state, const std::vector<Vec2>& actions,
                const ScenarioConfig& config) {
  const std::size_t n_ag = config.total_agents();
  if (actions.size() != n_ag) {
    throw ConfigError("expected " + std::to_string(n_ag) + " actions, got " +
                      std::to_string(actions.size()));
  }
  for (const Vec2& a : actions) {
    if (!std::isfinite(a.x) || !std::isfinite(a.y)) {
      throw NumericError("non-finite action");
    }
  }
  const std::size_t n = config.n_entities();
  if (state.pos.size() != n || state.vel.size() != n) {
    throw ShapeError("world state entity count does not match the scenario");
  }

  // Soft penalty contact forces between overlapping collidable disks at the
  // current positions, zero at the contact boundary so touch-free worlds are
  // exact fixed points. Coincident centers get no force (no direction).
  std::vector<Vec2> force(n);
  const std::size_t n_coll = n_ag + (config.has_ball() ? 1 : 0);
  for (std::size_t i = 0; i < n_coll; ++i) {
    for (std::size_t j = i + 1; j < n_coll; ++j) {
      const Vec2 d = state.pos[i] - state.pos[j];
      const double dist = d.norm();
      const double rmin = config.radius_of(i) + config.radius_of(j);
      if (dist >= rmin || dist <= 0.0) continue;
      const double pen = config.contact_margin *
                         (softplus((rmin - dist) / config.contact_margin) - softplus(0.0));
      const Vec2 f = d * (config.contact_force * pen / dist);
      force[i] = force[i] + f;
      force[j] = force[j] - f;
    }
  }

  StepResult out;
  out.state = state;
  for (std::size_t e = 0; e < n; ++e) {
    if (!collidable(config, e)) continue;  // landmarks never move
    const Vec2 u = e < n_ag ? actions[e] : Vec2{};
    Vec2 v = out.state.vel[e] * (1.0 - config.damping) +
             (u + force[e] * (1.0 / mass_of(config, e))) * config.dt;
    const double speed = v.norm();
    const double vmax = config.max_speed_of(e);
    if (speed > vmax && speed > 0.0) v = v * (vmax / speed);
    out.state.vel[e] = v;
    out.state.pos[e] = out.state.pos[e] + v * config.dt;
  }
  out.state.t = state.t + 1;

  out.rewards.resize(n_ag);
  out.collisions.resize(n_ag);
  switch (config.scenario) {
    case Scenario::Navigation:
      for (std::size_t i = 0; i < n_ag; ++i) {
        out.collisions[i] = overlap_count(out.state, config, i, 0, n_ag);
        out.rewards[i] = reward_navigation(out.state, i, config);
      }
      break;
    case Scenario::Pushball: {
      const double r = reward_pushball(out.state, config);
      for (std::size_t i = 0; i < n_ag; ++i) {
        out.collisions[i] = overlap_count(out.state, config, i, 0, n_ag);
        out.rewards[i] = r;
      }
      out.metrics.ball_center_dist = out.state.pos[config.ball_index()].norm();
      break;
    }
    case Scenario::PredatorPrey:
      for (std::size_t i = 0; i < n_ag; ++i) {
        const bool prey = config.is_prey(i);
        out.collisions[i] = prey ? overlap_count(out.state, config, i, 0, config.n_agents)
                                 : overlap_count(out.state, config, i, config.n_agents, n_ag);
        out.rewards[i] = reward_predprey(out.state, i, config);
        if (!prey) out.metrics.predator_catches += out.collisions[i];
      }
      break;
  }
  return out;
}

double reward_navigation(const WorldState& state, std::size_t agent,
                         const ScenarioConfig& config) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < config.n_landmarks; ++k) {
    best = std::min(best, (state.pos[agent] - state.pos[config.landmark_index(k)]).norm());
  }
  double r = -best;
  if (overlap_count(state, config, agent, 0, config.total_agents()) > 0) r -= 1.0;
  return r;
}

double reward_pushball(const WorldState& state, const ScenarioConfig& config) {
  return -state.pos[config.ball_index()].norm();
}

double boundary_f(double a) {
  if (a <= 0.9) return 0.0;
  if (a < 1.0) return 10.0 * (a - 0.9);
  return std::exp(2.0 * a - 2.0);
}

double reward_predprey(const WorldState& state, std::size_t agent,
                       const ScenarioConfig& config) {
  const bool prey = config.is_prey(agent);
  if (prey) {
    const double hits = static_cast<double>(
        overlap_count(state, config, agent, 0, config.n_agents));
    const Vec2 p = state.pos[agent];
    return -10.0 * hits - boundary_f(std::abs(p.x)) - boundary_f(std::abs(p.y));
  }
  const double hits = static_cast<double>(
      overlap_count(state, config, agent, config.n_agents, config.total_agents()));
  return 10.0 * hits;
}

namespace {

// Indices of the `k` nearest candidates to `agent`, ties broken by index.
std::vector<std::size_t> nearest(const WorldState& s, std::size_t agent,
                                 std::vector<std::size_t> candidates, std::size_t k) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) {
                     const double da = (s.pos[a] - s.pos[agent]).norm();
                     const double db = (s.pos[b] - s.pos[agent]).norm();
                     if (da != db) return da < db;
                     return a < b;
                   });
  if (candidates.size() > k) candidates.resize(k);
  return candidates;
}

}  // namespace

Array observe(const WorldState& state, std::size_t agent, const ScenarioConfig& config) {
  if (agent >= config.total_agents()) {
    throw ConfigError("unknown agent id " + std::to_string(agent));
  }
  Array::Storage o;
  o.reserve(observation_dim(config));
  const Vec2 p = state.pos[agent];
  const Vec2 v = state.vel[agent];
  o.insert(o.end(), {p.x, p.y, v.x, v.y});

  auto rel_block = [&](const std::vector<std::size_t>& picked, std::size_t slots,
                       bool with_vel) {
    for (std::size_t s = 0; s < slots; ++s) {
      if (s < picked.size()) {
        const Vec2 rp = state.pos[picked[s]] - p;
        o.insert(o.end(), {rp.x, rp.y});
        if (with_vel) {
          const Vec2 rv = state.vel[picked[s]] - v;
          o.insert(o.end(), {rv.x, rv.y});
        }
      } else {
        o.insert(o.end(), with_vel ? 4 : 2, 0.0);
      }
    }
  };

  std::vector<std::size_t> others;
  switch (config.scenario) {
    case Scenario::Navigation: {
      for (std::size_t j = 0; j < config.n_agents; ++j) {
        if (j != agent) others.push_back(j);
      }
      rel_block(nearest(state, agent, others, 3), 3, true);
      std::vector<std::size_t> lms;
      for (std::size_t k = 0; k < config.n_landmarks; ++k) {
        lms.push_back(config.landmark_index(k));
      }
      rel_block(nearest(state, agent, lms, 4), 4, false);
      break;
    }
    case Scenario::Pushball: {
      const Vec2 rb = state.pos[config.ball_index()] - p;
      o.insert(o.end(), {rb.x, rb.y});
      for (std::size_t j = 0; j < config.n_agents; ++j) {
        if (j == agent) continue;
        if ((state.pos[j] - p).norm() <= config.neighbor_radius) others.push_back(j);
      }
      rel_block(nearest(state, agent, others, 10), 10, true);
      break;
    }
    case Scenario::PredatorPrey: {
      std::vector<std::size_t> preds, preys;
      for (std::size_t j = 0; j < config.total_agents(); ++j) {
        if (j == agent) continue;
        (config.is_prey(j) ? preys : preds).push_back(j);
      }
      rel_block(nearest(state, agent, preds, 5), 5, true);
      rel_block(nearest(state, agent, preys, 3), 3, true);
      std::vector<std::size_t> lms;
      for (std::size_t k = 0; k < config.n_landmarks; ++k) {
        lms.push_back(config.landmark_index(k));
      }
      rel_block(nearest(state, agent, lms, 2), 2, false);
      break;
    }
  }
  const std::size_t dim = o.size();
  return Array({1, dim}, std::move(o));
}

Array observe_all(const WorldState& state, const ScenarioConfig& config) {
  const std::size_t n = config.total_agents();
  const std::size_t d = observation_dim(config);
  Array out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const Array oi = observe(state, i, config);
    std::copy_n(oi.v.data(), d, out.v.data() + i * d);
  }
  return out;
}

std::size_t count_occupied_landmarks(const WorldState& state, const ScenarioConfig& config) {
  std::size_t occupied = 0;
  for (std::size_t k = 0; k < config.n_landmarks; ++k) {
    const Vec2 lp = state.pos[config.landmark_index(k)];
    const double r = config.landmark_radius + config.agent_radius;
    for (std::size_t i = 0; i < config.total_agents(); ++i) {
      if ((state.pos[i] - lp).norm() <= r) {
        ++occupied;
        break;
      }
    }
  }
  return occupied;
}

}  // namespace atoc
