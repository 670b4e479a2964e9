#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "atoc/array.hpp"
#include "atoc/rng.hpp"

namespace atoc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

enum class Scenario { Navigation, Pushball, PredatorPrey };

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

// World constants follow particle-environment conventions: damped first-order
// integrator on [-1,1]^2 with soft penalty contact forces.
struct ScenarioConfig {
  Scenario scenario = Scenario::Navigation;
  std::size_t n_agents = 0;    // predators for predator-prey
  std::size_t n_prey = 0;      // predator-prey only
  std::size_t n_landmarks = 0;
  std::size_t episode_len = 100;
  double dt = 0.1;
  double damping = 0.25;
  double agent_radius = 0.05;
  double landmark_radius = 0.05;
  double ball_radius = 0.6;    // 12x agent radius (area ratio 144)
  double agent_max_speed = 1.0;
  double prey_max_speed = 1.3;  // faster preys
  double ball_max_speed = 1.0;
  double ball_mass = 200.0;
  double bound = 1.0;
  double neighbor_radius = 1.0;  // pushball observation cutoff
  double contact_force = 100.0;
  double contact_margin = 1e-3;

  std::size_t total_agents() const { return n_agents + n_prey; }
  bool has_ball() const { return scenario == Scenario::Pushball; }
  std::size_t n_entities() const {
    return total_agents() + (has_ball() ? 1 : 0) + n_landmarks;
  }
  // Entity index layout: agents (predators then preys), then ball, landmarks.
  std::size_t ball_index() const { return total_agents(); }
  std::size_t landmark_index(std::size_t k) const {
    return total_agents() + (has_ball() ? 1 : 0) + k;
  }
  bool is_prey(std::size_t agent) const {
    return scenario == Scenario::PredatorPrey && agent >= n_agents;
  }
  double radius_of(std::size_t entity) const;
  double max_speed_of(std::size_t entity) const;
  void validate() const;
};

ScenarioConfig navigation_config(std::size_t n_agents, std::size_t n_landmarks);
ScenarioConfig pushball_config(std::size_t n_agents);
ScenarioConfig predprey_config(std::size_t n_predators, std::size_t n_prey,
                               std::size_t n_landmarks);

// Fixed per-scenario observation width:
//   navigation    own pos+vel, 3 nearest agents relpos+relvel, 4 landmarks
//                 relpos                                            -> 24
//   pushball      own pos+vel, ball relpos, 10 nearest agents within
//                 neighbor_radius relpos+relvel                     -> 46
//   predator-prey own pos+vel, 5 nearest predators + 3 nearest preys
//                 relpos+relvel, 2 nearest landmarks relpos         -> 40
std::size_t observation_dim(const ScenarioConfig& config);

struct WorldState {
  std::vector<Vec2> pos;
  std::vector<Vec2> vel;
  std::size_t t = 0;
};

struct ScenarioMetrics {
  double ball_center_dist = 0.0;       // pushball
  std::size_t predator_catches = 0;    // predator-prey, this step
};

struct StepResult {
  WorldState state;
  std::vector<double> rewards;          // one per agent
  std::vector<std::size_t> collisions;  // overlapping partners per agent
  ScenarioMetrics metrics;
};

// Entities placed uniformly without initial overlap, velocities zero.
WorldState reset(const ScenarioConfig& config, Rng& rng);

// v <- (1-damping)*v + (u + F_contact/m)*dt, speed clamp, p <- p + v*dt.
// One [-1,1]^2 action per agent; landmarks never move.
StepResult step(const WorldState& state, const std::vector<Vec2>& actions,
                const ScenarioConfig& config);

Array observe(const WorldState& state, std::size_t agent, const ScenarioConfig& config);

// All agents' observations stacked into an [n_agents, obs_dim] batch.
Array observe_all(const WorldState& state, const ScenarioConfig& config);

double reward_navigation(const WorldState& state, std::size_t agent,
                         const ScenarioConfig& config);
double reward_pushball(const WorldState& state, const ScenarioConfig& config);
double reward_predprey(const WorldState& state, std::size_t agent,
                       const ScenarioConfig& config);

// Prey boundary penalty component.
double boundary_f(double a);

// A landmark counts as occupied when some agent is within the sum of radii.
std::size_t count_occupied_landmarks(const WorldState& state, const ScenarioConfig& config);

}  // namespace atoc
