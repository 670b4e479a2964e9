#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "atoc/checkpoint.hpp"
#include "atoc/config.hpp"
#include "atoc/errors.hpp"
#include "atoc/eval.hpp"
#include "atoc/graph.hpp"
#include "atoc/log.hpp"
#include "atoc/lstm.hpp"
#include "atoc/nets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::size_t episodes = 0;
  bool has_episodes = false;
  std::string comm;
  std::string channel;
  std::string out;
};

void apply_overrides(atoc::RunConfig& rc, const Overrides& ov) {
  if (ov.has_seed) rc.train.seed = ov.seed;
  if (ov.has_episodes) rc.train.episodes = ov.episodes;
  if (!ov.comm.empty()) {
    if (ov.comm != "on" && ov.comm != "off") {
      throw atoc::ConfigError("--comm expects on or off");
    }
    rc.comm_enabled = ov.comm == "on";
  }
  if (!ov.channel.empty()) rc.kind = atoc::channel_kind_from_name(ov.channel);
  if (!ov.out.empty()) rc.out = ov.out;
  rc.validate();
}

json report_json(const atoc::EvalReport& r) {
  json j;
  j["scenario"] = atoc::scenario_name(r.scenario);
  j["episodes"] = r.episodes;
  j["mean_reward"] = r.mean_reward;
  j["collisions_per_episode"] = r.collisions_per_episode;
  j["comm_rate"] = r.comm_rate;
  if (r.scenario == atoc::Scenario::Navigation) {
    j["occupied_landmarks_pct"] = r.occupied_landmarks_pct;
  }
  if (r.scenario == atoc::Scenario::PredatorPrey) {
    j["predator_score"] = r.predator_score;
  }
  if (!std::isnan(r.normalized_reward)) j["normalized_reward"] = r.normalized_reward;
  return j;
}

void print_report(const char* tag, const atoc::EvalReport& r) {
  std::printf("%s: scenario=%s episodes=%zu mean_reward=%.6f collisions/ep=%.3f", tag,
              atoc::scenario_name(r.scenario).c_str(), r.episodes, r.mean_reward,
              r.collisions_per_episode);
  if (r.scenario == atoc::Scenario::Navigation) {
    std::printf(" occupied=%.1f%%", r.occupied_landmarks_pct);
  }
  if (r.scenario == atoc::Scenario::PredatorPrey) {
    std::printf(" predator_score=%.6f", r.predator_score);
  }
  std::printf(" comm_rate=%.4f\n", r.comm_rate);
}

int cmd_train(const std::string& config_path, const Overrides& ov, bool resume) {
  atoc::RunConfig rc = atoc::load_run_config(config_path);
  apply_overrides(rc, ov);
  fs::create_directories(rc.out);
  const fs::path final_ckpt = fs::path(rc.out) / "checkpoint_final.ckpt";
  if (resume && fs::exists(final_ckpt)) {
    atoc::Trainer t = atoc::load_checkpoint(final_ckpt.string());
    t.train.episodes = rc.train.episodes;
    if (t.episode >= t.train.episodes) {
      std::printf("nothing to resume: %zu episodes already complete\n", t.episode);
      return 0;
    }
    std::printf("resuming at episode %zu/%zu\n", t.episode, t.train.episodes);
    t.run(rc.out, rc.comm_log);
  } else {
    atoc::Trainer t(rc.scenario, rc.train, rc.comm, rc.kind, rc.comm_enabled);
    t.run(rc.out, rc.comm_log);
  }
  std::printf("training complete: %s\n", final_ckpt.string().c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, std::size_t episodes, std::uint64_t seed,
             const std::string& comm_mode, const std::string& out, bool probe_comm_off) {
  atoc::Trainer t = atoc::load_checkpoint(ckpt_path);
  atoc::EvalSinks sinks;
  if (!out.empty()) {
    fs::create_directories(out);
    sinks.trajectory_path = (fs::path(out) / "trajectory.csv").string();
    sinks.comm_path = (fs::path(out) / "comm.csv").string();
  }
  json out_json;
  if (probe_comm_off) {
    const auto [on, off] = atoc::comm_off_eval(t, episodes, seed);
    print_report("comm-on", on);
    print_report("comm-off", off);
    out_json["comm_on"] = report_json(on);
    out_json["comm_off"] = report_json(off);
  } else {
    const bool comm_on = comm_mode != "off";
    const atoc::EvalReport rep = atoc::evaluate(t, episodes, seed, comm_on, sinks);
    print_report(comm_on ? "eval" : "eval(comm-off)", rep);
    out_json = report_json(rep);
  }
  if (!out.empty()) {
    std::ofstream f(fs::path(out) / "report.json");
    f << out_json.dump(2) << "\n";
  }
  return 0;
}

int cmd_crossplay(const std::vector<std::string>& ckpts, std::size_t episodes,
                  std::uint64_t seed, const std::string& out) {
  std::vector<atoc::Trainer> loaded;
  loaded.reserve(ckpts.size());
  for (const std::string& p : ckpts) loaded.push_back(atoc::load_checkpoint(p));
  std::vector<atoc::Trainer*> entrants;
  for (atoc::Trainer& t : loaded) entrants.push_back(&t);
  const atoc::CrossplayResult res = atoc::crossplay_tournament(entrants, episodes, seed);
  std::printf("predator\\prey raw (normalized)\n");
  for (std::size_t i = 0; i < res.entrants; ++i) {
    for (std::size_t j = 0; j < res.entrants; ++j) {
      std::printf("  [%zu vs %zu] %.6f (%.4f)\n", i, j, res.raw[i * res.entrants + j],
                  res.normalized[i * res.entrants + j]);
    }
  }
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream f(fs::path(out) / "crossplay.csv");
    f << "predator,prey,predator_ckpt,prey_ckpt,raw_score,normalized_score\n";
    for (std::size_t i = 0; i < res.entrants; ++i) {
      for (std::size_t j = 0; j < res.entrants; ++j) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", res.raw[i * res.entrants + j],
                      res.normalized[i * res.entrants + j]);
        f << i << ',' << j << ',' << ckpts[i] << ',' << ckpts[j] << ',' << buf << "\n";
      }
    }
  }
  return 0;
}

// --- selftest -------------------------------------------------------------
// Quick health suite: finite-difference gradient spot checks on every
// network, protocol invariants on random worlds, physics fixed points, and a
// checkpoint round trip. The full frozen-oracle suites live under tests/.

bool report_check(const char* name, bool ok) {
  std::printf("%-44s %s\n", name, ok ? "ok" : "FAIL");
  return ok;
}

double rel_err(double got, double want) {
  const double denom = std::max({std::fabs(got), std::fabs(want), 1e-8});
  return std::fabs(got - want) / denom;
}

// Central finite difference of `loss` along one parameter entry.
template <typename LossFn>
double fd_slope(atoc::ParameterSet& ps, const std::string& name, std::size_t idx,
                LossFn loss) {
  const double eps = 1e-5;
  double& p = ps.value(name).v[idx];
  const double saved = p;
  p = saved + eps;
  const double up = loss();
  p = saved - eps;
  const double down = loss();
  p = saved;
  return (up - down) / (2.0 * eps);
}

template <typename BuildFn>
bool grad_matches(atoc::ParameterSet& ps, BuildFn build, atoc::Rng& rng,
                  std::size_t probes) {
  atoc::Graph g;
  const int loss = build(g);
  g.backward(loss);
  const auto grads = g.param_grads(ps);
  for (std::size_t k = 0; k < probes; ++k) {
    // Uniform probe over entries of a uniformly chosen tensor.
    std::size_t which = rng.index(grads.size());
    auto it = grads.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(which));
    const std::string name = it->first;
    const std::size_t idx = rng.index(it->second.v.size());
    const double analytic = it->second.v[idx];
    const double numeric = fd_slope(ps, name, idx, [&] {
      atoc::Graph h;
      return h.value(build(h)).v[0];
    });
    if (rel_err(analytic, numeric) > 1e-4 && std::fabs(analytic - numeric) > 1e-7) {
      std::printf("  grad mismatch %s[%zu]: analytic %.8g numeric %.8g\n", name.c_str(),
                  idx, analytic, numeric);
      return false;
    }
  }
  return true;
}

bool selftest_gradients() {
  atoc::Rng rng(11);
  const std::size_t obs_dim = 10;
  atoc::Rng a_rng = rng.split("actor");
  atoc::Rng c_rng = rng.split("critic");
  atoc::Rng f_rng = rng.split("clf");
  atoc::Rng ch_rng = rng.split("channel");
  atoc::ActorNet actor = atoc::make_actor(obs_dim, a_rng);
  atoc::CriticNet critic = atoc::make_critic(obs_dim, atoc::kActionDim, c_rng);
  atoc::AttentionClassifier clf = atoc::make_classifier(f_rng);
  atoc::CommChannel channel = atoc::make_channel(ch_rng);

  atoc::Rng data = rng.split("data");
  atoc::Array obs({4, obs_dim});
  for (double& x : obs.v) x = data.normal();
  atoc::Array act({4, atoc::kActionDim});
  for (double& x : act.v) x = data.uniform(-1.0, 1.0);
  atoc::Array h({4, atoc::kThoughtDim});
  for (double& x : h.v) x = data.normal() * 0.3;

  bool ok = true;
  atoc::Rng probe = rng.split("probe");
  ok &= grad_matches(
      actor.params,
      [&](atoc::Graph& g) {
        const int o = g.constant(obs);
        const int th = atoc::actor_thought(g, actor, o, atoc::BnMode::Infer);
        const int zero = g.constant(atoc::Array({4, atoc::kThoughtDim}));
        return g.reduce_mean(atoc::actor_action(g, actor, th, zero));
      },
      probe, 8);
  ok &= grad_matches(
      critic.params,
      [&](atoc::Graph& g) {
        const int q = atoc::critic_q(g, critic, g.constant(obs), g.constant(act),
                                     atoc::BnMode::Infer);
        return g.reduce_mean(g.mul(q, q));
      },
      probe, 8);
  ok &= grad_matches(
      clf.params,
      [&](atoc::Graph& g) {
        return g.reduce_mean(atoc::classifier_prob(g, clf, g.constant(h)));
      },
      probe, 8);
  ok &= grad_matches(
      channel.params,
      [&](atoc::Graph& g) {
        const atoc::WavePlan plan = atoc::plan_channel_waves({{0, 2, 3}, {1}});
        const int integ = atoc::lstm_channel_pass(g, channel.params, g.constant(h), plan);
        return g.reduce_mean(integ);
      },
      probe, 8);
  return ok;
}

bool selftest_protocol() {
  atoc::Rng rng(23);
  const atoc::ScenarioConfig sc = atoc::navigation_config(8, 8);
  atoc::CommConfig cc;
  for (int trial = 0; trial < 200; ++trial) {
    atoc::WorldState w = atoc::reset(sc, rng);
    std::vector<double> probs(8);
    for (double& p : probs) p = rng.uniform();
    const auto initiators = atoc::decide_initiators(probs, cc, 0, false, rng);
    const atoc::GroupSet gs = atoc::form_groups(initiators, w, cc, 0, 8, 0);
    for (const atoc::Group& g : gs.groups) {
      if (g.members.size() > cc.m + 1) return false;
      if (g.members.empty() || g.members.front() != g.initiator) return false;
      for (std::size_t m : g.members) {
        if (m != g.initiator &&
            (w.pos[m] - w.pos[g.initiator]).norm() > cc.radius) {
          return false;
        }
      }
    }
    const atoc::CommMatrix cm = atoc::comm_matrix(gs, 8);
    std::vector<std::vector<std::size_t>> orders;
    for (const atoc::Group& g : gs.groups) orders.push_back(g.members);
    const atoc::GroupSet back = atoc::reconstruct_groups(cm, orders, 0);
    if (back.groups.size() != gs.groups.size()) return false;
  }
  return true;
}

bool selftest_physics() {
  const atoc::ScenarioConfig sc = atoc::navigation_config(3, 3);
  atoc::Rng rng(5);
  atoc::WorldState w = atoc::reset(sc, rng);
  // Zero actions, zero velocities, no contacts: a fixed point.
  const atoc::StepResult r = atoc::step(w, {{0, 0}, {0, 0}, {0, 0}}, sc);
  for (std::size_t i = 0; i < sc.n_entities(); ++i) {
    if ((r.state.pos[i] - w.pos[i]).norm() != 0.0) return false;
  }
  return true;
}

bool selftest_checkpoint() {
  const atoc::ScenarioConfig sc = atoc::navigation_config(3, 3);
  atoc::TrainConfig tc;
  tc.minibatch = 4;
  tc.warmup_episodes = 0;
  tc.episodes = 2;
  tc.buffer_capacity = 64;
  tc.seed = 99;
  atoc::CommConfig cc;
  cc.T = 5;
  atoc::Trainer t(sc, tc, cc, atoc::ChannelKind::Lstm, true);
  atoc::ScenarioConfig small = sc;
  small.episode_len = 10;
  t.scenario = small;
  t.run_episode();
  const std::string path = (fs::temp_directory_path() / "atoc_selftest.ckpt").string();
  atoc::save_checkpoint(path, t);
  atoc::Trainer back = atoc::load_checkpoint(path);
  const auto s1 = t.run_episode();
  const auto s2 = back.run_episode();
  fs::remove(path);
  return s1.mean_reward == s2.mean_reward && s1.critic_loss == s2.critic_loss;
}

int cmd_selftest() {
  bool ok = true;
  ok &= report_check("gradient spot checks (all four networks)", selftest_gradients());
  ok &= report_check("protocol invariants (200 random worlds)", selftest_protocol());
  ok &= report_check("physics fixed point", selftest_physics());
  ok &= report_check("checkpoint round trip + resumed episode", selftest_checkpoint());
  std::printf("selftest: %s\n", ok ? "all checks passed" : "FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attentional-communication multi-agent RL"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  bool resume = false;

  CLI::App* train = app.add_subcommand("train", "train policies from a config file");
  train->add_option("--config", config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--seed", ov.seed, "override rng seed");
  train->add_option("--episodes", ov.episodes, "override episode count");
  train->add_option("--comm", ov.comm, "override communication: on|off");
  train->add_option("--channel", ov.channel, "override channel: lstm|mean|none");
  train->add_option("--out", ov.out, "override output directory");
  train->add_flag("--resume", resume, "continue from out/checkpoint_final.ckpt");

  std::string ckpt_path;
  std::size_t eval_episodes = 30;
  std::uint64_t eval_seed = 7;
  std::string eval_comm = "on";
  std::string eval_out;
  bool probe_comm_off = false;
  CLI::App* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes (default 30)");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--comm", eval_comm, "communication during eval: on|off");
  eval->add_option("--out", eval_out, "directory for report.json + csv logs");
  eval->add_flag("--probe-comm-off", probe_comm_off,
                 "paired comm-on vs comm-off reports, same seeds");

  std::vector<std::string> cross_ckpts;
  std::size_t cross_episodes = 30;
  std::uint64_t cross_seed = 7;
  std::string cross_out;
  CLI::App* cross = app.add_subcommand("crossplay", "predator-prey tournament");
  cross->add_option("--ckpt", cross_ckpts, "entrant checkpoints")->required();
  cross->add_option("--episodes", cross_episodes, "episodes per matchup");
  cross->add_option("--seed", cross_seed, "tournament seed");
  cross->add_option("--out", cross_out, "directory for crossplay.csv");

  app.add_subcommand("selftest", "gradient checks + invariant suite");

  CLI11_PARSE(app, argc, argv);
  ov.has_seed = train->count("--seed") > 0;
  ov.has_episodes = train->count("--episodes") > 0;

  try {
    if (app.got_subcommand("train")) return cmd_train(config_path, ov, resume);
    if (app.got_subcommand("eval")) {
      return cmd_eval(ckpt_path, eval_episodes, eval_seed, eval_comm, eval_out,
                      probe_comm_off);
    }
    if (app.got_subcommand("crossplay")) {
      return cmd_crossplay(cross_ckpts, cross_episodes, cross_seed, cross_out);
    }
    if (app.got_subcommand("selftest")) return cmd_selftest();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
