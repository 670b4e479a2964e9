#include "atoc/nets.hpp"

#include <map>

#include "atoc/errors.hpp"
#include "atoc/lstm.hpp"

namespace atoc {

namespace {

void add_linear(ParameterSet& ps, const std::string& stem, std::size_t in, std::size_t out,
                Rng& rng) {
  ps.add(stem + "_w", random_normal_init({in, out}, kInitStddev, rng));
  ps.add(stem + "_b", Array({1, out}));
}

void add_bn(ParameterSet& ps, const std::string& stem, std::size_t d) {
  ps.add(stem + "_gamma", Array::full({1, d}, 1.0));
  ps.add(stem + "_beta", Array({1, d}));
}

// Frozen leaves enter the graph as constants: the forward value is
// identical, but backward skips their weight-gradient work entirely.
int leaf(Graph& g, ParameterSet& ps, const std::string& name, bool frozen) {
  return frozen ? g.constant(ps.get(name)) : g.param(ps, name);
}

int linear(Graph& g, ParameterSet& ps, const std::string& stem, int x, bool frozen = false) {
  return g.add(g.matmul(x, leaf(g, ps, stem + "_w", frozen)),
               leaf(g, ps, stem + "_b", frozen));
}

int batch_norm(Graph& g, ParameterSet& ps, const std::string& stem, int x, BnMode mode,
               BnStats& stats, BnFolds* folds, bool frozen = false) {
  const int gamma = leaf(g, ps, stem + "_gamma", frozen);
  const int beta = leaf(g, ps, stem + "_beta", frozen);
  // Train mode needs at least two rows for batch statistics; a slimmer batch
  // falls back to the running statistics.
  if (mode == BnMode::Train && g.value(x).rows() >= 2) {
    const int out = g.bn_train(x, gamma, beta);
    if (folds != nullptr) folds->push_back({&stats, out});
    return out;
  }
  return g.bn_infer(x, gamma, beta, stats.mean, stats.var);
}

}  // namespace

ActorNet make_actor(std::size_t obs_dim, Rng& rng) {
  if (obs_dim == 0) throw ConfigError("actor observation dimension must be positive");
  ActorNet net;
  net.obs_dim = obs_dim;
  net.params = ParameterSet(rng.seed());
  add_linear(net.params, "fc1", obs_dim, 256, rng);
  add_bn(net.params, "bn1", 256);
  add_linear(net.params, "fc2", 256, kThoughtDim, rng);
  add_linear(net.params, "fc3", 2 * kThoughtDim, 128, rng);
  add_linear(net.params, "fc4", 128, 64, rng);
  add_linear(net.params, "fc5", 64, kActionDim, rng);
  net.bn1 = BnStats(256);
  return net;
}

CriticNet make_critic(std::size_t obs_dim, std::size_t act_dim, Rng& rng) {
  if (obs_dim == 0 || act_dim == 0) {
    throw ConfigError("critic input dimensions must be positive");
  }
  CriticNet net;
  net.obs_dim = obs_dim;
  net.act_dim = act_dim;
  net.params = ParameterSet(rng.seed());
  add_linear(net.params, "fc1", obs_dim + act_dim, 512, rng);
  add_bn(net.params, "bn1", 512);
  add_linear(net.params, "fc2", 512, 256, rng);
  add_bn(net.params, "bn2", 256);
  add_linear(net.params, "fc3", 256, 1, rng);
  net.bn1 = BnStats(512);
  net.bn2 = BnStats(256);
  return net;
}

AttentionClassifier make_classifier(Rng& rng) {
  AttentionClassifier net;
  net.params = ParameterSet(rng.seed());
  add_linear(net.params, "fc1", kThoughtDim, 64, rng);
  add_linear(net.params, "fc2", 64, 1, rng);
  return net;
}

CommChannel make_channel(Rng& rng) {
  CommChannel net;
  net.params = ParameterSet(rng.seed());
  net.params.add(kChannelWFwd,
                 random_normal_init({2 * kThoughtDim, 4 * kThoughtDim}, kInitStddev, rng));
  net.params.add(kChannelBFwd, Array({1, 4 * kThoughtDim}));
  net.params.add(kChannelWBwd,
                 random_normal_init({2 * kThoughtDim, 4 * kThoughtDim}, kInitStddev, rng));
  net.params.add(kChannelBBwd, Array({1, 4 * kThoughtDim}));
  return net;
}

void apply_bn_folds(const Graph& g, const BnFolds& folds, double momentum) {
  if (folds.empty()) return;
  std::map<int, std::pair<const Array*, const Array*>> stats;
  const auto recorded = g.bn_batch_stats();
  for (const auto& s : recorded) stats[s.node] = {&s.mean, &s.var};
  for (const BnFold& f : folds) {
    auto it = stats.find(f.node);
    if (it == stats.end()) {
      throw ShapeError("bn fold references a node without batch statistics");
    }
    Array& m = f.stats->mean;
    Array& v = f.stats->var;
    for (std::size_t i = 0; i < m.numel(); ++i) {
      m.v[i] = (1.0 - momentum) * m.v[i] + momentum * it->second.first->v[i];
      v.v[i] = (1.0 - momentum) * v.v[i] + momentum * it->second.second->v[i];
    }
  }
}

int actor_thought(Graph& g, ActorNet& net, int obs, BnMode mode, BnFolds* folds) {
  if (g.value(obs).cols() != net.obs_dim) {
    throw ShapeError("observation width " + std::to_string(g.value(obs).cols()) +
                     " does not match actor input " + std::to_string(net.obs_dim));
  }
  int x = linear(g, net.params, "fc1", obs);
  x = batch_norm(g, net.params, "bn1", x, mode, net.bn1, folds);
  x = g.relu(x);
  x = g.relu(linear(g, net.params, "fc2", x));
  return x;
}

int actor_action(Graph& g, ActorNet& net, int h, int h_tilde) {
  if (g.value(h).cols() != kThoughtDim || g.value(h_tilde).cols() != kThoughtDim) {
    throw ShapeError("actor stage two expects two 128-wide inputs");
  }
  int x = g.concat_cols({h, h_tilde});
  x = g.relu(linear(g, net.params, "fc3", x));
  x = g.relu(linear(g, net.params, "fc4", x));
  return g.tanh_(linear(g, net.params, "fc5", x));
}

int critic_q(Graph& g, CriticNet& net, int obs, int act, BnMode mode, BnFolds* folds,
             bool frozen) {
  if (g.value(obs).cols() != net.obs_dim || g.value(act).cols() != net.act_dim) {
    throw ShapeError("critic inputs " + g.value(obs).shape_str() + " + " +
                     g.value(act).shape_str() + " do not match (" +
                     std::to_string(net.obs_dim) + ", " + std::to_string(net.act_dim) + ")");
  }
  int x = g.concat_cols({obs, act});
  x = linear(g, net.params, "fc1", x, frozen);
  x = batch_norm(g, net.params, "bn1", x, mode, net.bn1, folds, frozen);
  x = g.relu(x);
  x = linear(g, net.params, "fc2", x, frozen);
  x = batch_norm(g, net.params, "bn2", x, mode, net.bn2, folds, frozen);
  x = g.relu(x);
  return linear(g, net.params, "fc3", x, frozen);
}

int classifier_prob(Graph& g, AttentionClassifier& net, int h) {
  if (g.value(h).cols() != kThoughtDim) {
    throw ShapeError("classifier expects 128-dim thoughts, got " + g.value(h).shape_str());
  }
  int x = g.relu(linear(g, net.params, "fc1", h));
  return g.sigmoid(linear(g, net.params, "fc2", x));
}

Array thought_forward(ActorNet& net, const Array& obs_batch) {
  Graph g;
  return g.value(actor_thought(g, net, g.constant(obs_batch), BnMode::Infer));
}

Array act_forward(ActorNet& net, const Array& h_batch, const Array& h_tilde_batch) {
  Graph g;
  return g.value(actor_action(g, net, g.constant(h_batch), g.constant(h_tilde_batch)));
}

Array critic_forward(CriticNet& net, const Array& obs_batch, const Array& act_batch) {
  Graph g;
  return g.value(
      critic_q(g, net, g.constant(obs_batch), g.constant(act_batch), BnMode::Infer));
}

Array attention_prob(AttentionClassifier& net, const Array& h_batch) {
  Graph g;
  return g.value(classifier_prob(g, net, g.constant(h_batch)));
}

void soft_update_params(ParameterSet& target, const ParameterSet& source, double tau) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("soft update requires tau in [0,1]");
  if (target.size() != source.size()) {
    throw ShapeError("soft update across parameter sets of different layout");
  }
  for (auto& [name, t] : target) {
    const Array& s = source.get(name);
    if (!t.same_shape(s)) {
      throw ShapeError("soft update shape mismatch for '" + name + "'");
    }
    for (std::size_t i = 0; i < t.numel(); ++i) {
      t.v[i] = tau * s.v[i] + (1.0 - tau) * t.v[i];
    }
  }
}

void soft_update_stats(BnStats& target, const BnStats& source, double tau) {
  if (!target.mean.same_shape(source.mean) || !target.var.same_shape(source.var)) {
    throw ShapeError("soft update across batch-norm stats of different width");
  }
  for (std::size_t i = 0; i < target.mean.numel(); ++i) {
    target.mean.v[i] = tau * source.mean.v[i] + (1.0 - tau) * target.mean.v[i];
    target.var.v[i] = tau * source.var.v[i] + (1.0 - tau) * target.var.v[i];
  }
}

void soft_update(ActorNet& target, const ActorNet& source, double tau) {
  soft_update_params(target.params, source.params, tau);
  soft_update_stats(target.bn1, source.bn1, tau);
}

void soft_update(CriticNet& target, const CriticNet& source, double tau) {
  soft_update_params(target.params, source.params, tau);
  soft_update_stats(target.bn1, source.bn1, tau);
  soft_update_stats(target.bn2, source.bn2, tau);
}

void soft_update(CommChannel& target, const CommChannel& source, double tau) {
  soft_update_params(target.params, source.params, tau);
}

}  // namespace atoc
