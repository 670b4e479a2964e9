#pragma once

#include <cstddef>
#include <vector>

#include "atoc/array.hpp"
#include "atoc/graph.hpp"
#include "atoc/params.hpp"
#include "atoc/rng.hpp"

namespace atoc {

inline constexpr std::size_t kThoughtDim = 128;
inline constexpr std::size_t kActionDim = 2;
inline constexpr double kInitStddev = 0.1;
inline constexpr double kBnMomentum = 0.1;

enum class BnMode { Train, Infer };

// Running batch-norm statistics for one normalized layer.
struct BnStats {
  Array mean;  // [1,d]
  Array var;   // [1,d]
  explicit BnStats(std::size_t d = 1)
      : mean(Array({1, d})), var(Array::full({1, d}, 1.0)) {}
};

// Shared two-stage policy. Stage one maps an observation to the 128-dim
// thought; stage two maps (thought, integrated thought) to a tanh action.
// Hidden widths 256, 128 (the thought), 128, 64; batch norm on the first
// hidden layer only.
struct ActorNet {
  ParameterSet params;
  BnStats bn1;
  std::size_t obs_dim = 0;
};

// Q(o, a) with hidden widths 512 and 256, batch norm on both hidden layers.
struct CriticNet {
  ParameterSet params;
  BnStats bn1;
  BnStats bn2;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
};

// Attention gate: thought -> hidden 64 -> sigmoid probability.
struct AttentionClassifier {
  ParameterSet params;
};

// Bidirectional LSTM channel, 128-dim input and hidden per direction.
struct CommChannel {
  ParameterSet params;
};

ActorNet make_actor(std::size_t obs_dim, Rng& rng);
CriticNet make_critic(std::size_t obs_dim, std::size_t act_dim, Rng& rng);
AttentionClassifier make_classifier(Rng& rng);
CommChannel make_channel(Rng& rng);

// Pending running-stat updates: each entry ties a bn_train node in a graph to
// the BnStats it feeds. Fold after the optimizer step that consumed the graph.
struct BnFold {
  BnStats* stats;
  int node;
};
using BnFolds = std::vector<BnFold>;

void apply_bn_folds(const Graph& g, const BnFolds& folds, double momentum = kBnMomentum);

// Graph emitters. `obs`/`h`/`h_tilde`/`act` are node ids; the return value is
// the output node id. Train-mode emitters append to `folds` when given.
int actor_thought(Graph& g, ActorNet& net, int obs, BnMode mode, BnFolds* folds = nullptr);
int actor_action(Graph& g, ActorNet& net, int h, int h_tilde);
int critic_q(Graph& g, CriticNet& net, int obs, int act, BnMode mode,
             BnFolds* folds = nullptr, bool frozen = false);
int classifier_prob(Graph& g, AttentionClassifier& net, int h);

// Convenience single-batch forwards (inference mode).
Array thought_forward(ActorNet& net, const Array& obs_batch);
Array act_forward(ActorNet& net, const Array& h_batch, const Array& h_tilde_batch);
Array critic_forward(CriticNet& net, const Array& obs_batch, const Array& act_batch);
Array attention_prob(AttentionClassifier& net, const Array& h_batch);

// theta' <- tau * theta + (1 - tau) * theta', including running statistics.
void soft_update_params(ParameterSet& target, const ParameterSet& source, double tau);
void soft_update_stats(BnStats& target, const BnStats& source, double tau);
void soft_update(ActorNet& target, const ActorNet& source, double tau);
void soft_update(CriticNet& target, const CriticNet& source, double tau);
void soft_update(CommChannel& target, const CommChannel& source, double tau);

}  // namespace atoc
