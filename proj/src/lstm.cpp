#include "atoc/lstm.hpp"

#include <algorithm>
#include <set>

#include "atoc/errors.hpp"

namespace atoc {

std::pair<int, int> lstm_cell(Graph& g, int x, int h, int c, int w, int b) {
  const std::size_t hid = g.value(h).cols();
  const std::size_t in = g.value(x).cols();
  if (g.value(w).rows() != in + hid || g.value(w).cols() != 4 * hid) {
    throw ShapeError("lstm weight " + g.value(w).shape_str() + " does not fit input " +
                     std::to_string(in) + " + hidden " + std::to_string(hid));
  }
  const int z = g.concat_cols({x, h});
  const int pre = g.add(g.matmul(z, w), b);
  const int gi = g.sigmoid(g.slice_cols(pre, 0, hid));
  const int gf = g.sigmoid(g.slice_cols(pre, hid, hid));
  const int gc = g.tanh_(g.slice_cols(pre, 2 * hid, hid));
  const int go = g.sigmoid(g.slice_cols(pre, 3 * hid, hid));
  const int c_next = g.add(g.mul(gf, c), g.mul(gi, gc));
  const int h_next = g.mul(go, g.tanh_(c_next));
  return {h_next, c_next};
}

WavePlan plan_channel_waves(const std::vector<std::vector<std::size_t>>& ordered_groups) {
  WavePlan plan;
  std::set<std::size_t> all_rows;
  std::vector<std::size_t> layer_of(ordered_groups.size());
  std::size_t n_layers = 0;
  for (std::size_t gi = 0; gi < ordered_groups.size(); ++gi) {
    const auto& grp = ordered_groups[gi];
    if (grp.empty()) throw ShapeError("channel group with no members");
    std::set<std::size_t> mine(grp.begin(), grp.end());
    if (mine.size() != grp.size()) {
      throw ShapeError("channel group repeats a member row");
    }
    std::size_t layer = 0;
    for (std::size_t gj = 0; gj < gi; ++gj) {
      const bool overlap = std::any_of(ordered_groups[gj].begin(), ordered_groups[gj].end(),
                                       [&](std::size_t r) { return mine.count(r) != 0; });
      if (overlap) layer = std::max(layer, layer_of[gj] + 1);
    }
    layer_of[gi] = layer;
    n_layers = std::max(n_layers, layer + 1);
    all_rows.insert(grp.begin(), grp.end());
  }
  plan.waves.resize(n_layers);
  for (std::size_t gi = 0; gi < ordered_groups.size(); ++gi) {
    plan.waves[layer_of[gi]].groups.push_back(ordered_groups[gi]);
  }
  for (auto& wave : plan.waves) {
    std::stable_sort(wave.groups.begin(), wave.groups.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
  }
  plan.member_rows.assign(all_rows.begin(), all_rows.end());
  return plan;
}

namespace {

// One batched direction over a wave. step_rows(k, t) gives the snapshot row
// group k reads at timestep t; groups are length-sorted so actives prefix.
template <typename StepRows>
std::vector<int> run_direction(Graph& g, int thoughts, const WavePlan::Wave& wave, int w,
                               int b, StepRows step_rows) {
  const std::size_t max_len = wave.groups.front().size();
  const std::size_t hid = g.value(w).cols() / 4;
  auto active_at = [&](std::size_t t) {
    std::size_t n = 0;
    while (n < wave.groups.size() && wave.groups[n].size() > t) ++n;
    return n;
  };
  std::vector<int> outs;
  int h = -1, c = -1;
  std::size_t prev_active = 0;
  for (std::size_t t = 0; t < max_len; ++t) {
    const std::size_t na = active_at(t);
    if (t == 0) {
      h = g.constant(Array({na, hid}));
      c = g.constant(Array({na, hid}));
    } else if (na < prev_active) {
      h = g.slice_rows(h, 0, na);
      c = g.slice_rows(c, 0, na);
    }
    prev_active = na;
    std::vector<std::size_t> idx(na);
    for (std::size_t k = 0; k < na; ++k) idx[k] = step_rows(k, t);
    const int x = g.gather_rows(thoughts, idx);
    std::tie(h, c) = lstm_cell(g, x, h, c, w, b);
    outs.push_back(h);
  }
  return outs;
}

}  // namespace

int lstm_channel_pass(Graph& g, ParameterSet& channel, int thoughts, const WavePlan& plan) {
  const int wf = g.param(channel, kChannelWFwd);
  const int bf = g.param(channel, kChannelBFwd);
  const int wb = g.param(channel, kChannelWBwd);
  const int bb = g.param(channel, kChannelBBwd);
  int snap = thoughts;
  for (const auto& wave : plan.waves) {
    if (wave.groups.empty()) continue;
    const auto fwd = run_direction(g, snap, wave, wf, bf, [&](std::size_t k, std::size_t t) {
      return wave.groups[k][t];
    });
    const auto bwd = run_direction(g, snap, wave, wb, bb, [&](std::size_t k, std::size_t t) {
      return wave.groups[k][wave.groups[k].size() - 1 - t];
    });
    const int f_all = g.concat_rows(fwd);
    const int b_all = g.concat_rows(bwd);
    // Row of group k's step-t output inside the concatenated direction matrix.
    const std::size_t max_len = wave.groups.front().size();
    std::vector<std::size_t> offset(max_len + 1, 0);
    for (std::size_t t = 0; t < max_len; ++t) {
      std::size_t na = 0;
      while (na < wave.groups.size() && wave.groups[na].size() > t) ++na;
      offset[t + 1] = offset[t] + na;
    }
    std::vector<std::size_t> fidx, bidx, target;
    for (std::size_t k = 0; k < wave.groups.size(); ++k) {
      const std::size_t len = wave.groups[k].size();
      for (std::size_t p = 0; p < len; ++p) {
        fidx.push_back(offset[p] + k);
        bidx.push_back(offset[len - 1 - p] + k);
        target.push_back(wave.groups[k][p]);
      }
    }
    const int merged = g.add(g.gather_rows(f_all, fidx), g.gather_rows(b_all, bidx));
    snap = g.scatter_rows(snap, merged, target);
  }
  return snap;
}

int mean_channel_pass(Graph& g, int thoughts, const WavePlan& plan) {
  int snap = thoughts;
  for (const auto& wave : plan.waves) {
    std::vector<int> parts;
    std::vector<std::size_t> target;
    for (const auto& grp : wave.groups) {
      const std::size_t k = grp.size();
      const int rows = g.gather_rows(snap, grp);
      const int mean = g.matmul(g.constant(Array::full({1, k}, 1.0 / static_cast<double>(k))),
                                rows);
      parts.push_back(g.matmul(g.constant(Array::full({k, 1}, 1.0)), mean));
      target.insert(target.end(), grp.begin(), grp.end());
    }
    if (parts.empty()) continue;
    snap = g.scatter_rows(snap, g.concat_rows(parts), target);
  }
  return snap;
}

Array bilstm_sequence(ParameterSet& channel, const Array& thoughts) {
  if (thoughts.rank() != 2 || thoughts.rows() == 0) {
    throw ShapeError("bilstm_sequence expects a non-empty [len, dim] matrix");
  }
  Graph g;
  const int in = g.constant(thoughts);
  std::vector<std::size_t> rows(thoughts.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const WavePlan plan = plan_channel_waves({rows});
  const int out = lstm_channel_pass(g, channel, in, plan);
  return g.value(out);
}

}  // namespace atoc
