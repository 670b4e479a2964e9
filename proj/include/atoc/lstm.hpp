#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "atoc/array.hpp"
#include "atoc/graph.hpp"
#include "atoc/params.hpp"

namespace atoc {

// One LSTM cell step. x [n,in], h/c [n,hid], w [in+hid, 4*hid], b [1, 4*hid].
// Gate order along the fused projection: input, forget, candidate, output.
// Returns (h_next, c_next).
std::pair<int, int> lstm_cell(Graph& g, int x, int h, int c, int w, int b);

// Channel parameter names inside a CommChannel ParameterSet.
inline constexpr const char* kChannelWFwd = "w_fwd";
inline constexpr const char* kChannelBFwd = "b_fwd";
inline constexpr const char* kChannelWBwd = "w_bwd";
inline constexpr const char* kChannelBBwd = "b_bwd";

// Group passes over a shared thought matrix preserve sequential semantics:
// a group reads each member's current row, so a member already rewritten by
// an earlier group relays its integrated thought into later groups. Groups
// are partitioned into waves such that same-wave groups share no rows; a
// group lands one wave after the latest earlier group it overlaps. Each wave
// then runs as one batched bidirectional pass (groups sorted by length
// descending, so the active set at every timestep is a prefix).
struct WavePlan {
  struct Wave {
    std::vector<std::vector<std::size_t>> groups;  // ordered member rows, length desc
  };
  std::vector<Wave> waves;
  std::vector<std::size_t> member_rows;  // union of all group rows, ascending
};

// `ordered_groups` lists each group's member rows in channel order, groups in
// formation order. Rows must be unique within a group.
WavePlan plan_channel_waves(const std::vector<std::vector<std::size_t>>& ordered_groups);

// Bidirectional LSTM pass over every group in the plan. `thoughts` is an
// [R,128] node; the result node has group-member rows replaced by the sum of
// the two directions' per-position hidden states, other rows untouched.
int lstm_channel_pass(Graph& g, ParameterSet& channel, int thoughts, const WavePlan& plan);

// Ablation channel: every member of a group receives the arithmetic mean of
// the group's current thoughts. Same relay semantics, no parameters.
int mean_channel_pass(Graph& g, int thoughts, const WavePlan& plan);

// Forward-only convenience: integrate one ordered sequence (a single group),
// returning the [len,128] integrated matrix.
Array bilstm_sequence(ParameterSet& channel, const Array& thoughts);

}  // namespace atoc
