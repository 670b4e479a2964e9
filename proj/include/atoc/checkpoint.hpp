#pragma once

#include <string>

#include "atoc/training.hpp"

namespace atoc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Single-file archive: 8-byte magic, format version, a JSON header carrying
// configs, counters, rng states and block layout, then raw little-endian
// float64 blocks for every parameter, statistic, optimizer moment, and
// (optionally) the replay buffer. Round trips are bit-exact; a loaded
// trainer resumes the interrupted run identically.
void save_checkpoint(const std::string& path, const Trainer& trainer);
Trainer load_checkpoint(const std::string& path);

}  // namespace atoc
