#pragma once

#include "sgnet/data.hpp"
#include "sgnet/random.hpp"

namespace sgnet {

enum class SynthKind { ConstantVelocity, PiecewiseGoal, Circular };

struct SynthConfig {
  SynthKind kind = SynthKind::ConstantVelocity;
  std::size_t tracks = 10;
  std::size_t len = 30;
  std::uint64_t seed = 1;
  double sigma = 0.0;       // Gaussian position noise
  std::size_t goal_every = 6;  // piecewise-goal resample period G
  double speed = 1.0;
  double fps = 2.5;
};

SynthKind synth_kind_from_string(const std::string& s);

// Deterministic in (cfg.seed, cfg); noise is drawn after path construction.
std::vector<AgentTrack> synth_generate(const SynthConfig& cfg);

}  // namespace sgnet
