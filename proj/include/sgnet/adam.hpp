#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgnet/params.hpp"

namespace sgnet {

// Adam with bias correction. Moments are keyed by parameter name so state
// survives checkpointing and parameter re-registration.
template <typename S>
struct AdamState {
  struct Moments {
    std::vector<S> m, v;
  };

  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Moments> moments;
};

// One update over every parameter, reading grads accumulated on the leaves.
// A parameter whose grad was never touched counts as zero gradient.
template <typename S>
void adam_update(ParamList<S>& params, AdamState<S>& state);

}  // namespace sgnet
