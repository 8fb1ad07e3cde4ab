#pragma once

#include <string>
#include <vector>

#include "sgnet/tensor.hpp"

namespace sgnet {

// Named handle to a trainable leaf. Registries keep declaration order so
// optimizer sweeps and checkpoints are reproducible.
template <typename S>
struct NamedTensor {
  std::string name;
  Tensor<S> tensor;
};

template <typename S>
using ParamList = std::vector<NamedTensor<S>>;

template <typename S>
inline void zero_grads(ParamList<S>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace sgnet
