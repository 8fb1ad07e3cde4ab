#pragma once

#include <string>

#include "sgnet/params.hpp"
#include "sgnet/tensor.hpp"

namespace sgnet {

// Gated recurrent cell parameters: update gate z, reset gate r, candidate c.
// Input-to-hidden matrices are [D x H], hidden-to-hidden [H x H], biases [H].
template <typename S>
struct GruParams {
  Tensor<S> w_xz, w_hz, b_z;
  Tensor<S> w_xr, w_hr, b_r;
  Tensor<S> w_xc, w_hc, b_c;

  static GruParams init(std::size_t in_dim, std::size_t hidden, RandomStream& rng);
  void collect(const std::string& prefix, ParamList<S>& out) const;
  std::size_t in_dim() const { return w_xz.shape()[0]; }
  std::size_t hidden() const { return w_xz.shape()[1]; }
};

// One step: h' = (1 - z) * h + z * tanh(candidate(x, r * h)).
template <typename S>
Tensor<S> gru_cell(const Tensor<S>& x, const Tensor<S>& h, const GruParams<S>& p);

}  // namespace sgnet
