#pragma once

#include <cstddef>
#include <vector>

#include "sgnet/tensor.hpp"

namespace sgnet {

// Per-window loss components, as plain numbers for logging.
struct LossBreakdown {
  double bom_rmse = 0.0;
  double goal_rmse = 0.0;
  double kld = 0.0;
  double total = 0.0;
};

template <typename S>
struct BomResult {
  Tensor<S> loss;
  std::size_t best_index = 0;
};

template <typename S>
struct LossResult {
  Tensor<S> loss;  // scalar, differentiable
  LossBreakdown parts;
  std::size_t best_index = 0;
};

// Root of the mean squared residual over all steps and coordinates. The root
// is applied per trajectory; batch averaging happens outside.
template <typename S>
Tensor<S> rmse_traj(const Tensor<S>& pred, const Tensor<S>& gt);

// Best-of-many: minimum rmse_traj over proposals, ties to the lowest index.
// Gradient flows only through the winning proposal.
template <typename S>
BomResult<S> bom_loss(const std::vector<Tensor<S>>& preds, const Tensor<S>& gt);

// Closed-form KL(q || p) between diagonal Gaussians given mean and
// log-variance tensors of equal shape, summed over dimensions. Evaluated
// internally in 64-bit so the result is never negative.
template <typename S>
Tensor<S> kld_gaussian(const Tensor<S>& mu_q, const Tensor<S>& logvar_q,
                       const Tensor<S>& mu_p, const Tensor<S>& logvar_p);

// Trajectory loss + stepwise goal loss + (optionally) latent KLD.
template <typename S>
LossResult<S> total_loss(const std::vector<Tensor<S>>& preds, const Tensor<S>& goal_positions,
                         const Tensor<S>& gt, const Tensor<S>& mu_q, const Tensor<S>& logvar_q,
                         const Tensor<S>& mu_p, const Tensor<S>& logvar_p, bool include_kld);

}  // namespace sgnet
