#include "sgnet/losses.hpp"

#include <algorithm>
#include <cmath>

namespace sgnet {

namespace {

template <typename S>
std::shared_ptr<detail::Node<S>> scalar_op(std::vector<std::shared_ptr<detail::Node<S>>> parents) {
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = {1};
  node->values = std::make_shared<std::vector<S>>(1, S(0));
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  node->requires_grad = rg;
  node->parents = std::move(parents);
  return node;
}

}  // namespace

template <typename S>
Tensor<S> rmse_traj(const Tensor<S>& pred, const Tensor<S>& gt) {
  check_dim(pred.defined() && gt.defined() && pred.shape() == gt.shape(),
            "rmse_traj: prediction and target shapes must match");
  check_dim(pred.size() > 0, "rmse_traj: empty trajectory");
  auto res = sub(pred, gt);
  return sqrt_op(mean_all(mul(res, res)));
}

template <typename S>
BomResult<S> bom_loss(const std::vector<Tensor<S>>& preds, const Tensor<S>& gt) {
  check_contract(!preds.empty(), "bom_loss: need at least one proposal");
  BomResult<S> best;
  S best_val{};
  for (std::size_t k = 0; k < preds.size(); ++k) {
    auto l = rmse_traj(preds[k], gt);
    const S v = l.item();
    if (k == 0 || v < best_val) {
      best_val = v;
      best.loss = l;
      best.best_index = k;
    }
  }
  return best;
}

template <typename S>
Tensor<S> kld_gaussian(const Tensor<S>& mu_q, const Tensor<S>& logvar_q,
                       const Tensor<S>& mu_p, const Tensor<S>& logvar_p) {
  check_dim(mu_q.defined() && logvar_q.defined() && mu_p.defined() && logvar_p.defined(),
            "kld_gaussian: undefined input");
  check_dim(mu_q.shape() == logvar_q.shape() && mu_q.shape() == mu_p.shape() &&
                mu_q.shape() == logvar_p.shape(),
            "kld_gaussian: all four inputs must share a shape");
  for (auto span : {mu_q.values(), logvar_q.values(), mu_p.values(), logvar_p.values()})
    if (!all_finite(span)) throw NumericError("kld_gaussian: non-finite distribution parameter");

  auto node = scalar_op<S>(
      {mu_q.node_ptr(), logvar_q.node_ptr(), mu_p.node_ptr(), logvar_p.node_ptr()});
  const std::size_t n = mu_q.size();
  const S* mq = mu_q.node()->values->data();
  const S* lq = logvar_q.node()->values->data();
  const S* mp = mu_p.node()->values->data();
  const S* lp = logvar_p.node()->values->data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(lq[i]) - static_cast<double>(lp[i]);
    const double dmu = static_cast<double>(mq[i]) - static_cast<double>(mp[i]);
    // expm1(x) - x >= 0 exactly; the clamp strips rounding noise near x = 0.
    const double ratio_term = std::max(0.0, std::expm1(x) - x);
    acc += ratio_term + dmu * dmu * std::exp(-static_cast<double>(lp[i]));
  }
  const double kld = 0.5 * acc;
  if (!std::isfinite(kld)) throw NumericError("kld_gaussian: divergence overflow");
  (*node->values)[0] = static_cast<S>(kld);
  if (node->requires_grad) {
    node->backprop = [n](detail::Node<S>& self) {
      const double g = static_cast<double>(self.grad[0]);
      auto& pmq = *self.parents[0];
      auto& plq = *self.parents[1];
      auto& pmp = *self.parents[2];
      auto& plp = *self.parents[3];
      const S* mq = pmq.values->data();
      const S* lq = plq.values->data();
      const S* mp = pmp.values->data();
      const S* lp = plp.values->data();
      S* gmq = pmq.requires_grad ? pmq.ensure_grad().data() : nullptr;
      S* glq = plq.requires_grad ? plq.ensure_grad().data() : nullptr;
      S* gmp = pmp.requires_grad ? pmp.ensure_grad().data() : nullptr;
      S* glp = plp.requires_grad ? plp.ensure_grad().data() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(lq[i]) - static_cast<double>(lp[i]);
        const double dmu = static_cast<double>(mq[i]) - static_cast<double>(mp[i]);
        const double inv_vp = std::exp(-static_cast<double>(lp[i]));
        const double ratio = std::exp(x);
        if (gmq) gmq[i] += static_cast<S>(g * dmu * inv_vp);
        if (gmp) gmp[i] -= static_cast<S>(g * dmu * inv_vp);
        if (glq) glq[i] += static_cast<S>(g * 0.5 * (ratio - 1.0));
        if (glp) glp[i] += static_cast<S>(g * 0.5 * (1.0 - ratio - dmu * dmu * inv_vp));
      }
    };
  }
  return Tensor<S>::from_node(node);
}

template <typename S>
LossResult<S> total_loss(const std::vector<Tensor<S>>& preds, const Tensor<S>& goal_positions,
                         const Tensor<S>& gt, const Tensor<S>& mu_q, const Tensor<S>& logvar_q,
                         const Tensor<S>& mu_p, const Tensor<S>& logvar_p, bool include_kld) {
  auto bom = bom_loss(preds, gt);
  auto goal = rmse_traj(goal_positions, gt);
  LossResult<S> out;
  out.best_index = bom.best_index;
  out.parts.bom_rmse = static_cast<double>(bom.loss.item());
  out.parts.goal_rmse = static_cast<double>(goal.item());
  if (include_kld) {
    auto kld = kld_gaussian(mu_q, logvar_q, mu_p, logvar_p);
    out.parts.kld = static_cast<double>(kld.item());
    out.loss = add(add(bom.loss, goal), kld);
  } else {
    out.loss = add(bom.loss, goal);
  }
  out.parts.total = static_cast<double>(out.loss.item());
  return out;
}

#define SGNET_INSTANTIATE_LOSSES(S)                                                          \
  template Tensor<S> rmse_traj<S>(const Tensor<S>&, const Tensor<S>&);                       \
  template BomResult<S> bom_loss<S>(const std::vector<Tensor<S>>&, const Tensor<S>&);        \
  template Tensor<S> kld_gaussian<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,   \
                                     const Tensor<S>&);                                      \
  template LossResult<S> total_loss<S>(const std::vector<Tensor<S>>&, const Tensor<S>&,      \
                                       const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, \
                                       const Tensor<S>&, const Tensor<S>&, bool);

SGNET_INSTANTIATE_LOSSES(float)
SGNET_INSTANTIATE_LOSSES(double)

#undef SGNET_INSTANTIATE_LOSSES

}  // namespace sgnet
