#include "sgnet/adam.hpp"

#include <cmath>

namespace sgnet {

template <typename S>
void adam_update(ParamList<S>& params, AdamState<S>& state) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& np : params) {
    auto vals = np.tensor.values_mut();
    auto grad = np.tensor.grad();
    check_contract(grad.empty() || grad.size() == vals.size(),
                   "adam_update: grad size mismatch for " + np.name);
    if (!grad.empty() && !all_finite(grad))
      throw NumericError("adam_update: non-finite gradient in " + np.name);
    auto& mom = state.moments[np.name];
    if (mom.m.empty()) {
      mom.m.assign(vals.size(), S(0));
      mom.v.assign(vals.size(), S(0));
    }
    check_contract(mom.m.size() == vals.size(),
                   "adam_update: stale moment shape for " + np.name);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      const double m = state.beta1 * static_cast<double>(mom.m[i]) + (1.0 - state.beta1) * g;
      const double v =
          state.beta2 * static_cast<double>(mom.v[i]) + (1.0 - state.beta2) * g * g;
      mom.m[i] = static_cast<S>(m);
      mom.v[i] = static_cast<S>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      vals[i] = static_cast<S>(static_cast<double>(vals[i]) -
                               state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

template void adam_update<float>(ParamList<float>&, AdamState<float>&);
template void adam_update<double>(ParamList<double>&, AdamState<double>&);

}  // namespace sgnet
