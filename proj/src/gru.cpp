#include "sgnet/gru.hpp"

namespace sgnet {

template <typename S>
GruParams<S> GruParams<S>::init(std::size_t in_dim, std::size_t hidden, RandomStream& rng) {
  GruParams p;
  auto mat = [&](std::size_t r, std::size_t c) {
    return glorot_uniform<S>({r, c}, r, c, rng, true);
  };
  p.w_xz = mat(in_dim, hidden);
  p.w_hz = mat(hidden, hidden);
  p.b_z = Tensor<S>::zeros({hidden}, true);
  p.w_xr = mat(in_dim, hidden);
  p.w_hr = mat(hidden, hidden);
  p.b_r = Tensor<S>::zeros({hidden}, true);
  p.w_xc = mat(in_dim, hidden);
  p.w_hc = mat(hidden, hidden);
  p.b_c = Tensor<S>::zeros({hidden}, true);
  return p;
}

template <typename S>
void GruParams<S>::collect(const std::string& prefix, ParamList<S>& out) const {
  out.push_back({prefix + ".w_xz", w_xz});
  out.push_back({prefix + ".w_hz", w_hz});
  out.push_back({prefix + ".b_z", b_z});
  out.push_back({prefix + ".w_xr", w_xr});
  out.push_back({prefix + ".w_hr", w_hr});
  out.push_back({prefix + ".b_r", b_r});
  out.push_back({prefix + ".w_xc", w_xc});
  out.push_back({prefix + ".w_hc", w_hc});
  out.push_back({prefix + ".b_c", b_c});
}

template <typename S>
Tensor<S> gru_cell(const Tensor<S>& x, const Tensor<S>& h, const GruParams<S>& p) {
  check_dim(x.shape().size() == 2 && h.shape().size() == 2,
            "gru_cell: x and h must be rank-2");
  check_dim(x.shape()[1] == p.w_xz.shape()[0],
            "gru_cell: input width " + std::to_string(x.shape()[1]) + " vs cell " +
                std::to_string(p.w_xz.shape()[0]));
  check_dim(h.shape()[1] == p.w_hz.shape()[0],
            "gru_cell: hidden width " + std::to_string(h.shape()[1]) + " vs cell " +
                std::to_string(p.w_hz.shape()[0]));
  check_dim(x.shape()[0] == h.shape()[0], "gru_cell: batch mismatch");

  auto z = sigmoid(add_rowwise(add(matmul(x, p.w_xz), matmul(h, p.w_hz)), p.b_z));
  auto r = sigmoid(add_rowwise(add(matmul(x, p.w_xr), matmul(h, p.w_hr)), p.b_r));
  auto cand =
      tanh_op(add_rowwise(add(matmul(x, p.w_xc), matmul(mul(r, h), p.w_hc)), p.b_c));
  auto one_minus_z = add_scalar(scale(z, -1.0), 1.0);
  return add(mul(one_minus_z, h), mul(z, cand));
}

template struct GruParams<float>;
template struct GruParams<double>;
template Tensor<float> gru_cell<float>(const Tensor<float>&, const Tensor<float>&,
                                       const GruParams<float>&);
template Tensor<double> gru_cell<double>(const Tensor<double>&, const Tensor<double>&,
                                         const GruParams<double>&);

}  // namespace sgnet
