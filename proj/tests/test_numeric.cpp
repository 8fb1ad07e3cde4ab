#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "sgnet/adam.hpp"
#include "sgnet/gru.hpp"
#include "sgnet/random.hpp"
#include "sgnet/tensor.hpp"

using namespace sgnet;
using T = Tensor<double>;

namespace {

// Central finite differences on every entry of every leaf against one
// reverse sweep. The loss builder must rebuild the graph from the leaves.
void fd_against_backward(std::vector<T>& leaves, const std::function<T()>& make_loss,
                         double tol = 1e-6) {
  for (auto& l : leaves) l.zero_grad();
  backward(make_loss());
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) {
    auto g = l.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(l.size(), 0.0);
  }
  const double h = 1e-6;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto vals = leaves[li].values_mut();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double up = make_loss().item();
      vals[i] = keep - h;
      const double down = make_loss().item();
      vals[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double a = analytic[li][i];
      const double mag = std::max(std::abs(a), std::abs(fd));
      if (mag < 1e-9) continue;
      CAPTURE(li);
      CAPTURE(i);
      CHECK(std::abs(a - fd) / mag < tol);
    }
  }
  for (auto& l : leaves) l.zero_grad();
}

T rand_leaf(Shape shape, RandomStream& rng, bool rg = true) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * 0.5;
  return T::leaf(std::move(shape), std::move(v), rg);
}

}  // namespace

TEST_CASE("matmul values") {
  auto a = T::constant({1, 2}, {1, 2});
  auto b = T::constant({2, 1}, {3, 4});
  auto c = matmul(a, b);
  CHECK(c.shape() == Shape{1, 1});
  CHECK(c.item() == doctest::Approx(11.0).epsilon(1e-12));

  auto eye = T::constant({2, 2}, {1, 0, 0, 1});
  auto m = T::constant({2, 2}, {5, 6, 7, 8});
  auto mi = matmul(m, eye);
  for (std::size_t i = 0; i < 4; ++i) CHECK(mi.values()[i] == m.values()[i]);

  auto z = T::zeros({2, 2});
  auto mz = matmul(m, z);
  for (double v : mz.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul shape mismatch") {
  auto a = T::constant({1, 3}, {1, 2, 3});
  auto b = T::constant({2, 1}, {3, 4});
  CHECK_THROWS_AS((void)matmul(a, b), DimError);
}

TEST_CASE("matmul gradients") {
  RandomStream rng(3);
  std::vector<T> leaves = {rand_leaf({2, 3}, rng), rand_leaf({3, 2}, rng)};
  fd_against_backward(leaves, [&] {
    auto c = matmul(leaves[0], leaves[1]);
    return mean_all(mul(c, c));
  });
}

TEST_CASE("square rule") {
  auto x = T::leaf({1}, {3.0}, true);
  backward(mul(x, x));
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("no grad without requires_grad") {
  auto x = T::leaf({1}, {3.0}, false);
  auto y = T::leaf({1}, {2.0}, true);
  backward(mul(x, y));
  CHECK(x.grad().empty());
  CHECK(y.grad()[0] == doctest::Approx(3.0));
}

TEST_CASE("grad accumulates over reuse and across sweeps") {
  auto x = T::leaf({1}, {5.0}, true);
  backward(add(x, x));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  backward(scale(x, 3.0));
  CHECK(x.grad()[0] == doctest::Approx(5.0));
  x.zero_grad();
  CHECK(x.grad().empty());
}

TEST_CASE("backward requires scalar") {
  auto x = T::leaf({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(add(x, x)), ContractError);
}

TEST_CASE("elementwise values") {
  auto x = T::constant({1, 4}, {-2.0, -0.5, 0.5, 2.0});
  auto r = relu(x);
  CHECK(r.values()[0] == 0.0);
  CHECK(r.values()[1] == 0.0);
  CHECK(r.values()[2] == 0.5);
  CHECK(r.values()[3] == 2.0);
  auto t = tanh_op(x);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(t.values()[i] == doctest::Approx(std::tanh(x.values()[i])).epsilon(1e-12));
  auto s = sigmoid(x);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(s.values()[i] ==
          doctest::Approx(1.0 / (1.0 + std::exp(-x.values()[i]))).epsilon(1e-12));
  auto e = exp_op(x);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(e.values()[i] == doctest::Approx(std::exp(x.values()[i])).epsilon(1e-12));
  auto q = sqrt_op(T::constant({1, 2}, {4.0, 9.0}));
  CHECK(q.values()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(q.values()[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("elementwise and composite gradients") {
  RandomStream rng(7);
  std::vector<T> leaves = {rand_leaf({2, 3}, rng), rand_leaf({2, 3}, rng),
                           rand_leaf({3}, rng)};
  fd_against_backward(leaves, [&] {
    auto a = tanh_op(leaves[0]);
    auto b = sigmoid(mul(leaves[1], a));
    auto c = add_rowwise(sub(b, a), leaves[2]);
    auto d = exp_op(scale(c, 0.3));
    auto e = relu(add_scalar(d, -1.0));
    return mean_all(mul(e, e));
  });
}

TEST_CASE("sqrt gradient away from zero") {
  RandomStream rng(9);
  auto x = rand_leaf({2, 2}, rng);
  auto vals = x.values_mut();
  for (auto& v : vals) v = 1.0 + std::abs(v);
  std::vector<T> leaves = {x};
  fd_against_backward(leaves, [&] { return sum_all(sqrt_op(leaves[0])); });
}

TEST_CASE("softmax rows sum to one and gradients hold") {
  RandomStream rng(11);
  auto x = rand_leaf({3, 5}, rng);
  auto y = softmax_lastaxis(x);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) s += y.values()[r * 5 + c];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  auto w = T::constant({3, 5}, std::vector<double>(15, 0.0));
  auto wm = w.values_mut();
  for (std::size_t i = 0; i < 15; ++i) wm[i] = 0.1 * static_cast<double>(i % 4);
  std::vector<T> leaves = {x};
  fd_against_backward(leaves,
                      [&] { return sum_all(mul(softmax_lastaxis(leaves[0]), w)); });
}

TEST_CASE("softmax handles large inputs") {
  auto x = T::constant({1, 3}, {1000.0, 1000.0, 999.0});
  auto y = softmax_lastaxis(x);
  CHECK(std::isfinite(y.values()[0]));
  CHECK(y.values()[0] == doctest::Approx(y.values()[1]).epsilon(1e-12));
  CHECK(y.values()[0] > y.values()[2]);
}

TEST_CASE("shape ops values and gradients") {
  auto a = T::constant({2, 2}, {1, 2, 3, 4});
  auto at = transpose(a);
  CHECK(at.values()[1] == 3.0);
  CHECK(at.values()[2] == 2.0);

  auto b = T::constant({2, 1}, {9, 8});
  auto cat = concat_lastaxis(a, b);
  CHECK(cat.shape() == Shape{2, 3});
  CHECK(cat.values()[2] == 9.0);
  CHECK(cat.values()[5] == 8.0);

  auto sl = slice_lastaxis(cat, 2, 1);
  CHECK(sl.values()[0] == 9.0);
  CHECK(sl.values()[1] == 8.0);

  auto sr = slice_rows(a, 1, 1);
  CHECK(sr.shape() == Shape{1, 2});
  CHECK(sr.values()[0] == 3.0);

  auto tiled = tile_rows(T::constant({1, 2}, {5, 6}), 3);
  CHECK(tiled.shape() == Shape{3, 2});
  CHECK(tiled.values()[4] == 5.0);

  auto stacked = stack_rows(std::vector<T>{T::constant({1, 2}, {1, 2}), T::constant({1, 2}, {3, 4})});
  CHECK(stacked.shape() == Shape{2, 2});
  CHECK(stacked.values()[3] == 4.0);

  auto rs = reshape(a, {4});
  CHECK(rs.shape() == Shape{4});
  CHECK(rs.values()[3] == 4.0);

  RandomStream rng(13);
  std::vector<T> leaves = {rand_leaf({2, 3}, rng), rand_leaf({2, 2}, rng)};
  fd_against_backward(leaves, [&] {
    auto c = concat_lastaxis(leaves[0], leaves[1]);
    auto t = transpose(c);
    auto s = slice_rows(t, 1, 3);
    auto tl = tile_rows(slice_rows(s, 0, 1), 2);
    return mean_all(mul(tl, tl));
  });
}

TEST_CASE("reductions") {
  auto a = T::constant({2, 2}, {1, 2, 3, 4});
  CHECK(sum_all(a).item() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(mean_all(a).item() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("conv1d and deconv1d") {
  // L=5, Cin=1, k=3, stride 2, pad 1 -> L'=3
  auto x = T::constant({5, 1}, {1, 2, 3, 4, 5});
  auto w = T::constant({3, 1, 1}, {1, 1, 1});
  auto b = T::constant({1}, {0});
  auto y = conv1d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{3, 1});
  CHECK(y.values()[0] == doctest::Approx(3.0));   // 0+1+2
  CHECK(y.values()[1] == doctest::Approx(9.0));   // 2+3+4
  CHECK(y.values()[2] == doctest::Approx(9.0));   // 4+5+0

  // transposed: 3 -> 5 with out_pad 0, 3 -> 6 with out_pad 1
  auto up0 = deconv1d(y, w, b, 2, 1, 0);
  CHECK(up0.shape() == Shape{5, 1});
  auto up1 = deconv1d(y, w, b, 2, 1, 1);
  CHECK(up1.shape() == Shape{6, 1});

  RandomStream rng(17);
  std::vector<T> leaves = {rand_leaf({6, 2}, rng), rand_leaf({3, 2, 3}, rng),
                           rand_leaf({3}, rng), rand_leaf({3, 3, 2}, rng),
                           rand_leaf({2}, rng)};
  fd_against_backward(leaves, [&] {
    auto mid = relu(conv1d(leaves[0], leaves[1], leaves[2], 2, 1));
    auto back = deconv1d(mid, leaves[3], leaves[4], 2, 1, 1);
    return mean_all(mul(back, back));
  });
}

TEST_CASE("gru zero parameters halve the hidden state") {
  RandomStream rng(1);
  auto p = GruParams<double>::init(3, 4, rng);
  for (auto& nt : [&] { ParamList<double> l; p.collect("g.", l); return l; }()) {
    auto v = nt.tensor.values_mut();
    std::fill(v.begin(), v.end(), 0.0);
  }
  auto x = T::constant({1, 3}, {1, 2, 3});
  auto h = T::constant({1, 4}, {0.4, -0.8, 1.2, 2.0});
  auto h2 = gru_cell(x, h, p);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(h2.values()[i] == doctest::Approx(0.5 * h.values()[i]).epsilon(1e-12));
}

TEST_CASE("gru scalar hand oracle") {
  // 1-d input, 1-d hidden, all weights/biases chosen by hand.
  RandomStream rng(1);
  auto p = GruParams<double>::init(1, 1, rng);
  auto set = [&](Tensor<double>& t, double v) { t.values_mut()[0] = v; };
  ParamList<double> l;
  p.collect("g.", l);
  // order: w_xz w_hz b_z w_xr w_hr b_r w_xc w_hc b_c
  const double W[9] = {0.5, -0.3, 0.1, 0.2, 0.4, -0.2, 0.7, 0.6, 0.0};
  for (std::size_t i = 0; i < 9; ++i) set(l[i].tensor, W[i]);
  const double xv = 0.8, hv = -0.5;
  auto x = T::constant({1, 1}, {xv});
  auto h = T::constant({1, 1}, {hv});
  auto out = gru_cell(x, h, p);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double z = sig(W[0] * xv + W[1] * hv + W[2]);
  const double r = sig(W[3] * xv + W[4] * hv + W[5]);
  const double c = std::tanh(W[6] * xv + W[7] * (r * hv) + W[8]);
  const double expect = (1 - z) * hv + z * c;
  CHECK(out.item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gru gradients") {
  RandomStream rng(23);
  auto p = GruParams<double>::init(2, 3, rng);
  ParamList<double> l;
  p.collect("g.", l);
  std::vector<T> leaves;
  for (auto& nt : l) leaves.push_back(nt.tensor);
  auto x = T::constant({1, 2}, {0.3, -0.6});
  auto h0 = T::constant({1, 3}, {0.1, 0.2, -0.3});
  fd_against_backward(leaves, [&] {
    auto h1 = gru_cell(x, h0, p);
    auto h2 = gru_cell(x, h1, p);
    return mean_all(mul(h2, h2));
  });
}

TEST_CASE("adam first step matches the closed form") {
  ParamList<float> params;
  params.push_back({"w", Tensor<float>::leaf({1}, {1.0f}, true)});
  params[0].tensor.grad_mut()[0] = 2.0f;
  AdamState<float> st;
  st.lr = 0.1;
  adam_update(params, st);
  const double g = 2.0;
  const double m_hat = (1 - 0.9) * g / (1 - 0.9);
  const double v_hat = (1 - 0.999) * g * g / (1 - 0.999);
  const float expect =
      static_cast<float>(1.0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8));
  CHECK(params[0].tensor.values()[0] == expect);
  CHECK(st.step == 1);
}

TEST_CASE("adam symmetry and zero-grad fixed point") {
  ParamList<float> params;
  params.push_back({"a", Tensor<float>::leaf({2}, {0.5f, 0.5f}, true)});
  params.push_back({"b", Tensor<float>::leaf({1}, {3.0f}, true)});
  auto ga = params[0].tensor.grad_mut();
  ga[0] = 1.5f;
  ga[1] = 1.5f;
  AdamState<float> st;
  adam_update(params, st);
  CHECK(params[0].tensor.values()[0] == params[0].tensor.values()[1]);
  CHECK(params[1].tensor.values()[0] == 3.0f);  // no grad -> untouched
}

TEST_CASE("adam rejects non-finite gradients") {
  ParamList<float> params;
  params.push_back({"w", Tensor<float>::leaf({1}, {1.0f}, true)});
  params[0].tensor.grad_mut()[0] = std::numeric_limits<float>::quiet_NaN();
  AdamState<float> st;
  CHECK_THROWS_AS(adam_update(params, st), NumericError);
}

TEST_CASE("glorot bounds") {
  RandomStream rng(31);
  auto w = glorot_uniform<double>({16, 8}, 16, 8, rng);
  const double bound = std::sqrt(6.0 / (16 + 8));
  for (double v : w.values()) {
    CHECK(v <= bound);
    CHECK(v >= -bound);
  }
}

TEST_CASE("random stream behavior") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  RandomStream c(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  auto d1 = RandomStream(42).derive(7);
  auto d2 = RandomStream(42).derive(7);
  CHECK(d1.next_u64() == d2.next_u64());
  RandomStream e(9);
  (void)e.next_u64();
  const auto s = e.state();
  const auto n1 = e.next_u64();
  e.set_state(s);
  CHECK(e.next_u64() == n1);

  double sum = 0, sq = 0;
  RandomStream g(5);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = g.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("leaf views share values but not gradients") {
  auto master = Tensor<float>::leaf({2}, {1.0f, 2.0f}, true);
  auto view = master.leaf_view(true);
  view.values_mut()[0] = 7.0f;
  CHECK(master.values()[0] == 7.0f);
  backward(sum_all(view));
  CHECK(master.grad().empty());
  CHECK(view.grad()[0] == 1.0f);
}
