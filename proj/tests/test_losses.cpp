#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "sgnet/losses.hpp"
#include "sgnet/metrics.hpp"
#include "sgnet/random.hpp"

using namespace sgnet;
using T = Tensor<double>;

TEST_CASE("rmse fixtures") {
  auto gt = T::constant({2, 2}, {0, 1, 1, 3});
  auto pred = T::constant({2, 2}, {0, 0, 1, 1});
  CHECK(rmse_traj(pred, gt).item() == doctest::Approx(std::sqrt(1.25)).epsilon(1e-9));

  auto same = rmse_traj(gt, gt);
  CHECK(same.item() == 0.0);

  auto shifted = T::constant({2, 2}, {0 - 0.7, 1 - 0.7, 1 - 0.7, 3 - 0.7});
  CHECK(rmse_traj(shifted, gt).item() == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("rmse shape mismatch") {
  auto a = T::constant({2, 2}, {0, 1, 1, 3});
  auto b = T::constant({1, 2}, {0, 1});
  CHECK_THROWS_AS((void)rmse_traj(a, b), DimError);
}

TEST_CASE("best-of-many selection and ties") {
  auto gt = T::constant({2, 2}, {0, 0, 1, 1});
  auto close = T::constant({2, 2}, {0, 0.1, 1, 1.1});
  auto far = T::constant({2, 2}, {5, 5, 6, 6});

  auto single = bom_loss<double>({far}, gt);
  CHECK(single.loss.item() == rmse_traj(far, gt).item());
  CHECK(single.best_index == 0);

  auto pair = bom_loss<double>({far, close}, gt);
  CHECK(pair.best_index == 1);
  CHECK(pair.loss.item() == rmse_traj(close, gt).item());

  auto tie = bom_loss<double>({close, close}, gt);
  CHECK(tie.best_index == 0);

  auto exact = bom_loss<double>({far, gt, close}, gt);
  CHECK(exact.best_index == 1);
  CHECK(exact.loss.item() == 0.0);

  // adding a worse proposal never increases the loss
  auto more = bom_loss<double>({far, close, T::constant({2, 2}, {9, 9, 9, 9})}, gt);
  CHECK(more.loss.item() <= pair.loss.item());
}

TEST_CASE("best-of-many gradient flows only through the winner") {
  auto gt = T::constant({2, 2}, {0, 0, 1, 1});
  auto win = T::leaf({2, 2}, {0, 0.1, 1, 1.1}, true);
  auto lose = T::leaf({2, 2}, {5, 5, 6, 6}, true);
  auto r = bom_loss<double>({lose, win}, gt);
  backward(r.loss);
  CHECK(r.best_index == 1);
  CHECK(!win.grad().empty());
  bool lose_zero = true;
  for (double g : lose.grad()) lose_zero = lose_zero && g == 0.0;
  CHECK((lose.grad().empty() || lose_zero));
}

TEST_CASE("kld closed-form fixtures") {
  auto zero = T::constant({1, 1}, {0.0});
  auto one = T::constant({1, 1}, {1.0});
  // q = N(1, 1), p = N(0, 1): 0.5 * (sigma^2 + mu^2 - 1 - ln sigma^2) = 0.5
  CHECK(kld_gaussian(one, zero, zero, zero).item() ==
        doctest::Approx(0.5).epsilon(1e-9));
  // q == p -> 0
  auto mu = T::constant({1, 3}, {0.3, -0.2, 0.9});
  auto lv = T::constant({1, 3}, {0.1, -0.4, 0.0});
  CHECK(kld_gaussian(mu, lv, mu, lv).item() == 0.0);
}

TEST_CASE("kld is non-negative under random parameters") {
  RandomStream rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> mq(4), lq(4), mp(4), lp(4);
    for (int i = 0; i < 4; ++i) {
      mq[i] = static_cast<float>(rng.normal() * 3);
      lq[i] = static_cast<float>(rng.normal() * 2);
      mp[i] = static_cast<float>(rng.normal() * 3);
      lp[i] = static_cast<float>(rng.normal() * 2);
    }
    auto v = kld_gaussian(Tensor<float>::constant({1, 4}, mq),
                          Tensor<float>::constant({1, 4}, lq),
                          Tensor<float>::constant({1, 4}, mp),
                          Tensor<float>::constant({1, 4}, lp));
    CHECK(v.item() >= 0.0f);
  }
}

TEST_CASE("kld zero iff parameters equal") {
  auto mu = T::constant({1, 2}, {0.5, -0.5});
  auto lv = T::constant({1, 2}, {0.2, 0.2});
  auto mu2 = T::constant({1, 2}, {0.5 + 1e-3, -0.5});
  CHECK(kld_gaussian(mu, lv, mu2, lv).item() > 0.0);
}

TEST_CASE("kld overflows loudly") {
  auto zero = T::constant({1, 1}, {0.0});
  auto huge = T::constant({1, 1}, {1e4});
  CHECK_THROWS_AS((void)kld_gaussian(zero, huge, zero, zero).item(), NumericError);
}

TEST_CASE("kld gradient matches finite differences") {
  RandomStream rng(5);
  auto mk = [&](double s) {
    std::vector<double> v(3);
    for (auto& x : v) x = rng.normal() * s;
    return T::leaf({1, 3}, std::move(v), true);
  };
  auto mq = mk(1.0), lq = mk(0.5), mp = mk(1.0), lp = mk(0.5);
  backward(kld_gaussian(mq, lq, mp, lp));
  const double h = 1e-6;
  for (auto* t : {&mq, &lq, &mp, &lp}) {
    auto vals = t->values_mut();
    for (std::size_t i = 0; i < 3; ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double up = kld_gaussian(mq, lq, mp, lp).item();
      vals[i] = keep - h;
      const double down = kld_gaussian(mq, lq, mp, lp).item();
      vals[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double a = t->grad()[i];
      const double mag = std::max(std::abs(a), std::abs(fd));
      if (mag < 1e-9) continue;
      CHECK(std::abs(a - fd) / mag < 1e-6);
    }
  }
}

TEST_CASE("total loss composes additively") {
  auto gt = T::constant({2, 2}, {0, 0, 1, 1});
  auto pred = T::constant({2, 2}, {0.2, 0, 1, 1.3});
  auto goals = T::constant({2, 2}, {0.1, 0.1, 0.9, 0.8});
  auto mu = T::constant({1, 2}, {0.4, 0.1});
  auto lv = T::constant({1, 2}, {0.3, -0.3});
  auto zero = T::constant({1, 2}, {0, 0});

  auto with = total_loss<double>({pred}, goals, gt, mu, lv, zero, zero, true);
  CHECK(with.parts.total ==
        doctest::Approx(with.parts.bom_rmse + with.parts.goal_rmse + with.parts.kld)
            .epsilon(1e-12));
  CHECK(with.parts.kld > 0.0);

  auto without = total_loss<double>({pred}, goals, gt, mu, lv, zero, zero, false);
  CHECK(without.parts.kld == 0.0);
  CHECK(without.parts.total ==
        doctest::Approx(without.parts.bom_rmse + without.parts.goal_rmse).epsilon(1e-12));

  auto perfect = total_loss<double>({gt}, gt, gt, mu, lv, mu, lv, true);
  CHECK(perfect.parts.total == 0.0);
}

TEST_CASE("ade and fde fixtures") {
  std::vector<double> pred = {1, 1, 2, 2};
  std::vector<double> gt = {1, 2, 2, 4};
  CHECK(ade(pred, gt, 2) == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(fde(pred, gt, 2) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(ade(gt, gt, 2) == 0.0);
  CHECK(fde(gt, gt, 2) == 0.0);

  // translation invariance
  std::vector<double> pred_t = {1 + 5, 1 - 3, 2 + 5, 2 - 3};
  std::vector<double> gt_t = {1 + 5, 2 - 3, 2 + 5, 4 - 3};
  CHECK(ade(pred_t, gt_t, 2) == doctest::Approx(ade(pred, gt, 2)).epsilon(1e-12));
  CHECK(fde(pred_t, gt_t, 2) == doctest::Approx(fde(pred, gt, 2)).epsilon(1e-12));

  // uniform scaling scales linearly
  std::vector<double> pred_s = {3, 3, 6, 6};
  std::vector<double> gt_s = {3, 6, 6, 12};
  CHECK(ade(pred_s, gt_s, 2) == doctest::Approx(3 * ade(pred, gt, 2)).epsilon(1e-12));
}

TEST_CASE("box metric fixtures") {
  // one step, centroid shifted by (3, 4), size preserved
  std::vector<double> gt = {0, 0, 2, 2};
  std::vector<double> pred = {3, 4, 5, 6};
  CHECK(c_mse(pred, gt, 1) == doctest::Approx(12.5).epsilon(1e-9));
  CHECK(cf_mse(pred, gt, 1) == doctest::Approx(c_mse(pred, gt, 1)).epsilon(1e-12));
  CHECK(mse_bbox(pred, gt, 1) ==
        doctest::Approx((9.0 + 16.0 + 9.0 + 16.0) / 4.0).epsilon(1e-9));
  CHECK(mse_bbox(gt, gt, 1) == 0.0);
  CHECK(c_mse(gt, gt, 1) == 0.0);

  // two steps, horizon cuts the second
  std::vector<double> gt2 = {0, 0, 2, 2, 0, 0, 2, 2};
  std::vector<double> pred2 = {0, 0, 2, 2, 3, 4, 5, 6};
  CHECK(mse_bbox(pred2, gt2, 1) == 0.0);
  CHECK(mse_bbox(pred2, gt2, 2) ==
        doctest::Approx(mse_bbox(pred, gt, 1) / 2.0).epsilon(1e-12));
  CHECK(cf_mse(pred2, gt2, 2) == doctest::Approx(12.5).epsilon(1e-9));
}

TEST_CASE("fiou fixtures") {
  std::vector<double> a = {0, 0, 1, 1};
  CHECK(fiou(a, a, 1) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> b = {5, 5, 6, 6};
  CHECK(fiou(a, b, 1) == 0.0);

  // unit squares overlapping in a 0.5 x 1 strip -> 0.5 / 1.5
  std::vector<double> c = {0.5, 0, 1.5, 1};
  CHECK(fiou(a, c, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

  std::vector<double> bad = {1, 1, 0, 0};
  CHECK_THROWS_AS((void)fiou(a, bad, 1), ContractError);

  // zero-area union
  std::vector<double> pt = {2, 2, 2, 2};
  std::vector<double> pt2 = {3, 3, 3, 3};
  CHECK(fiou(pt, pt2, 1) == 0.0);
}

TEST_CASE("metric report serialization") {
  MetricReport r;
  r.windows = 4;
  r.proposals = 20;
  r.add("ade", 12, 0.5);
  r.add("mse", 6, 100.25);
  CHECK(r.find("ade", 12)->value == 0.5);
  CHECK(r.find("ade", 6) == nullptr);

  const auto csv = r.to_csv();
  CHECK(csv.find("ade@12") != std::string::npos);
  CHECK(csv.find("mse@6") != std::string::npos);
  CHECK(csv.find("windows") != std::string::npos);

  const auto js = r.to_json();
  CHECK(js.find("\"ade@12\"") != std::string::npos);
  CHECK(js.find("box_mse_convention") != std::string::npos);
}
