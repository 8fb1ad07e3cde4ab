#include "sgnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace sgnet {

namespace {

// Smooth, non-degenerate trajectory so no gradient path is trivially zero.
ObservationWindow probe_window(const ModelConfig& cfg, std::uint64_t seed) {
  ObservationWindow w;
  w.scene_id = "probe";
  w.agent_id = "0";
  w.obs_len = cfg.obs_len;
  w.pred_len = cfg.pred_len;
  w.in_dim = cfg.input_dim;
  w.out_dim = cfg.output_dim;
  RandomStream rs(seed);
  std::vector<double> phase(cfg.input_dim), slope(cfg.input_dim);
  for (std::size_t c = 0; c < cfg.input_dim; ++c) {
    phase[c] = rs.uniform() * 6.0;
    slope[c] = 0.05 + 0.15 * rs.uniform();
  }
  const std::size_t total = cfg.obs_len + cfg.pred_len;
  w.obs.resize(cfg.obs_len * cfg.input_dim);
  w.full_pos.resize(total * cfg.output_dim);
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t c = 0; c < cfg.input_dim; ++c) {
      const double v =
          slope[c] * static_cast<double>(t) + 0.3 * std::sin(0.7 * t + phase[c]);
      if (t < cfg.obs_len) w.obs[t * cfg.input_dim + c] = v;
      if (c < cfg.output_dim) w.full_pos[t * cfg.output_dim + c] = v;
    }
  }
  w.fut.assign(w.full_pos.begin() + cfg.obs_len * cfg.output_dim, w.full_pos.end());
  return w;
}

}  // namespace

GradCheckReport gradcheck_model(const ModelConfig& cfg, std::uint64_t seed,
                                std::size_t probes, double tol, double step) {
  cfg.validate();
  check_contract(probes >= 1, "gradcheck: probes must be >= 1");
  check_contract(step > 0.0, "gradcheck: step must be > 0");

  auto model = Model<double>::init(cfg, seed);
  auto params = model.params();
  const auto w = probe_window(cfg, seed ^ 0x9E3779B97F4A7C15ull);
  ForwardOptions opt;
  opt.train_mode = true;
  opt.decode_all = true;
  opt.seed = seed + 7;

  auto loss_value = [&]() -> double {
    return static_cast<double>(window_loss(model, w, opt).loss.item());
  };

  zero_grads(params);
  backward(window_loss(model, w, opt).loss);

  GradCheckReport rep;
  rep.tol = tol;
  const std::size_t per_block =
      std::max<std::size_t>(1, (probes + params.size() - 1) / params.size());
  RandomStream pick(seed ^ 0xA5A5A5A5ull);

  for (auto& p : params) {
    GradCheckRow row;
    row.block = p.name;
    const std::size_t n = p.tensor.size();
    // oversized candidate pool: probes landing on a kink get replaced
    std::vector<std::size_t> cand;
    if (n <= per_block * 4) {
      cand.resize(n);
      for (std::size_t i = 0; i < n; ++i) cand[i] = i;
    } else {
      std::set<std::size_t> uniq;
      while (uniq.size() < per_block * 4) uniq.insert(pick.below(n));
      cand.assign(uniq.begin(), uniq.end());
    }
    auto grad = p.tensor.grad();
    auto vals = p.tensor.values_mut();
    for (std::size_t i : cand) {
      if (row.checked >= per_block) break;
      const double analytic = grad.empty() ? 0.0 : grad[i];
      const double keep = vals[i];
      auto fd_at = [&](double h) {
        vals[i] = keep + h;
        const double up = loss_value();
        vals[i] = keep - h;
        const double down = loss_value();
        vals[i] = keep;
        return (up - down) / (2.0 * h);
      };
      const double fd1 = fd_at(step);
      const double fd2 = fd_at(step * 0.5);
      const double mag_fd = std::max(std::abs(fd1), std::abs(fd2));
      if (std::abs(analytic) < 1e-8 && mag_fd < 1e-8) {
        ++row.checked;
        continue;
      }
      // the two difference quotients must agree, otherwise the loss is not
      // locally smooth enough here (relu kink, best-of-K switch, noise floor)
      // and nothing can be concluded about the analytic value
      if (std::abs(fd1 - fd2) > 1e-4 * std::max(mag_fd, 1e-8)) {
        ++row.skipped;
        continue;
      }
      const double mag = std::max(std::abs(analytic), std::abs(fd2));
      const double rel = std::abs(analytic - fd2) / mag;
      ++row.checked;
      if (rel > tol) ++row.failed;
      if (rel > row.worst_rel) {
        row.worst_rel = rel;
        row.worst_index = i;
      }
    }
    rep.checked += row.checked;
    rep.failed += row.failed;
    rep.skipped += row.skipped;
    if (row.worst_rel > rep.worst_rel) {
      rep.worst_rel = row.worst_rel;
      rep.worst_block = row.block;
    }
    rep.rows.push_back(std::move(row));
  }
  zero_grads(params);
  rep.pass = rep.failed == 0 && rep.checked >= probes;
  return rep;
}

std::string gradcheck_to_text(const GradCheckReport& r) {
  std::ostringstream os;
  char buf[192];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof(buf), "%-28s checked %3zu  worst_rel %.3e at [%zu]%s\n",
                  row.block.c_str(), row.checked, row.worst_rel, row.worst_index,
                  row.failed ? "  FAIL" : "");
    os << buf;
  }
  std::snprintf(
      buf, sizeof(buf),
      "total checked %zu, failed %zu, skipped %zu, worst_rel %.3e (%s), tol %.1e -> %s\n",
      r.checked, r.failed, r.skipped, r.worst_rel,
      r.worst_block.empty() ? "-" : r.worst_block.c_str(), r.tol,
      r.pass ? "PASS" : "FAIL");
  os << buf;
  return os.str();
}

}  // namespace sgnet
