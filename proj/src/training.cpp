#include "sgnet/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace sgnet {

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("train config: " + what);
  };
  need(batch >= 1, "batch must be >= 1");
  need(epochs >= 1, "epochs must be >= 1");
  need(lr > 0.0, "lr must be > 0");
  need(plateau_factor > 0.0 && plateau_factor < 1.0, "plateau_factor must lie in (0, 1)");
  need(plateau_patience >= 1, "plateau_patience must be >= 1");
  need(min_lr > 0.0 && min_lr <= lr, "min_lr must lie in (0, lr]");
  need(threads >= 1, "threads must be >= 1");
}

namespace {

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": `" + it->second + "`");
  }
}

std::uint64_t kv_u64(const std::map<std::string, std::string>& kv, const std::string& key,
                     std::uint64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": `" + it->second + "`");
  }
}

bool kv_flag(const std::map<std::string, std::string>& kv, const std::string& key,
             bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("bad value for " + key + ": `" + it->second + "` (expected true/false)");
}

// Runs fn(0..n-1) on up to `threads` workers; first exception wins and is
// rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, n);
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

void TrainConfig::to_kv(std::map<std::string, std::string>& kv,
                        const std::string& prefix) const {
  kv[prefix + "batch"] = std::to_string(batch);
  kv[prefix + "epochs"] = std::to_string(epochs);
  kv[prefix + "lr"] = fmt_g17(lr);
  kv[prefix + "plateau_factor"] = fmt_g17(plateau_factor);
  kv[prefix + "plateau_patience"] = std::to_string(plateau_patience);
  kv[prefix + "plateau_threshold"] = fmt_g17(plateau_threshold);
  kv[prefix + "min_lr"] = fmt_g17(min_lr);
  kv[prefix + "seed"] = std::to_string(seed);
  kv[prefix + "decode_last_only"] = decode_last_only ? "true" : "false";
  kv[prefix + "k"] = std::to_string(k);
  kv[prefix + "threads"] = std::to_string(threads);
}

TrainConfig TrainConfig::from_kv(const std::map<std::string, std::string>& kv,
                                 const std::string& prefix) {
  TrainConfig c;
  c.batch = static_cast<std::size_t>(kv_u64(kv, prefix + "batch", c.batch));
  c.epochs = static_cast<std::size_t>(kv_u64(kv, prefix + "epochs", c.epochs));
  c.lr = kv_double(kv, prefix + "lr", c.lr);
  c.plateau_factor = kv_double(kv, prefix + "plateau_factor", c.plateau_factor);
  c.plateau_patience =
      static_cast<std::size_t>(kv_u64(kv, prefix + "plateau_patience", c.plateau_patience));
  c.plateau_threshold = kv_double(kv, prefix + "plateau_threshold", c.plateau_threshold);
  c.min_lr = kv_double(kv, prefix + "min_lr", c.min_lr);
  c.seed = kv_u64(kv, prefix + "seed", c.seed);
  c.decode_last_only = kv_flag(kv, prefix + "decode_last_only", c.decode_last_only);
  c.k = static_cast<std::size_t>(kv_u64(kv, prefix + "k", c.k));
  c.threads = static_cast<std::size_t>(kv_u64(kv, prefix + "threads", c.threads));
  c.validate();
  return c;
}

template <typename S>
LossResult<S> window_loss(const Model<S>& m, const ObservationWindow& w,
                          const ForwardOptions& opt) {
  const auto& cfg = m.config();
  check_contract(w.full_pos.size() == (cfg.obs_len + cfg.pred_len) * cfg.output_dim,
                 "window_loss: window lacks the full position sequence");
  auto res = m.forward_window(w, opt);
  const bool with_kld = cfg.mode == ModelMode::Stochastic && opt.train_mode;
  Tensor<S> acc;
  LossBreakdown parts;
  std::size_t best = 0;
  for (const auto& ps : res.steps) {
    std::vector<S> tgt(cfg.pred_len * cfg.output_dim);
    const std::size_t first = ps.encoder_step + 1;
    for (std::size_t i = 0; i < cfg.pred_len * cfg.output_dim; ++i)
      tgt[i] = static_cast<S>(w.full_pos[first * cfg.output_dim + i]);
    auto gt = Tensor<S>::constant({cfg.pred_len, cfg.output_dim}, std::move(tgt));
    auto lr = total_loss(ps.trajectories, ps.goal_positions, gt, ps.mu_q, ps.logvar_q,
                         ps.mu_p, ps.logvar_p, with_kld);
    acc = acc.defined() ? add(acc, lr.loss) : lr.loss;
    parts.bom_rmse += lr.parts.bom_rmse;
    parts.goal_rmse += lr.parts.goal_rmse;
    parts.kld += lr.parts.kld;
    best = lr.best_index;
  }
  const double n = static_cast<double>(res.steps.size());
  LossResult<S> out;
  out.loss = scale(acc, 1.0 / n);
  out.parts.bom_rmse = parts.bom_rmse / n;
  out.parts.goal_rmse = parts.goal_rmse / n;
  out.parts.kld = parts.kld / n;
  out.parts.total = static_cast<double>(out.loss.item());
  out.best_index = best;
  return out;
}

template LossResult<float> window_loss<float>(const Model<float>&, const ObservationWindow&,
                                              const ForwardOptions&);
template LossResult<double> window_loss<double>(const Model<double>&,
                                                const ObservationWindow&,
                                                const ForwardOptions&);

std::uint64_t eval_window_seed(std::uint64_t base, std::size_t index) {
  return RandomStream(base).derive(0xE7A1u).derive(index).state();
}

namespace {

std::uint64_t val_window_seed(std::uint64_t base, std::size_t epoch, std::size_t index) {
  return RandomStream(base).derive(0x7A11u + epoch).derive(index).state();
}

std::map<std::string, std::string> train_state_header(std::size_t epochs_done,
                                                      const RandomStream& rng,
                                                      const PlateauScheduler& sched,
                                                      double best_val,
                                                      std::size_t best_epoch) {
  std::map<std::string, std::string> h;
  h["train.epoch"] = std::to_string(epochs_done);
  h["train.rng_state"] = std::to_string(rng.state());
  h["train.best_val"] = fmt_g17(best_val);
  h["train.best_epoch"] = std::to_string(best_epoch);
  h["sched.lr"] = fmt_g17(sched.lr);
  h["sched.best"] = fmt_g17(sched.best);
  h["sched.bad"] = std::to_string(sched.bad);
  return h;
}

}  // namespace

TrainResult train(Model<float>& model, const std::vector<ObservationWindow>& train_set,
                  const std::vector<ObservationWindow>& val_set, const TrainConfig& cfg,
                  const Checkpoint* resume, std::ostream* progress) {
  cfg.validate();
  check_contract(!train_set.empty(), "train: empty training set");
  if (cfg.k != 0 && cfg.k != model.config().k)
    throw ConfigError("train config: k=" + std::to_string(cfg.k) +
                      " disagrees with the model's k=" + std::to_string(model.config().k));

  auto params = model.params();
  AdamState<float> adam;
  adam.lr = cfg.lr;
  PlateauScheduler sched;
  sched.lr = cfg.lr;
  sched.factor = cfg.plateau_factor;
  sched.min_lr = cfg.min_lr;
  sched.threshold = cfg.plateau_threshold;
  sched.patience = cfg.plateau_patience;
  RandomStream rng(cfg.seed);
  TrainResult out;
  std::size_t start_epoch = 0;

  if (resume) {
    restore_model(model, *resume);
    restore_adam(adam, *resume);
    const auto& h = resume->header;
    start_epoch = static_cast<std::size_t>(kv_u64(h, "train.epoch", 0));
    rng.set_state(kv_u64(h, "train.rng_state", cfg.seed));
    sched.lr = kv_double(h, "sched.lr", cfg.lr);
    sched.best = kv_double(h, "sched.best", sched.best);
    sched.bad = static_cast<std::size_t>(kv_u64(h, "sched.bad", 0));
    out.best_val = kv_double(h, "train.best_val", out.best_val);
    out.best_epoch = static_cast<std::size_t>(kv_u64(h, "train.best_epoch", 0));
    out.best = *resume;
    check_contract(start_epoch < cfg.epochs,
                   "train: checkpoint already covers the requested epochs");
  }

  const std::size_t slots =
      cfg.threads <= 1 ? 1 : std::min<std::size_t>(cfg.batch, cfg.threads * 2);
  std::vector<Model<float>> clones;
  std::vector<ParamList<float>> clone_params;
  clones.reserve(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    clones.push_back(model.shared_clone());
    clone_params.push_back(clones.back().params());
  }
  std::vector<std::vector<double>> accum(params.size());
  for (std::size_t b = 0; b < params.size(); ++b)
    accum[b].resize(params[b].tensor.size());

  const std::size_t n = train_set.size();
  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr_used = sched.lr;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_sum = 0.0;
    for (std::size_t batch_start = 0; batch_start < n; batch_start += cfg.batch) {
      const std::size_t B = std::min(cfg.batch, n - batch_start);
      std::vector<std::uint64_t> seeds(B);
      for (auto& s : seeds) s = rng.next_u64();
      for (auto& a : accum) std::fill(a.begin(), a.end(), 0.0);
      std::vector<double> totals(B);
      std::vector<LossBreakdown> parts(B);

      for (std::size_t chunk = 0; chunk < B; chunk += slots) {
        const std::size_t C = std::min(slots, B - chunk);
        parallel_for(C, cfg.threads, [&](std::size_t s) {
          const std::size_t j = chunk + s;
          const auto& w = train_set[order[batch_start + j]];
          ForwardOptions opt;
          opt.train_mode = true;
          opt.decode_all = !cfg.decode_last_only;
          opt.seed = seeds[j];
          auto lr = window_loss(clones[s], w, opt);
          if (!std::isfinite(lr.parts.total)) {
            std::ostringstream os;
            os << "train: non-finite loss at epoch " << (epoch + 1) << ", batch "
               << (batch_start / cfg.batch + 1) << ", window " << w.scene_id << "/"
               << w.agent_id << "@" << w.start_frame << " (bom=" << lr.parts.bom_rmse
               << " goal=" << lr.parts.goal_rmse << " kld=" << lr.parts.kld << ")";
            throw NumericError(os.str());
          }
          totals[j] = lr.parts.total;
          parts[j] = lr.parts;
          backward(scale(lr.loss, 1.0 / static_cast<double>(B)));
        });
        for (std::size_t s = 0; s < C; ++s) {
          for (std::size_t b = 0; b < params.size(); ++b) {
            auto g = clone_params[s][b].tensor.grad();
            if (g.empty()) continue;
            auto& a = accum[b];
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += static_cast<double>(g[i]);
          }
          zero_grads(clone_params[s]);
        }
      }

      for (std::size_t b = 0; b < params.size(); ++b) {
        auto g = params[b].tensor.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(accum[b][i]);
      }
      adam.lr = sched.lr;
      adam_update(params, adam);
      zero_grads(params);

      double batch_sum = 0.0;
      LossBreakdown mean_parts;
      for (std::size_t j = 0; j < B; ++j) {
        batch_sum += totals[j];
        mean_parts.bom_rmse += parts[j].bom_rmse;
        mean_parts.goal_rmse += parts[j].goal_rmse;
        mean_parts.kld += parts[j].kld;
      }
      mean_parts.bom_rmse /= static_cast<double>(B);
      mean_parts.goal_rmse /= static_cast<double>(B);
      mean_parts.kld /= static_cast<double>(B);
      mean_parts.total = batch_sum / static_cast<double>(B);
      out.step_losses.push_back(static_cast<float>(mean_parts.total));
      out.step_parts.push_back(mean_parts);
      epoch_sum += batch_sum;
    }
    const double train_loss = epoch_sum / static_cast<double>(n);

    double val_loss = train_loss;
    if (!val_set.empty()) {
      std::vector<double> vt(val_set.size());
      parallel_for(val_set.size(), cfg.threads, [&](std::size_t i) {
        ForwardOptions opt;
        opt.train_mode = true;
        opt.decode_all = !cfg.decode_last_only;
        opt.seed = val_window_seed(cfg.seed, epoch, i);
        vt[i] = window_loss(model, val_set[i], opt).parts.total;
      });
      double s = 0.0;
      for (double v : vt) s += v;
      val_loss = s / static_cast<double>(val_set.size());
    }
    sched.observe(val_loss);

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.epochs.push_back({epoch + 1, train_loss, val_loss, lr_used, secs});
    if (val_loss < out.best_val) {
      out.best_val = val_loss;
      out.best_epoch = epoch + 1;
      out.best = snapshot(model, &adam,
                          train_state_header(epoch + 1, rng, sched, out.best_val,
                                             out.best_epoch));
    }
    if (progress) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "epoch %zu/%zu  train %.6f  val %.6f  lr %.2e  %.1fs\n", epoch + 1,
                    cfg.epochs, train_loss, val_loss, lr_used, secs);
      (*progress) << line << std::flush;
    }
  }

  out.last = snapshot(model, &adam,
                      train_state_header(cfg.epochs, rng, sched, out.best_val,
                                         out.best_epoch));
  if (!out.best.blocks.empty()) return out;
  out.best = out.last;
  return out;
}

WindowPrediction predict_window(const Model<float>& model, const ObservationWindow& w,
                                std::size_t k, std::uint64_t seed) {
  ForwardOptions opt;
  opt.train_mode = false;
  opt.decode_all = false;
  opt.seed = seed;
  opt.k_override = k;
  auto res = model.forward_window(w, opt);
  const auto& ps = res.steps.back();
  WindowPrediction out;
  out.proposals.reserve(ps.trajectories.size());
  for (const auto& traj : ps.trajectories) {
    std::vector<double> vals(traj.values().begin(), traj.values().end());
    out.proposals.push_back(denormalize_positions(w, vals));
  }
  out.gt = denormalize_positions(w, w.fut);
  std::vector<double> goals(ps.goal_positions.values().begin(),
                            ps.goal_positions.values().end());
  out.goals = denormalize_positions(w, goals);
  return out;
}

namespace {

void centroids(std::span<const double> boxes, std::size_t steps, std::vector<double>& out) {
  out.resize(steps * 2);
  for (std::size_t t = 0; t < steps; ++t) {
    out[t * 2] = 0.5 * (boxes[t * 4] + boxes[t * 4 + 2]);
    out[t * 2 + 1] = 0.5 * (boxes[t * 4 + 1] + boxes[t * 4 + 3]);
  }
}

}  // namespace

MetricReport evaluate(const Model<float>& model, const std::vector<ObservationWindow>& windows,
                      std::size_t k, std::vector<std::size_t> horizons, std::uint64_t seed,
                      std::size_t threads) {
  check_contract(!windows.empty(), "evaluate: empty window set");
  const auto& cfg = model.config();
  const std::size_t ld = cfg.pred_len;
  const std::size_t kk =
      cfg.mode == ModelMode::Deterministic ? 1 : (k ? k : cfg.k);
  if (horizons.empty()) horizons = {ld};
  for (std::size_t h : horizons)
    if (h < 1 || h > ld)
      throw ConfigError("evaluate: horizon " + std::to_string(h) + " outside 1.." +
                        std::to_string(ld));

  const bool boxes = cfg.output_dim == 4;
  std::vector<std::string> names = {"ade", "fde"};
  std::vector<std::size_t> steps_of = {ld, ld};
  if (boxes) {
    for (std::size_t h : horizons) {
      names.push_back("mse");
      steps_of.push_back(h);
    }
    names.insert(names.end(), {"c_mse", "cf_mse", "fiou"});
    steps_of.insert(steps_of.end(), {ld, ld, ld});
  }

  std::vector<std::vector<double>> per_window(windows.size());
  parallel_for(windows.size(), threads, [&](std::size_t i) {
    auto wp = predict_window(model, windows[i], kk, eval_window_seed(seed, i));
    std::vector<double> best(names.size());
    std::vector<double> pc, gc;
    if (boxes) centroids(wp.gt, ld, gc);
    for (std::size_t p = 0; p < wp.proposals.size(); ++p) {
      const auto& pred = wp.proposals[p];
      std::vector<double> vals(names.size());
      std::size_t m = 0;
      if (boxes) {
        centroids(pred, ld, pc);
        vals[m++] = ade(pc, gc, ld);
        vals[m++] = fde(pc, gc, ld);
        for (std::size_t h : horizons) vals[m++] = mse_bbox(pred, wp.gt, h);
        vals[m++] = c_mse(pred, wp.gt, ld);
        vals[m++] = cf_mse(pred, wp.gt, ld);
        // a regressed box with inverted corners is an empty box: no overlap
        const std::size_t t = ld - 1;
        const bool ordered =
            pred[t * 4 + 2] >= pred[t * 4] && pred[t * 4 + 3] >= pred[t * 4 + 1];
        vals[m++] = ordered ? fiou(pred, wp.gt, ld) : 0.0;
      } else {
        vals[m++] = ade(pred, wp.gt, ld);
        vals[m++] = fde(pred, wp.gt, ld);
      }
      for (std::size_t j = 0; j < names.size(); ++j) {
        const bool better =
            p == 0 || (names[j] == "fiou" ? vals[j] > best[j] : vals[j] < best[j]);
        if (better) best[j] = vals[j];
      }
    }
    per_window[i] = std::move(best);
  });

  MetricReport report;
  report.windows = windows.size();
  report.proposals = kk;
  for (std::size_t j = 0; j < names.size(); ++j) {
    double s = 0.0;
    for (const auto& pw : per_window) s += pw[j];
    report.add(names[j], steps_of[j], s / static_cast<double>(windows.size()));
  }
  return report;
}

std::string epochs_to_csv(const std::vector<EpochRow>& rows) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,lr,seconds\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.3f\n", r.epoch, r.train_loss,
                  r.val_loss, r.lr, r.seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace sgnet
