#pragma once

#include <iosfwd>
#include <limits>

#include "sgnet/checkpoint.hpp"
#include "sgnet/data.hpp"
#include "sgnet/losses.hpp"
#include "sgnet/metrics.hpp"
#include "sgnet/model.hpp"

namespace sgnet {

struct TrainConfig {
  std::size_t batch = 128;
  std::size_t epochs = 50;
  double lr = 5e-4;
  double plateau_factor = 0.2;
  std::size_t plateau_patience = 5;
  double plateau_threshold = 1e-4;
  double min_lr = 1e-6;
  std::uint64_t seed = 1;
  bool decode_last_only = false;
  std::size_t k = 0;  // 0 = model config; anything else must agree with it
  std::size_t threads = 1;

  void validate() const;
  void to_kv(std::map<std::string, std::string>& kv, const std::string& prefix) const;
  static TrainConfig from_kv(const std::map<std::string, std::string>& kv,
                             const std::string& prefix);
};

// Multiplies lr by `factor` after `patience` consecutive epochs in which the
// observed loss failed to improve by more than `threshold`.
struct PlateauScheduler {
  double lr = 5e-4;
  double factor = 0.2;
  double min_lr = 1e-6;
  double threshold = 1e-4;
  std::size_t patience = 5;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;

  void observe(double val) {
    if (val < best - threshold) {
      best = val;
      bad = 0;
      return;
    }
    if (++bad >= patience) {
      lr = std::max(min_lr, lr * factor);
      bad = 0;
    }
  }
};

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRow> epochs;
  std::vector<float> step_losses;        // one entry per optimizer step
  std::vector<LossBreakdown> step_parts; // batch-mean loss components per step
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  Checkpoint best;   // lowest validation loss
  Checkpoint last;   // end of the run (resume point)
};

// Mean of total_loss over the decoded encoder steps of one window, targets
// cut from the window's full position sequence.
template <typename S>
LossResult<S> window_loss(const Model<S>& m, const ObservationWindow& w,
                          const ForwardOptions& opt);

// Mini-batch Adam over total_loss, single optimizer writer. Per-sample
// gradients reduce into a 64-bit accumulator in sample-index order, so the
// result is independent of the worker count. Pass `resume` to continue a run
// saved by this function.
TrainResult train(Model<float>& model, const std::vector<ObservationWindow>& train_set,
                  const std::vector<ObservationWindow>& val_set, const TrainConfig& cfg,
                  const Checkpoint* resume = nullptr, std::ostream* progress = nullptr);

// Best-of-K proposals for one window, de-normalized, plus matching ground
// truth. `seed` must come from eval_window_seed for reports to line up.
struct WindowPrediction {
  std::vector<std::vector<double>> proposals;  // K flat [pred_len x d]
  std::vector<double> gt;                      // flat [pred_len x d]
  std::vector<double> goals;                   // flat [pred_len x d]
};

std::uint64_t eval_window_seed(std::uint64_t base, std::size_t index);

WindowPrediction predict_window(const Model<float>& model, const ObservationWindow& w,
                                std::size_t k, std::uint64_t seed);

// Final-encoder-step predictions scored best-of-K per metric per window, then
// averaged over windows. `horizons` selects MSE step cutoffs for box data
// (empty = pred_len only).
MetricReport evaluate(const Model<float>& model, const std::vector<ObservationWindow>& windows,
                      std::size_t k, std::vector<std::size_t> horizons, std::uint64_t seed,
                      std::size_t threads = 1);

std::string epochs_to_csv(const std::vector<EpochRow>& rows);

}  // namespace sgnet
