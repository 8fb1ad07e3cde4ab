#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgnet/common.hpp"

namespace sgnet {

// One gap-free observation segment of a single agent. `state` is row-major
// [len x feat_dim]; the leading pos_dim columns are positions (x, y centroid
// or x1, y1, x2, y2 box), any further columns are derived motion features or
// auxiliary inputs.
struct AgentTrack {
  std::string scene_id;
  std::string agent_id;
  double fps = 2.5;
  std::int64_t frame_stride = 1;
  std::vector<std::int64_t> frames;
  std::size_t pos_dim = 2;
  std::size_t feat_dim = 2;
  std::vector<double> state;

  std::size_t len() const { return frames.size(); }
  double at(std::size_t row, std::size_t col) const { return state[row * feat_dim + col]; }
};

enum class DataFormat { BevText, BboxCsv, Synthetic };
enum class NormKind { Offset, Pixel };

struct DatasetSpec {
  DataFormat format = DataFormat::BevText;
  double fps = 2.5;
  std::size_t annotation_stride = 1;
  std::size_t obs_len = 8;
  std::size_t pred_len = 12;
  double overlap = 0.5;
  NormKind norm = NormKind::Offset;
  double frame_width = 1920.0;
  double frame_height = 1080.0;
};

// Sliding-window hop between window starts: ceil((1 - overlap) * window_len).
std::size_t window_stride(const DatasetSpec& spec);

// One training/evaluation example. `obs` is [obs_len x in_dim] features,
// `fut` is [pred_len x out_dim] future positions, `full_pos` the positions of
// the whole window; all three are in normalized coordinates once normalize()
// has run, with `anchor` retaining what is needed to undo it.
struct ObservationWindow {
  std::string scene_id;
  std::string agent_id;
  std::int64_t start_frame = 0;
  std::size_t obs_len = 0;
  std::size_t pred_len = 0;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> obs;
  std::vector<double> fut;
  std::vector<double> full_pos;
  std::vector<double> anchor;
  NormKind norm = NormKind::Offset;
  bool normalized = false;
};

// Loaders. Rows are grouped per agent, sorted by frame; an irregular frame
// delta splits the agent into separate segments.
std::vector<AgentTrack> load_bev_text(const std::string& path);
std::vector<AgentTrack> load_bbox_csv(const std::string& path);
void write_bev_text(const std::string& path, const std::vector<AgentTrack>& tracks);

// Appends velocity and acceleration columns (per position column, divided by
// the frame stride) right after the position block. The first rows are padded
// by repeating the earliest defined value. Throws ContractError when
// track.len() < 3.
AgentTrack derive_motion_features(const AgentTrack& track);
// Batch variant: skips too-short tracks, recording one warning line each.
std::vector<AgentTrack> derive_motion_features_all(const std::vector<AgentTrack>& tracks,
                                                   std::vector<std::string>* warnings);

// Cuts raw windows (no normalization) that never cross segment boundaries.
std::vector<ObservationWindow> make_windows(const std::vector<AgentTrack>& tracks,
                                            const DatasetSpec& spec);

// Offset kind subtracts the last observed position from every position
// column; pixel kind divides x-like columns by frame width and y-like by
// height (motion columns included, auxiliary columns untouched).
void normalize(ObservationWindow& w, const DatasetSpec& spec);
// Maps flat [n x out_dim] normalized positions back to the original frame.
std::vector<double> denormalize_positions(const ObservationWindow& w,
                                          std::span<const double> pos);

struct SplitPlan {
  double train_frac = 0.7;
  double val_frac = 0.0;
  double test_frac = 0.3;
  std::vector<std::string> train_scenes, val_scenes, test_scenes;
  std::uint64_t seed = 1;
};

// Track indices per partition.
struct SplitResult {
  std::vector<std::size_t> train, val, test;
};

// Scene lists win when given (disjointness enforced); otherwise a seeded
// shuffle is cut by the fractions.
SplitResult split_tracks(const std::vector<AgentTrack>& tracks, const SplitPlan& plan);
// One fold per distinct scene (sorted), that scene as test, the rest train.
std::vector<SplitResult> leave_one_out_folds(const std::vector<AgentTrack>& tracks);

}  // namespace sgnet
