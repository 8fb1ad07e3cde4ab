#include "sgnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sgnet/random.hpp"

namespace sgnet {

namespace {

std::string scene_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

struct Row {
  std::int64_t frame;
  std::vector<double> cols;
  std::size_t line;
};

// Split per-agent rows into constant-stride segments. The agent's stride is
// its smallest positive frame delta; any larger delta opens a new segment.
std::vector<AgentTrack> segment_agent(const std::string& scene, const std::string& agent,
                                      double fps, std::size_t pos_dim, std::size_t feat_dim,
                                      std::vector<Row> rows, const std::string& path) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.frame < b.frame; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].frame == rows[i - 1].frame)
      parse_fail(path, rows[i].line,
                 "duplicate frame " + std::to_string(rows[i].frame) + " for agent " + agent);
  std::int64_t stride = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::int64_t d = rows[i].frame - rows[i - 1].frame;
    if (stride == 0 || d < stride) stride = d;
  }
  if (stride == 0) stride = 1;

  std::vector<AgentTrack> out;
  std::size_t seg_start = 0;
  auto flush = [&](std::size_t begin, std::size_t end) {
    AgentTrack t;
    t.scene_id = scene;
    t.agent_id = agent;
    t.fps = fps;
    t.frame_stride = stride;
    t.pos_dim = pos_dim;
    t.feat_dim = feat_dim;
    t.frames.reserve(end - begin);
    t.state.reserve((end - begin) * feat_dim);
    for (std::size_t i = begin; i < end; ++i) {
      t.frames.push_back(rows[i].frame);
      t.state.insert(t.state.end(), rows[i].cols.begin(), rows[i].cols.end());
    }
    out.push_back(std::move(t));
  };
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].frame - rows[i - 1].frame != stride) {
      flush(seg_start, i);
      seg_start = i;
    }
  }
  if (!rows.empty()) flush(seg_start, rows.size());
  return out;
}

std::vector<AgentTrack> group_rows(
    const std::string& path, double fps, std::size_t pos_dim, std::size_t feat_dim,
    const std::vector<std::pair<std::string, Row>>& rows) {
  // first-seen agent order keeps output deterministic
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> by_agent;
  for (const auto& [agent, row] : rows) {
    auto [it, fresh] = by_agent.try_emplace(agent);
    if (fresh) order.push_back(agent);
    it->second.push_back(row);
  }
  const std::string scene = scene_stem(path);
  std::vector<AgentTrack> out;
  for (const auto& agent : order) {
    auto segs = segment_agent(scene, agent, fps, pos_dim, feat_dim,
                              std::move(by_agent[agent]), path);
    for (auto& s : segs) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<AgentTrack> load_bev_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::pair<std::string, Row>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double frame_raw;
    std::string agent;
    double x, y;
    if (!(ls >> frame_raw >> agent >> x >> y))
      parse_fail(path, lineno, "expected `frame agent_id x y`");
    std::string extra;
    if (ls >> extra) parse_fail(path, lineno, "trailing token `" + extra + "`");
    if (!std::isfinite(frame_raw) || !std::isfinite(x) || !std::isfinite(y))
      parse_fail(path, lineno, "non-finite value");
    if (frame_raw != std::floor(frame_raw))
      parse_fail(path, lineno, "frame must be an integer");
    rows.push_back({agent, {static_cast<std::int64_t>(frame_raw), {x, y}, lineno}});
  }
  return group_rows(path, 2.5, 2, 2, rows);
}

std::vector<AgentTrack> load_bbox_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    f.push_back(cur);
    return f;
  };
  const auto header = split(line);
  const std::vector<std::string> required = {"frame", "agent_id", "x1", "y1", "x2", "y2"};
  if (header.size() < required.size())
    throw ParseError(path + ":1: header must start with frame,agent_id,x1,y1,x2,y2");
  for (std::size_t i = 0; i < required.size(); ++i)
    if (header[i] != required[i])
      throw ParseError(path + ":1: header column " + std::to_string(i + 1) + " must be `" +
                       required[i] + "`, got `" + header[i] + "`");
  const std::size_t aux = header.size() - required.size();

  std::vector<std::pair<std::string, Row>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split(line);
    if (f.size() != header.size())
      parse_fail(path, lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(f.size()));
    Row row;
    row.line = lineno;
    try {
      std::size_t used = 0;
      row.frame = std::stoll(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument(f[0]);
      row.cols.reserve(4 + aux);
      for (std::size_t i = 2; i < f.size(); ++i) {
        row.cols.push_back(std::stod(f[i], &used));
        if (used != f[i].size()) throw std::invalid_argument(f[i]);
      }
    } catch (const std::exception&) {
      parse_fail(path, lineno, "malformed numeric field");
    }
    for (double v : row.cols)
      if (!std::isfinite(v)) parse_fail(path, lineno, "non-finite value");
    if (row.cols[2] < row.cols[0] || row.cols[3] < row.cols[1])
      parse_fail(path, lineno, "box corners out of order (need x2 >= x1 and y2 >= y1)");
    rows.push_back({f[1], std::move(row)});
  }
  return group_rows(path, 30.0, 4, 4 + aux, rows);
}

void write_bev_text(const std::string& path, const std::vector<AgentTrack>& tracks) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[128];
  for (const auto& t : tracks) {
    check_contract(t.pos_dim == 2, "write_bev_text: point tracks only");
    for (std::size_t i = 0; i < t.len(); ++i) {
      std::snprintf(buf, sizeof(buf), "%lld %s %.17g %.17g\n",
                    static_cast<long long>(t.frames[i]), t.agent_id.c_str(), t.at(i, 0),
                    t.at(i, 1));
      out << buf;
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

AgentTrack derive_motion_features(const AgentTrack& track) {
  check_contract(track.len() >= 3,
                 "derive_motion_features: track shorter than 3 frames (" + track.scene_id +
                     "/" + track.agent_id + ")");
  const std::size_t n = track.len();
  const std::size_t d = track.pos_dim;
  const double h = static_cast<double>(track.frame_stride);
  std::vector<double> vel(n * d), acc(n * d);
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t c = 0; c < d; ++c)
      vel[t * d + c] = (track.at(t, c) - track.at(t - 1, c)) / h;
  for (std::size_t c = 0; c < d; ++c) vel[c] = vel[d + c];
  for (std::size_t t = 2; t < n; ++t)
    for (std::size_t c = 0; c < d; ++c)
      acc[t * d + c] = (vel[t * d + c] - vel[(t - 1) * d + c]) / h;
  for (std::size_t c = 0; c < d; ++c) {
    acc[c] = acc[2 * d + c];
    acc[d + c] = acc[2 * d + c];
  }

  AgentTrack out = track;
  out.feat_dim = track.feat_dim + 2 * d;
  out.state.assign(n * out.feat_dim, 0.0);
  const std::size_t tail = track.feat_dim - d;  // auxiliary columns shift back
  for (std::size_t t = 0; t < n; ++t) {
    double* row = out.state.data() + t * out.feat_dim;
    for (std::size_t c = 0; c < d; ++c) row[c] = track.at(t, c);
    for (std::size_t c = 0; c < d; ++c) row[d + c] = vel[t * d + c];
    for (std::size_t c = 0; c < d; ++c) row[2 * d + c] = acc[t * d + c];
    for (std::size_t c = 0; c < tail; ++c) row[3 * d + c] = track.at(t, d + c);
  }
  return out;
}

std::vector<AgentTrack> derive_motion_features_all(const std::vector<AgentTrack>& tracks,
                                                   std::vector<std::string>* warnings) {
  std::vector<AgentTrack> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) {
    if (t.len() < 3) {
      if (warnings)
        warnings->push_back("skipping track " + t.scene_id + "/" + t.agent_id +
                            ": only " + std::to_string(t.len()) + " frames");
      continue;
    }
    out.push_back(derive_motion_features(t));
  }
  return out;
}

std::size_t window_stride(const DatasetSpec& spec) {
  check_contract(spec.overlap >= 0.0 && spec.overlap < 1.0,
                 "window_stride: overlap must lie in [0, 1)");
  const double len = static_cast<double>(spec.obs_len + spec.pred_len);
  const auto s = static_cast<std::size_t>(std::ceil((1.0 - spec.overlap) * len - 1e-9));
  return std::max<std::size_t>(1, s);
}

std::vector<ObservationWindow> make_windows(const std::vector<AgentTrack>& tracks,
                                            const DatasetSpec& spec) {
  check_contract(spec.obs_len >= 1 && spec.pred_len >= 1,
                 "make_windows: obs_len and pred_len must be >= 1");
  const std::size_t L = spec.obs_len + spec.pred_len;
  const std::size_t hop = window_stride(spec);
  std::vector<ObservationWindow> out;
  for (const auto& t : tracks) {
    if (t.len() < L) continue;
    check_contract(t.feat_dim >= t.pos_dim, "make_windows: malformed track");
    for (std::size_t start = 0; start + L <= t.len(); start += hop) {
      ObservationWindow w;
      w.scene_id = t.scene_id;
      w.agent_id = t.agent_id;
      w.start_frame = t.frames[start];
      w.obs_len = spec.obs_len;
      w.pred_len = spec.pred_len;
      w.in_dim = t.feat_dim;
      w.out_dim = t.pos_dim;
      w.obs.resize(spec.obs_len * t.feat_dim);
      for (std::size_t i = 0; i < spec.obs_len; ++i)
        for (std::size_t c = 0; c < t.feat_dim; ++c)
          w.obs[i * t.feat_dim + c] = t.at(start + i, c);
      w.fut.resize(spec.pred_len * t.pos_dim);
      for (std::size_t i = 0; i < spec.pred_len; ++i)
        for (std::size_t c = 0; c < t.pos_dim; ++c)
          w.fut[i * t.pos_dim + c] = t.at(start + spec.obs_len + i, c);
      w.full_pos.resize(L * t.pos_dim);
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t c = 0; c < t.pos_dim; ++c)
          w.full_pos[i * t.pos_dim + c] = t.at(start + i, c);
      out.push_back(std::move(w));
    }
  }
  return out;
}

namespace {

// Columns holding coordinate-like values: positions plus derived motion
// blocks. Returns how many leading columns of `obs` scale like positions.
std::size_t coordinate_cols(const ObservationWindow& w) {
  const std::size_t d = w.out_dim;
  if (w.in_dim >= 3 * d) return 3 * d;  // position, velocity, acceleration
  return d;
}

}  // namespace

void normalize(ObservationWindow& w, const DatasetSpec& spec) {
  check_contract(!w.normalized, "normalize: window already normalized");
  const std::size_t d = w.out_dim;
  w.norm = spec.norm;
  if (spec.norm == NormKind::Offset) {
    w.anchor.assign(w.full_pos.begin() + (w.obs_len - 1) * d,
                    w.full_pos.begin() + w.obs_len * d);
    for (std::size_t i = 0; i < w.obs_len; ++i)
      for (std::size_t c = 0; c < d; ++c) w.obs[i * w.in_dim + c] -= w.anchor[c];
    for (std::size_t i = 0; i < w.pred_len; ++i)
      for (std::size_t c = 0; c < d; ++c) w.fut[i * d + c] -= w.anchor[c];
    for (std::size_t i = 0; i < w.obs_len + w.pred_len; ++i)
      for (std::size_t c = 0; c < d; ++c) w.full_pos[i * d + c] -= w.anchor[c];
  } else if (spec.norm == NormKind::Pixel) {
    check_contract(spec.frame_width > 0 && spec.frame_height > 0,
                   "normalize: pixel kind needs positive frame extents");
    w.anchor = {spec.frame_width, spec.frame_height};
    // even coordinate indices are x-like, odd are y-like
    const std::size_t cc = coordinate_cols(w);
    auto axis = [&](std::size_t c) { return (c % 2 == 0) ? spec.frame_width : spec.frame_height; };
    for (std::size_t i = 0; i < w.obs_len; ++i)
      for (std::size_t c = 0; c < cc; ++c) w.obs[i * w.in_dim + c] /= axis(c);
    for (std::size_t i = 0; i < w.pred_len; ++i)
      for (std::size_t c = 0; c < d; ++c) w.fut[i * d + c] /= axis(c);
    for (std::size_t i = 0; i < w.obs_len + w.pred_len; ++i)
      for (std::size_t c = 0; c < d; ++c) w.full_pos[i * d + c] /= axis(c);
  } else {
    throw ConfigError("normalize: unknown normalization kind");
  }
  w.normalized = true;
}

std::vector<double> denormalize_positions(const ObservationWindow& w,
                                          std::span<const double> pos) {
  const std::size_t d = w.out_dim;
  check_dim(d > 0 && pos.size() % d == 0, "denormalize_positions: size not a multiple of dim");
  std::vector<double> out(pos.begin(), pos.end());
  if (!w.normalized) return out;
  const std::size_t n = pos.size() / d;
  if (w.norm == NormKind::Offset) {
    check_contract(w.anchor.size() == d, "denormalize_positions: missing anchor");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += w.anchor[c];
  } else {
    check_contract(w.anchor.size() == 2, "denormalize_positions: missing frame extents");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c)
        out[i * d + c] *= (c % 2 == 0) ? w.anchor[0] : w.anchor[1];
  }
  return out;
}

namespace {

std::vector<std::string> distinct_scenes(const std::vector<AgentTrack>& tracks) {
  std::set<std::string> s;
  for (const auto& t : tracks) s.insert(t.scene_id);
  return {s.begin(), s.end()};
}

}  // namespace

SplitResult split_tracks(const std::vector<AgentTrack>& tracks, const SplitPlan& plan) {
  SplitResult res;
  const bool by_scene =
      !plan.train_scenes.empty() || !plan.val_scenes.empty() || !plan.test_scenes.empty();
  if (by_scene) {
    std::set<std::string> train(plan.train_scenes.begin(), plan.train_scenes.end());
    std::set<std::string> val(plan.val_scenes.begin(), plan.val_scenes.end());
    std::set<std::string> test(plan.test_scenes.begin(), plan.test_scenes.end());
    for (const auto& s : train)
      if (val.count(s) || test.count(s))
        throw ConfigError("split: scene `" + s + "` assigned to multiple partitions");
    for (const auto& s : val)
      if (test.count(s))
        throw ConfigError("split: scene `" + s + "` assigned to multiple partitions");
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const auto& sc = tracks[i].scene_id;
      if (train.count(sc)) res.train.push_back(i);
      else if (val.count(sc)) res.val.push_back(i);
      else if (test.count(sc)) res.test.push_back(i);
    }
    return res;
  }
  check_contract(plan.train_frac >= 0 && plan.val_frac >= 0 && plan.test_frac >= 0 &&
                     plan.train_frac + plan.val_frac + plan.test_frac <= 1.0 + 1e-9,
                 "split: fractions must be nonnegative and sum to at most 1");
  std::vector<std::size_t> idx(tracks.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  RandomStream rng(plan.seed);
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
  const auto n = tracks.size();
  const auto n_train = static_cast<std::size_t>(std::llround(plan.train_frac * n));
  const auto n_val = static_cast<std::size_t>(std::llround(plan.val_frac * n));
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) res.train.push_back(idx[i]);
    else if (i < n_train + n_val) res.val.push_back(idx[i]);
    else if (i < n_train + n_val +
                     static_cast<std::size_t>(std::llround(plan.test_frac * n)))
      res.test.push_back(idx[i]);
  }
  std::sort(res.train.begin(), res.train.end());
  std::sort(res.val.begin(), res.val.end());
  std::sort(res.test.begin(), res.test.end());
  return res;
}

std::vector<SplitResult> leave_one_out_folds(const std::vector<AgentTrack>& tracks) {
  std::vector<SplitResult> folds;
  for (const auto& scene : distinct_scenes(tracks)) {
    SplitResult r;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (tracks[i].scene_id == scene) r.test.push_back(i);
      else r.train.push_back(i);
    }
    folds.push_back(std::move(r));
  }
  return folds;
}

}  // namespace sgnet
