#include "sgnet/synth.hpp"

#include <cmath>

namespace sgnet {

SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "constant-velocity") return SynthKind::ConstantVelocity;
  if (s == "piecewise-goal") return SynthKind::PiecewiseGoal;
  if (s == "circular") return SynthKind::Circular;
  throw ConfigError("unknown synthetic kind `" + s +
                    "` (expected constant-velocity, piecewise-goal or circular)");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> gen_constant_velocity(const SynthConfig& cfg, RandomStream& rng) {
  const double x0 = rng.uniform(-10.0, 10.0);
  const double y0 = rng.uniform(-10.0, 10.0);
  const double ang = rng.uniform(0.0, 2.0 * kPi);
  const double sp = cfg.speed * rng.uniform(0.5, 1.5);
  const double vx = sp * std::cos(ang), vy = sp * std::sin(ang);
  std::vector<double> pos(cfg.len * 2);
  for (std::size_t t = 0; t < cfg.len; ++t) {
    pos[t * 2] = x0 + vx * static_cast<double>(t);
    pos[t * 2 + 1] = y0 + vy * static_cast<double>(t);
  }
  return pos;
}

std::vector<double> gen_piecewise_goal(const SynthConfig& cfg, RandomStream& rng) {
  check_contract(cfg.goal_every >= 1, "synth: goal_every must be >= 1");
  double x = rng.uniform(-10.0, 10.0);
  double y = rng.uniform(-10.0, 10.0);
  double gx = x, gy = y;
  std::vector<double> pos(cfg.len * 2);
  for (std::size_t t = 0; t < cfg.len; ++t) {
    if (t % cfg.goal_every == 0) {
      // goal placed within reach of the next G unit steps
      const double ang = rng.uniform(0.0, 2.0 * kPi);
      const double dist =
          cfg.speed * static_cast<double>(cfg.goal_every) * rng.uniform(0.3, 0.9);
      gx = x + dist * std::cos(ang);
      gy = y + dist * std::sin(ang);
    }
    pos[t * 2] = x;
    pos[t * 2 + 1] = y;
    const double dx = gx - x, dy = gy - y;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d > 1e-12) {
      const double step = std::min(cfg.speed, d);
      x += step * dx / d;
      y += step * dy / d;
    }
  }
  return pos;
}

std::vector<double> gen_circular(const SynthConfig& cfg, RandomStream& rng) {
  const double cx = rng.uniform(-10.0, 10.0);
  const double cy = rng.uniform(-10.0, 10.0);
  const double r = rng.uniform(2.0, 8.0);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double omega = (rng.uniform() < 0.5 ? -1.0 : 1.0) * cfg.speed / r;
  std::vector<double> pos(cfg.len * 2);
  for (std::size_t t = 0; t < cfg.len; ++t) {
    const double a = phase + omega * static_cast<double>(t);
    pos[t * 2] = cx + r * std::cos(a);
    pos[t * 2 + 1] = cy + r * std::sin(a);
  }
  return pos;
}

}  // namespace

std::vector<AgentTrack> synth_generate(const SynthConfig& cfg) {
  check_contract(cfg.len >= 1, "synth: track length must be >= 1");
  RandomStream rng(cfg.seed);
  std::vector<AgentTrack> out;
  out.reserve(cfg.tracks);
  for (std::size_t k = 0; k < cfg.tracks; ++k) {
    std::vector<double> pos;
    switch (cfg.kind) {
      case SynthKind::ConstantVelocity: pos = gen_constant_velocity(cfg, rng); break;
      case SynthKind::PiecewiseGoal: pos = gen_piecewise_goal(cfg, rng); break;
      case SynthKind::Circular: pos = gen_circular(cfg, rng); break;
    }
    if (cfg.sigma > 0.0)
      for (auto& v : pos) v += cfg.sigma * rng.normal();
    AgentTrack t;
    t.scene_id = "synthetic";
    t.agent_id = std::to_string(k);
    t.fps = cfg.fps;
    t.frame_stride = 1;
    t.frames.resize(cfg.len);
    for (std::size_t i = 0; i < cfg.len; ++i) t.frames[i] = static_cast<std::int64_t>(i);
    t.pos_dim = 2;
    t.feat_dim = 2;
    t.state = std::move(pos);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace sgnet
