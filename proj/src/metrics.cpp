#include "sgnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sgnet {

namespace {

void check_steps(std::span<const double> pred, std::span<const double> gt, std::size_t steps,
                 std::size_t dim, const char* who) {
  check_dim(steps > 0, std::string(who) + ": empty trajectory");
  check_dim(pred.size() >= steps * dim && gt.size() >= steps * dim,
            std::string(who) + ": horizon " + std::to_string(steps) +
                " exceeds trajectory length");
}

}  // namespace

double ade(std::span<const double> pred, std::span<const double> gt, std::size_t steps) {
  check_steps(pred, gt, steps, 2, "ade");
  double acc = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double dx = pred[t * 2] - gt[t * 2];
    const double dy = pred[t * 2 + 1] - gt[t * 2 + 1];
    acc += std::sqrt(dx * dx + dy * dy);
  }
  return acc / static_cast<double>(steps);
}

double fde(std::span<const double> pred, std::span<const double> gt, std::size_t steps) {
  check_steps(pred, gt, steps, 2, "fde");
  const std::size_t t = steps - 1;
  const double dx = pred[t * 2] - gt[t * 2];
  const double dy = pred[t * 2 + 1] - gt[t * 2 + 1];
  return std::sqrt(dx * dx + dy * dy);
}

double mse_bbox(std::span<const double> pred, std::span<const double> gt, std::size_t steps) {
  check_steps(pred, gt, steps, 4, "mse_bbox");
  double acc = 0.0;
  for (std::size_t i = 0; i < steps * 4; ++i) {
    const double d = pred[i] - gt[i];
    acc += d * d;
  }
  return acc / static_cast<double>(steps * 4);
}

double c_mse(std::span<const double> pred, std::span<const double> gt, std::size_t steps) {
  check_steps(pred, gt, steps, 4, "c_mse");
  double acc = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double pcx = 0.5 * (pred[t * 4] + pred[t * 4 + 2]);
    const double pcy = 0.5 * (pred[t * 4 + 1] + pred[t * 4 + 3]);
    const double gcx = 0.5 * (gt[t * 4] + gt[t * 4 + 2]);
    const double gcy = 0.5 * (gt[t * 4 + 1] + gt[t * 4 + 3]);
    acc += ((pcx - gcx) * (pcx - gcx) + (pcy - gcy) * (pcy - gcy)) / 2.0;
  }
  return acc / static_cast<double>(steps);
}

double cf_mse(std::span<const double> pred, std::span<const double> gt, std::size_t steps) {
  check_steps(pred, gt, steps, 4, "cf_mse");
  const std::size_t t = steps - 1;
  return c_mse(pred.subspan(t * 4, 4), gt.subspan(t * 4, 4), 1);
}

double fiou(std::span<const double> pred, std::span<const double> gt, std::size_t steps) {
  check_steps(pred, gt, steps, 4, "fiou");
  const std::size_t t = steps - 1;
  const double px1 = pred[t * 4], py1 = pred[t * 4 + 1];
  const double px2 = pred[t * 4 + 2], py2 = pred[t * 4 + 3];
  const double gx1 = gt[t * 4], gy1 = gt[t * 4 + 1];
  const double gx2 = gt[t * 4 + 2], gy2 = gt[t * 4 + 3];
  check_contract(px2 >= px1 && py2 >= py1 && gx2 >= gx1 && gy2 >= gy1,
                 "fiou: boxes must have nonnegative extents");
  const double iw = std::max(0.0, std::min(px2, gx2) - std::max(px1, gx1));
  const double ih = std::max(0.0, std::min(py2, gy2) - std::max(py1, gy1));
  const double inter = iw * ih;
  const double area_p = (px2 - px1) * (py2 - py1);
  const double area_g = (gx2 - gx1) * (gy2 - gy1);
  const double uni = area_p + area_g - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

void MetricReport::add(std::string name, std::size_t horizon_steps, double value) {
  entries.push_back({std::move(name), horizon_steps, value});
}

const MetricValue* MetricReport::find(const std::string& name,
                                      std::size_t horizon_steps) const {
  for (const auto& e : entries)
    if (e.name == name && e.horizon_steps == horizon_steps) return &e;
  return nullptr;
}

namespace {

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string MetricReport::to_csv() const {
  std::ostringstream head, row;
  head << "windows,proposals";
  row << windows << ',' << proposals;
  for (const auto& e : entries) {
    head << ',' << e.name << '@' << e.horizon_steps;
    row << ',' << format_value(e.value);
  }
  return head.str() + "\n" + row.str() + "\n";
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["windows"] = windows;
  j["proposals"] = proposals;
  j["box_mse_convention"] = "mean over the 4 stored corner coordinates";
  nlohmann::json m = nlohmann::json::object();
  for (const auto& e : entries)
    m[e.name + "@" + std::to_string(e.horizon_steps)] = e.value;
  j["metrics"] = m;
  return j.dump(2) + "\n";
}

}  // namespace sgnet
