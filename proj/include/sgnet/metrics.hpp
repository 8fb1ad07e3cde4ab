#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgnet/common.hpp"

namespace sgnet {

// Evaluation metrics over de-normalized trajectories, all in 64-bit.
// Point trajectories are flat [steps x 2] (x, y); box trajectories are flat
// [steps x 4] (x1, y1, x2, y2) with x1 <= x2, y1 <= y2.

double ade(std::span<const double> pred, std::span<const double> gt, std::size_t steps);
double fde(std::span<const double> pred, std::span<const double> gt, std::size_t steps);

// Mean squared error over the 4 stored corner coordinates up to `steps`.
double mse_bbox(std::span<const double> pred, std::span<const double> gt, std::size_t steps);
// Centroid variants: mean over the 2 centroid coordinates, all steps / final step.
double c_mse(std::span<const double> pred, std::span<const double> gt, std::size_t steps);
double cf_mse(std::span<const double> pred, std::span<const double> gt, std::size_t steps);
// Intersection-over-union of the final-step boxes; 0 when the union is empty.
double fiou(std::span<const double> pred, std::span<const double> gt, std::size_t steps);

struct MetricValue {
  std::string name;
  std::size_t horizon_steps = 0;
  double value = 0.0;
};

struct MetricReport {
  std::vector<MetricValue> entries;
  std::size_t windows = 0;
  std::size_t proposals = 0;

  void add(std::string name, std::size_t horizon_steps, double value);
  const MetricValue* find(const std::string& name, std::size_t horizon_steps) const;

  // One header line and one value row; keys look like "ade@12".
  std::string to_csv() const;
  std::string to_json() const;
};

}  // namespace sgnet
