#pragma once

#include <string>
#include <vector>

#include "sgnet/model.hpp"
#include "sgnet/training.hpp"

namespace sgnet {

struct GradCheckRow {
  std::string block;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // probes where the loss is not locally smooth
  double worst_rel = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  double worst_rel = 0.0;
  std::string worst_block;
  double tol = 0.0;
  bool pass = false;
};

// Central finite differences against reverse-mode gradients at full double
// precision on a randomly initialized model and a synthetic window. At least
// `probes` entries are checked, spread over every parameter block. rel =
// |a - b| / max(|a|, |b|); entries where both magnitudes are below 1e-8 pass
// outright. Each probe is measured at two step sizes; when the two quotients
// disagree the entry sits on a non-smooth point (relu kink, best-of-K switch)
// or below the noise floor, and a replacement index is probed instead.
GradCheckReport gradcheck_model(const ModelConfig& cfg, std::uint64_t seed,
                                std::size_t probes, double tol, double step = 1e-4);

std::string gradcheck_to_text(const GradCheckReport& r);

}  // namespace sgnet
