#pragma once

#include <map>
#include <string>

#include "sgnet/data.hpp"
#include "sgnet/model.hpp"
#include "sgnet/training.hpp"

namespace sgnet {

// Merged run configuration: `model.*`, `train.*`, `data.*`, and `split.*`
// sections of a flat `key = value` file, plus command-line overrides applied
// on top before validation.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetSpec data;
  SplitPlan split;

  void validate() const;
  std::string to_text() const;
};

// `#` starts a comment, blank lines are skipped, keys may appear once.
std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin);
std::map<std::string, std::string> read_kv_file(const std::string& path);

// Unknown keys are rejected with the offending key in the message.
RunConfig run_config_from_kv(const std::map<std::string, std::string>& kv);
RunConfig load_run_config(const std::string& path,
                          const std::map<std::string, std::string>& overrides);

}  // namespace sgnet
