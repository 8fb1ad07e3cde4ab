#pragma once

#include <map>
#include <string>
#include <vector>

#include "sgnet/adam.hpp"
#include "sgnet/model.hpp"

namespace sgnet {

struct ParamBlock {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

// On-disk model state: magic `SGN1`, a length-prefixed key=value text header
// (model config plus training-state keys), then named little-endian f32
// blocks with declared shapes. Round trips are bit-exact.
struct Checkpoint {
  std::map<std::string, std::string> header;
  std::vector<ParamBlock> blocks;

  ModelConfig model_config() const { return ModelConfig::from_kv(header, "model."); }
  const ParamBlock* find(const std::string& name) const;
};

void checkpoint_save(const std::string& path, const Checkpoint& c);
Checkpoint checkpoint_load(const std::string& path);

// Captures parameters (and optimizer moments as `adam.m.` / `adam.v.`
// blocks); `extra` lands in the header next to the model config.
Checkpoint snapshot(const Model<float>& m, const AdamState<float>* adam,
                    const std::map<std::string, std::string>& extra);
// The model must have been built from the checkpoint's config.
void restore_model(Model<float>& m, const Checkpoint& c);
void restore_adam(AdamState<float>& a, const Checkpoint& c);

}  // namespace sgnet
