#pragma once

#include <string>

#include "voyagecast/features.hpp"
#include "voyagecast/model.hpp"
#include "voyagecast/train.hpp"

namespace voyagecast {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to resume training or run inference.
struct Checkpoint {
  model::ModelConfig model;
  model::VocabSizes vocab;
  features::FeatureStats stats;
  model::ModelParams params;
  train::AdamState adam;
  int epoch = -1;
  double val_loss = 0.0;
};

/// Version-tagged JSON document. Doubles are written in shortest
/// round-trip form, so save/load is lossless.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

model::VocabSizes vocab_sizes(const features::FeatureStats& stats, int slots_per_day);

}  // namespace voyagecast
