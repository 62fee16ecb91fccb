#pragma once
#include <string>

#include "music102/model.hpp"

namespace music102 {

// Binary checkpoint layout, little-endian:
//   bytes 0..3   magic "M102"
//   u32          format version (currently 1)
//   u64          config JSON length in bytes
//   ...          config JSON (ModelConfig::to_json)
//   u64          total number of f64 parameter scalars
//   ...          raw f64 parameter data, ParamSet declaration order
struct CheckpointData {
  ModelConfig config;
  ParamSet params;
};

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ParamSet& params);

// Throws CheckpointError on bad magic, unsupported version, or a scalar count
// that does not match the embedded config.
CheckpointData load_checkpoint(const std::string& path);

}  // namespace music102
