#pragma once

#include <cstdint>
#include <string>

#include "spcse/model.hpp"
#include "spcse/runconfig.hpp"

namespace spcse {

// Binary model snapshot: run config, every weight tensor, the mask set, and the
// training step it was taken at.  The file carries a trailing CRC-32 so loads
// detect truncation or bit rot.
struct Checkpoint {
  RunConfig config;
  EncoderWeights weights;
  MaskSet masks;
  uint64_t step = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spcse
