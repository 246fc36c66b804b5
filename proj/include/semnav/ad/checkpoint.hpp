#pragma once
// Weight checkpoint file: magic + version + named-tensor table with
// little-endian float32 payloads. Round trips bit-exactly.

#include <map>
#include <string>

#include "semnav/ad/nn.hpp"
#include "semnav/ad/tensor.hpp"

namespace semnav::ad {

inline constexpr char kCheckpointMagic[4] = {'S', 'N', 'W', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamSet& params);

// Loads into an existing ParamSet; every stored name/shape must match.
void load_checkpoint(const std::string& path, ParamSet& params);

// Reads the raw table (for tools and tests).
std::map<std::string, Tensor> read_checkpoint(const std::string& path);

}  // namespace semnav::ad
