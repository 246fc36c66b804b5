#pragma once
// World file: JSON header (cell size, extents, registry, seed, anchors) with
// base64 grid payloads. Round trips bit-exactly.

#include <string>

#include "semnav/world/world.hpp"
#include "semnav/world/worldgen.hpp"

namespace semnav::world {

void save_world(const std::string& path, const WorldModel& world);
WorldModel load_world(const std::string& path);

WorldGenSpec load_gen_spec(const std::string& path);

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace semnav::world
