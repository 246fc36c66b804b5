#include "semnav/world/world_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace semnav::world {

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::vector<unsigned char> doubles_to_bytes(const std::vector<double>& v) {
  std::vector<unsigned char> out(v.size() * 8);
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

std::vector<double> bytes_to_doubles(const std::vector<unsigned char>& b) {
  if (b.size() % 8 != 0) throw std::runtime_error("world file: bad double payload length");
  std::vector<double> out(b.size() / 8);
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}
}  // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (size_t i = 0; i < len; i += 3) {
    uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
    if (i + 1 < len) chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
    if (i + 2 < len) chunk |= static_cast<uint32_t>(data[i + 2]);
    out.push_back(kB64Alphabet[(chunk >> 18) & 0x3F]);
    out.push_back(kB64Alphabet[(chunk >> 12) & 0x3F]);
    out.push_back(i + 1 < len ? kB64Alphabet[(chunk >> 6) & 0x3F] : '=');
    out.push_back(i + 2 < len ? kB64Alphabet[chunk & 0x3F] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw std::runtime_error("base64: invalid character");
  };
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i + 3 < text.size(); i += 4) {
    const int a = val(text[i]), b = val(text[i + 1]), c = val(text[i + 2]),
              d = val(text[i + 3]);
    const uint32_t chunk = (static_cast<uint32_t>(a) << 18) | (static_cast<uint32_t>(b) << 12) |
                           ((c < 0 ? 0u : static_cast<uint32_t>(c)) << 6) |
                           (d < 0 ? 0u : static_cast<uint32_t>(d));
    out.push_back(static_cast<unsigned char>((chunk >> 16) & 0xFF));
    if (c >= 0) out.push_back(static_cast<unsigned char>((chunk >> 8) & 0xFF));
    if (d >= 0) out.push_back(static_cast<unsigned char>(chunk & 0xFF));
  }
  return out;
}

void save_world(const std::string& path, const WorldModel& w) {
  nlohmann::json j;
  j["cell_size"] = w.cell_size;
  j["nx"] = w.nx;
  j["ny"] = w.ny;
  j["seed"] = w.seed;
  j["canopy_thickness"] = w.canopy_thickness;
  j["start"] = {w.start_x, w.start_y};
  j["goal"] = {w.goal_x, w.goal_y};
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& d : w.registry.all())
    classes.push_back({{"name", d.name},
                       {"elevation", d.elevation},
                       {"strict", d.strict},
                       {"intensity", d.intensity}});
  j["classes"] = classes;
  j["class_grid"] = base64_encode(w.class_grid.data(), w.class_grid.size());
  const auto elev = doubles_to_bytes(w.elevation);
  j["elevation"] = base64_encode(elev.data(), elev.size());
  const auto can = doubles_to_bytes(w.canopy_base);
  j["canopy_base"] = base64_encode(can.data(), can.size());

  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_world: cannot open " + path);
  os << j.dump(2) << "\n";
}

WorldModel load_world(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_world: cannot open " + path);
  nlohmann::json j;
  is >> j;
  WorldModel w;
  w.cell_size = j.at("cell_size").get<double>();
  w.nx = j.at("nx").get<int64_t>();
  w.ny = j.at("ny").get<int64_t>();
  w.seed = j.at("seed").get<uint64_t>();
  w.canopy_thickness = j.at("canopy_thickness").get<double>();
  w.start_x = j.at("start")[0].get<double>();
  w.start_y = j.at("start")[1].get<double>();
  w.goal_x = j.at("goal")[0].get<double>();
  w.goal_y = j.at("goal")[1].get<double>();
  for (const auto& c : j.at("classes"))
    w.registry.add({c.at("name").get<std::string>(), c.at("elevation").get<double>(),
                    c.at("strict").get<bool>(), c.at("intensity").get<double>()});
  const auto cls = base64_decode(j.at("class_grid").get<std::string>());
  w.class_grid.assign(cls.begin(), cls.end());
  w.elevation = bytes_to_doubles(base64_decode(j.at("elevation").get<std::string>()));
  w.canopy_base = bytes_to_doubles(base64_decode(j.at("canopy_base").get<std::string>()));
  if (static_cast<int64_t>(w.class_grid.size()) != w.nx * w.ny)
    throw std::runtime_error("load_world: grid size disagrees with header");
  return w;
}

WorldGenSpec load_gen_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_gen_spec: cannot open " + path);
  nlohmann::json j;
  is >> j;
  WorldGenSpec s;
  if (j.contains("extent_m")) s.extent_m = j["extent_m"].get<double>();
  if (j.contains("cell_size")) s.cell_size = j["cell_size"].get<double>();
  if (j.contains("grass_fraction")) s.grass_fraction = j["grass_fraction"].get<double>();
  if (j.contains("sand_fraction")) s.sand_fraction = j["sand_fraction"].get<double>();
  if (j.contains("obstacle_density")) s.obstacle_density = j["obstacle_density"].get<double>();
  if (j.contains("wall_fraction")) s.wall_fraction = j["wall_fraction"].get<double>();
  if (j.contains("hole_fraction")) s.hole_fraction = j["hole_fraction"].get<double>();
  if (j.contains("canopy")) s.canopy = j["canopy"].get<bool>();
  return s;
}

}  // namespace semnav::world
