#include "semnav/world/world.hpp"

#include <cmath>
#include <stdexcept>

namespace semnav::world {

uint8_t ClassRegistry::add(ClassDef def) {
  if (find(def.name)) throw std::invalid_argument("ClassRegistry: duplicate class " + def.name);
  defs_.push_back(std::move(def));
  return static_cast<uint8_t>(defs_.size() - 1);
}

std::optional<uint8_t> ClassRegistry::find(const std::string& name) const {
  for (size_t i = 0; i < defs_.size(); ++i)
    if (defs_[i].name == name) return static_cast<uint8_t>(i);
  return std::nullopt;
}

ClassRegistry default_registry() {
  ClassRegistry reg;
  reg.add({"pavement", 0.0, false, 0.45});
  reg.add({"grass", 0.05, false, 0.30});
  reg.add({"sand", 0.02, false, 0.55});
  reg.add({"tree", 2.0, true, 0.25});
  reg.add({"wall", 1.5, true, 0.60});
  reg.add({"stairs", 0.5, true, 0.50});
  reg.add({"person", 1.7, true, 0.35});
  reg.add({"hole", -1.0, true, 0.10});
  return reg;
}

void WorldModel::validate(double step_height) const {
  if (nx <= 0 || ny <= 0) throw std::invalid_argument("WorldModel: empty grids");
  const size_t n = static_cast<size_t>(nx * ny);
  if (class_grid.size() != n || elevation.size() != n || canopy_base.size() != n)
    throw std::invalid_argument("WorldModel: class/elevation/canopy extents disagree");
  for (size_t i = 0; i < n; ++i) {
    const ClassDef& d = registry.def(class_grid[i]);
    if (d.strict) {
      if (std::fabs(elevation[i]) < step_height)
        throw std::invalid_argument("WorldModel: strict cell '" + d.name +
                                    "' with undetectable elevation at index " +
                                    std::to_string(i));
    } else if (d.name == "grass" && elevation[i] > 0.1) {
      throw std::invalid_argument("WorldModel: grass cell above 0.1 m");
    }
  }
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

StepResult step_robot(const WorldModel& world, const RobotState& state,
                      const VelocityCommand& cmd, double dt, const RobotLimits& limits) {
  if (!(dt > 0)) throw std::invalid_argument("step_robot: dt must be > 0");
  RobotState s = state;
  // clamp commanded speed, then rate-limit the change
  double v_target = std::clamp(cmd.v, -limits.v_max, limits.v_max);
  const double dv_max = limits.a_max * dt;
  s.v += std::clamp(v_target - s.v, -dv_max, dv_max);
  s.omega = std::clamp(cmd.omega, -limits.omega_max, limits.omega_max);

  s.x += s.v * std::cos(s.heading) * dt;
  s.y += s.v * std::sin(s.heading) * dt;
  s.heading = wrap_angle(s.heading + s.omega * dt);
  s.t += dt;

  StepResult res{s, false};
  // footprint sweep over the occupied cells
  const double half = limits.footprint / 2.0;
  for (double ox = -half; ox <= half + 1e-9; ox += world.cell_size)
    for (double oy = -half; oy <= half + 1e-9; oy += world.cell_size) {
      const double px = s.x + ox, py = s.y + oy;
      if (!world.in_bounds(px, py)) continue;
      if (world.strict_at(px, py)) {
        res.collision = true;
        return res;
      }
    }
  return res;
}

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("CameraModel: fx, fy must be > 0");
  if (width <= 0 || height <= 0) throw std::invalid_argument("CameraModel: bad image size");
  // orthonormality and det +1
  auto dot = [&](int a, int b) {
    return r[3 * a] * r[3 * b] + r[3 * a + 1] * r[3 * b + 1] + r[3 * a + 2] * r[3 * b + 2];
  };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double expect = i == j ? 1.0 : 0.0;
      if (std::fabs(dot(i, j) - expect) > 1e-9)
        throw std::invalid_argument("CameraModel: rotation not orthonormal");
    }
  const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                     r[2] * (r[3] * r[7] - r[4] * r[6]);
  if (std::fabs(det - 1.0) > 1e-9)
    throw std::invalid_argument("CameraModel: rotation determinant is not +1");
}

CameraModel forward_camera(int width, int height, double hfov_deg, double mount_height,
                           double forward_offset) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.fx = (width / 2.0) / std::tan(hfov_deg * M_PI / 180.0 / 2.0);
  cam.fy = cam.fx;
  // camera axes in robot coordinates: z_cam = +x_r, x_cam = -y_r, y_cam = -z_r
  // rows of r are the camera axes expressed in the robot frame
  const double rot[9] = {0, -1, 0, 0, 0, -1, 1, 0, 0};
  std::copy(std::begin(rot), std::end(rot), cam.r);
  // camera center c_r = (forward_offset, 0, mount_height); t = -r * c_r
  cam.t[0] = 0.0;
  cam.t[1] = mount_height;
  cam.t[2] = -forward_offset;
  cam.validate();
  return cam;
}

}  // namespace semnav::world
