#pragma once
// Deterministic 2D semantic/elevation world: per-cell class labels from a
// registry, an elevation surface, an optional canopy layer overhead, and a
// unicycle robot. Everything downstream (sensors, dataset, metrics) reads
// the same grids.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace semnav::world {

struct ClassDef {
  std::string name;
  double elevation = 0.0;  // canonical surface height when placed
  bool strict = false;     // strict obstacle: contact ends the episode
  double intensity = 0.5;  // lidar return constant
};

class ClassRegistry {
 public:
  uint8_t add(ClassDef def);
  const ClassDef& def(uint8_t id) const { return defs_.at(id); }
  std::optional<uint8_t> find(const std::string& name) const;
  size_t size() const { return defs_.size(); }
  const std::vector<ClassDef>& all() const { return defs_; }

 private:
  std::vector<ClassDef> defs_;
};

// Grid classes + the render-only sky class used by the camera.
ClassRegistry default_registry();
inline constexpr const char* kSkyClass = "sky";

struct WorldModel {
  double cell_size = 0.2;
  int64_t nx = 0, ny = 0;
  std::vector<uint8_t> class_grid;   // ny * nx, row-major by y
  std::vector<double> elevation;     // meters
  std::vector<double> canopy_base;   // overhead slab underside; 0 = none
  double canopy_thickness = 0.5;
  ClassRegistry registry;
  uint64_t seed = 0;
  double start_x = 0, start_y = 0, goal_x = 0, goal_y = 0;

  bool in_bounds(double x, double y) const {
    return x >= 0 && y >= 0 && x < static_cast<double>(nx) * cell_size &&
           y < static_cast<double>(ny) * cell_size;
  }
  int64_t cell_index(double x, double y) const {
    const int64_t cx = static_cast<int64_t>(x / cell_size);
    const int64_t cy = static_cast<int64_t>(y / cell_size);
    return cy * nx + cx;
  }
  uint8_t class_at(double x, double y) const { return class_grid[static_cast<size_t>(cell_index(x, y))]; }
  double elev_at(double x, double y) const { return elevation[static_cast<size_t>(cell_index(x, y))]; }
  bool strict_at(double x, double y) const { return registry.def(class_at(x, y)).strict; }

  // checks grid extents and the detectability of strict/soft cells
  void validate(double step_height = 0.2) const;
};

// ---------------------------------------------------------------------------
// Robot
// ---------------------------------------------------------------------------

struct RobotState {
  double x = 0, y = 0, heading = 0;  // world frame, heading CCW from +x
  double v = 0, omega = 0;
  double t = 0;
};

struct VelocityCommand {
  double v = 0, omega = 0;
};

struct RobotLimits {
  double v_max = 2.0;       // m/s
  double a_max = 0.5;       // m/s^2
  double omega_max = 1.5;   // rad/s
  double footprint = 0.8;   // square side, m
};

struct StepResult {
  RobotState state;
  bool collision = false;
};

double wrap_angle(double a);  // to (-pi, pi]

StepResult step_robot(const WorldModel& world, const RobotState& state,
                      const VelocityCommand& cmd, double dt,
                      const RobotLimits& limits = {});

// robot-frame <-> world-frame point transforms
inline void robot_to_world(const RobotState& s, double rx, double ry, double& wx, double& wy) {
  const double c = std::cos(s.heading), sn = std::sin(s.heading);
  wx = s.x + c * rx - sn * ry;
  wy = s.y + sn * rx + c * ry;
}
inline void world_to_robot(const RobotState& s, double wx, double wy, double& rx, double& ry) {
  const double c = std::cos(s.heading), sn = std::sin(s.heading);
  const double dx = wx - s.x, dy = wy - s.y;
  rx = c * dx + sn * dy;
  ry = -sn * dx + c * dy;
}

// ---------------------------------------------------------------------------
// Camera
// ---------------------------------------------------------------------------

struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  // rigid transform robot -> camera: p_cam = r * p_robot + t
  double r[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  double t[3] = {0, 0, 0};

  void validate() const;  // fx,fy > 0; rotation orthonormal with det +1
};

// Forward-looking pinhole with standard CV axes (z forward, x right, y down),
// mounted `mount_height` above the robot base.
CameraModel forward_camera(int width, int height, double hfov_deg, double mount_height,
                           double forward_offset = 0.2);

}  // namespace semnav::world
