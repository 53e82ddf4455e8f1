#pragma once

#include <span>
#include <vector>

#include "common.hpp"

namespace rfp {

// Pinhole camera. Pose is camera-to-world with the OpenGL convention used by
// NeRF-style datasets: the camera looks down its local -z axis, +y is up.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Mat4 pose = Mat4::Identity();

  Vec3 origin() const { return pose.block<3, 1>(0, 3); }
  Mat3 rotation() const { return pose.block<3, 3>(0, 0); }
  Vec3 forward() const { return -pose.block<3, 1>(0, 2); }

  // Unit world direction through the center of pixel (x, y).
  Vec3 pixel_direction(double x, double y) const;
  // Continuous pixel coordinates (pixel centers at +0.5) of a world point.
  Eigen::Vector2d project(const Vec3& world) const;

  void validate(double tolerance = 1e-6) const;
};

Camera camera_from_fov(int width, int height, double angle_x, const Mat4& pose);
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

// Throws unless the rotation block is orthonormal with determinant +1.
void check_rigid(const Mat4& pose, double tolerance, const std::string& what);

struct Pixel {
  int x = 0;
  int y = 0;
};

// Rays that miss the bounds are kept with valid = 0 and an empty interval.
struct RayBatch {
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;
  std::vector<double> t_near;
  std::vector<double> t_far;
  std::vector<std::uint8_t> valid;
  std::vector<Pixel> pixels;

  std::size_t size() const { return origins.size(); }
  void push(const Vec3& o, const Vec3& d, const Aabb& bounds, Pixel p);
};

RayBatch generate_rays(const Camera& camera, std::span<const Pixel> pixels, const Aabb& bounds);
RayBatch generate_all_rays(const Camera& camera, const Aabb& bounds);

}  // namespace rfp
