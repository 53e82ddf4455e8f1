#include "camera.hpp"

#include <cmath>

namespace rfp {

Vec3 Camera::pixel_direction(double x, double y) const {
  const Vec3 local((x + 0.5 - cx) / fx, -(y + 0.5 - cy) / fy, -1.0);
  return (rotation() * local).normalized();
}

Eigen::Vector2d Camera::project(const Vec3& world) const {
  const Vec3 local = rotation().transpose() * (world - origin());
  const double depth = -local.z();
  return {cx + fx * local.x() / depth, cy - fy * local.y() / depth};
}

void check_rigid(const Mat4& pose, double tolerance, const std::string& what) {
  const Mat3 r = pose.block<3, 3>(0, 0);
  if (!pose.allFinite()) fail(ErrorCode::kInvalidArgument, what + ": pose is not finite");
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance)
    fail(ErrorCode::kInvalidArgument, what + ": rotation block is not orthonormal");
  if (r.determinant() < 0.0)
    fail(ErrorCode::kInvalidArgument, what + ": rotation block has determinant -1");
}

void Camera::validate(double tolerance) const {
  require(fx > 0.0 && fy > 0.0, "camera focal lengths must be positive");
  require(width > 0 && height > 0, "camera resolution must be positive");
  check_rigid(pose, tolerance, "camera");
}

Camera camera_from_fov(int width, int height, double angle_x, const Mat4& pose) {
  Camera c;
  c.width = width;
  c.height = height;
  c.fx = 0.5 * width / std::tan(0.5 * angle_x);
  c.fy = c.fx;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.pose = pose;
  return c;
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 back = (eye - target).normalized();
  Vec3 right = up.cross(back);
  if (right.norm() < 1e-9) right = Vec3::UnitX().cross(back);
  right.normalize();
  const Vec3 cam_up = back.cross(right);
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 0) = right;
  m.block<3, 1>(0, 1) = cam_up;
  m.block<3, 1>(0, 2) = back;
  m.block<3, 1>(0, 3) = eye;
  return m;
}

void RayBatch::push(const Vec3& o, const Vec3& d, const Aabb& bounds, Pixel p) {
  double tn = 0.0, tf = 0.0;
  const bool hit = intersect_aabb(bounds, o, d, tn, tf);
  origins.push_back(o);
  directions.push_back(d);
  t_near.push_back(hit ? tn : 0.0);
  t_far.push_back(hit ? tf : 0.0);
  valid.push_back(hit ? 1 : 0);
  pixels.push_back(p);
}

RayBatch generate_rays(const Camera& camera, std::span<const Pixel> pixels, const Aabb& bounds) {
  RayBatch batch;
  const Vec3 o = camera.origin();
  for (const auto& p : pixels) {
    if (p.x < 0 || p.y < 0 || p.x >= camera.width || p.y >= camera.height)
      fail(ErrorCode::kInvalidArgument, "pixel (" + std::to_string(p.x) + ", " +
                                            std::to_string(p.y) + ") is outside the image");
    batch.push(o, camera.pixel_direction(p.x, p.y), bounds, p);
  }
  return batch;
}

RayBatch generate_all_rays(const Camera& camera, const Aabb& bounds) {
  std::vector<Pixel> pixels;
  pixels.reserve(static_cast<std::size_t>(camera.width) * camera.height);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) pixels.push_back({x, y});
  return generate_rays(camera, pixels, bounds);
}

}  // namespace rfp
