#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dataset.hpp"

namespace rfp {

enum class Primitive { kSphere, kBox };
enum class TextureKind { kSolid, kChecker, kValueNoise };

struct Texture {
  TextureKind kind = TextureKind::kSolid;
  Rgb color_a = Rgb(0.8, 0.8, 0.8);
  Rgb color_b = Rgb(0.2, 0.2, 0.2);
  double scale = 0.25;  // checker cell size or noise feature size, world units
  std::uint64_t seed = 0;

  Rgb eval(const Vec3& p) const;
};

struct SceneObject {
  Primitive primitive = Primitive::kSphere;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Constant(0.4);  // sphere: radius in x; box: half extents
  Texture texture;
};

// Finite square at z = height centred on the origin.
struct GroundPlane {
  bool enabled = true;
  double height = 0.0;
  double half_extent = 1.8;
  Texture texture;
};

struct Light {
  Vec3 direction = Vec3(0.4, 0.3, 1.0);  // towards the light
  double intensity = 0.7;
  double ambient = 0.35;
  bool shadows = true;
};

// Cameras on a horizontal circle looking at target; every test_stride-th view
// (offset by test_stride / 2) is held out.
struct CameraRing {
  int count = 23;
  double radius = 3.0;
  double elevation_deg = 50.0;
  double fov_deg = 40.0;
  double azimuth_offset_deg = 0.0;
  Vec3 target = Vec3(0.0, 0.0, 0.2);
  int test_views = 3;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  GroundPlane ground;
  Light light;
  CameraRing cameras;
  int width = 64;
  int height = 64;
  Aabb bounds{Vec3(-1.8, -1.8, -0.2), Vec3(1.8, 1.8, 1.0)};
  Rgb background = Rgb::Zero();
  std::uint64_t seed = 0;

  void validate() const;
};

SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json scene_spec_to_json(const SceneSpec& spec);
SceneSpec load_scene_spec(const std::string& path);

// Ray-traced Lambertian renders with pixel-exact instance masks (object i has
// label i + 1, everything else 0).
SceneDataset generate_scene(const SceneSpec& spec);

// Nearest primitive hit along a ray: returns the object index, -1 for the
// ground plane, -2 for a miss.
int trace_primary(const SceneSpec& spec, const Vec3& origin, const Vec3& dir, double* t_hit = nullptr);

}  // namespace rfp
