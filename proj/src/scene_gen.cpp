#include "scene_gen.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace rfp {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

double lattice_value(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t seed) {
  // splitmix64 finalizer over the packed lattice coordinate
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (std::int64_t v : {x, y, z}) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
  }
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Vec3& p, std::uint64_t seed) {
  const Vec3 f = p.array().floor();
  const std::int64_t x0 = static_cast<std::int64_t>(f.x());
  const std::int64_t y0 = static_cast<std::int64_t>(f.y());
  const std::int64_t z0 = static_cast<std::int64_t>(f.z());
  const double u = smooth(p.x() - f.x()), v = smooth(p.y() - f.y()), w = smooth(p.z() - f.z());
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double wt = (dx ? u : 1 - u) * (dy ? v : 1 - v) * (dz ? w : 1 - w);
    acc += wt * lattice_value(x0 + dx, y0 + dy, z0 + dz, seed);
  }
  return acc;
}

bool hit_sphere(const SceneObject& o, const Vec3& orig, const Vec3& dir, double& t, Vec3& n) {
  const Vec3 oc = orig - o.center;
  const double r = o.size.x();
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  double th = -b - s;
  if (th <= 1e-9) th = -b + s;
  if (th <= 1e-9) return false;
  t = th;
  n = (orig + t * dir - o.center) / r;
  return true;
}

bool hit_box(const SceneObject& o, const Vec3& orig, const Vec3& dir, double& t, Vec3& n) {
  const Aabb box{o.center - o.size, o.center + o.size};
  double tn, tf;
  if (!intersect_aabb(box, orig, dir, tn, tf)) return false;
  const double th = tn > 1e-9 ? tn : tf;
  if (th <= 1e-9) return false;
  t = th;
  const Vec3 local = (orig + t * dir - o.center).cwiseQuotient(o.size);
  int axis = 0;
  local.cwiseAbs().maxCoeff(&axis);
  n = Vec3::Zero();
  n[axis] = local[axis] > 0 ? 1.0 : -1.0;
  return true;
}

bool hit_ground(const GroundPlane& g, const Vec3& orig, const Vec3& dir, double& t) {
  if (!g.enabled || std::abs(dir.z()) < 1e-12) return false;
  const double th = (g.height - orig.z()) / dir.z();
  if (th <= 1e-9) return false;
  const Vec3 p = orig + th * dir;
  if (std::abs(p.x()) > g.half_extent || std::abs(p.y()) > g.half_extent) return false;
  t = th;
  return true;
}

struct Hit {
  int id = -2;
  double t = kInf;
  Vec3 normal = Vec3::UnitZ();
};

Hit nearest_hit(const SceneSpec& spec, const Vec3& orig, const Vec3& dir) {
  Hit best;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    double t;
    Vec3 n;
    const auto& o = spec.objects[i];
    const bool hit = o.primitive == Primitive::kSphere ? hit_sphere(o, orig, dir, t, n)
                                                       : hit_box(o, orig, dir, t, n);
    if (hit && t < best.t) best = {static_cast<int>(i), t, n};
  }
  double t;
  if (hit_ground(spec.ground, orig, dir, t) && t < best.t) best = {-1, t, Vec3::UnitZ()};
  return best;
}

Rgb shade(const SceneSpec& spec, const Vec3& orig, const Vec3& dir) {
  const Hit h = nearest_hit(spec, orig, dir);
  if (h.id == -2) return spec.background;
  const Vec3 p = orig + h.t * dir;
  const Rgb albedo = h.id >= 0 ? spec.objects[h.id].texture.eval(p - spec.objects[h.id].center)
                               : spec.ground.texture.eval(p);
  const Vec3 l = spec.light.direction.normalized();
  double lambert = std::max(0.0, h.normal.dot(l));
  if (lambert > 0.0 && spec.light.shadows) {
    const Hit occ = nearest_hit(spec, p + 1e-6 * h.normal, l);
    if (occ.id != -2) lambert = 0.0;
  }
  return (albedo * (spec.light.ambient + spec.light.intensity * lambert)).min(1.0).max(0.0);
}

Rgb rgb_from_json(const json& j) { return Rgb(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }
Vec3 vec_from_json(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }
json to_json3(const Eigen::Ref<const Eigen::Array3d>& v) { return {v[0], v[1], v[2]}; }

Texture texture_from_json(const json& j) {
  Texture t;
  const std::string kind = j.value("kind", "solid");
  if (kind == "solid") t.kind = TextureKind::kSolid;
  else if (kind == "checker") t.kind = TextureKind::kChecker;
  else if (kind == "value-noise") t.kind = TextureKind::kValueNoise;
  else fail(ErrorCode::kInvalidArgument, "unknown texture kind: " + kind);
  if (j.contains("color")) t.color_a = rgb_from_json(j["color"]);
  if (j.contains("color_a")) t.color_a = rgb_from_json(j["color_a"]);
  if (j.contains("color_b")) t.color_b = rgb_from_json(j["color_b"]);
  t.scale = j.value("scale", t.scale);
  t.seed = j.value("seed", t.seed);
  return t;
}

json texture_to_json(const Texture& t) {
  const char* names[] = {"solid", "checker", "value-noise"};
  return {{"kind", names[static_cast<int>(t.kind)]}, {"color_a", to_json3(t.color_a)},
          {"color_b", to_json3(t.color_b)}, {"scale", t.scale}, {"seed", t.seed}};
}

}  // namespace

Rgb Texture::eval(const Vec3& p) const {
  switch (kind) {
    case TextureKind::kSolid:
      return color_a;
    case TextureKind::kChecker: {
      const Vec3 q = (p / scale).array().floor();
      const auto parity = static_cast<std::int64_t>(q.x() + q.y() + q.z());
      return (parity % 2 == 0) ? color_a : color_b;
    }
    case TextureKind::kValueNoise: {
      const double n = 0.65 * value_noise(p / scale, seed) + 0.35 * value_noise(p / (0.5 * scale), seed + 1);
      return color_a * (1.0 - n) + color_b * n;
    }
  }
  return color_a;
}

void SceneSpec::validate() const {
  bounds.validate();
  require(!objects.empty(), "scene spec needs at least one object");
  require(cameras.count >= 3, "camera ring needs at least 3 cameras");
  require(cameras.test_views >= 0 && cameras.test_views < cameras.count,
          "test_views must leave at least one training view");
  require(width > 0 && height > 0, "image resolution must be positive");
  require(cameras.fov_deg > 0.0 && cameras.fov_deg < 180.0, "camera fov must be in (0, 180) degrees");
  require(cameras.radius > 0.0, "camera radius must be positive");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const Vec3 half = o.primitive == Primitive::kSphere ? Vec3::Constant(o.size.x()) : o.size;
    require((half.array() > 0.0).all(), "object " + std::to_string(i) + " has non-positive size");
    require(bounds.contains(o.center - half) && bounds.contains(o.center + half),
            "object " + std::to_string(i) + " extends outside the scene bounds");
    require(o.texture.scale > 0.0, "texture scale must be positive");
  }
  require(objects.size() < kUnlabeled, "too many objects for 8-bit masks");
}

SceneSpec scene_spec_from_json(const json& j) {
  SceneSpec s;
  try {
    for (const auto& jo : j.at("objects")) {
      SceneObject o;
      const std::string prim = jo.value("primitive", "sphere");
      if (prim == "sphere") o.primitive = Primitive::kSphere;
      else if (prim == "box") o.primitive = Primitive::kBox;
      else fail(ErrorCode::kInvalidArgument, "unknown primitive: " + prim);
      o.center = vec_from_json(jo.at("center"));
      const json& size = jo.at("size");
      o.size = size.is_array() ? vec_from_json(size) : Vec3::Constant(size.get<double>());
      if (jo.contains("texture")) o.texture = texture_from_json(jo["texture"]);
      s.objects.push_back(o);
    }
    if (j.contains("ground")) {
      const auto& g = j["ground"];
      s.ground.enabled = g.value("enabled", true);
      s.ground.height = g.value("height", s.ground.height);
      s.ground.half_extent = g.value("half_extent", s.ground.half_extent);
      if (g.contains("texture")) s.ground.texture = texture_from_json(g["texture"]);
    }
    if (j.contains("light")) {
      const auto& l = j["light"];
      if (l.contains("direction")) s.light.direction = vec_from_json(l["direction"]);
      s.light.intensity = l.value("intensity", s.light.intensity);
      s.light.ambient = l.value("ambient", s.light.ambient);
      s.light.shadows = l.value("shadows", s.light.shadows);
    }
    if (j.contains("cameras")) {
      const auto& c = j["cameras"];
      s.cameras.count = c.value("count", s.cameras.count);
      s.cameras.radius = c.value("radius", s.cameras.radius);
      s.cameras.elevation_deg = c.value("elevation_deg", s.cameras.elevation_deg);
      s.cameras.fov_deg = c.value("fov_deg", s.cameras.fov_deg);
      s.cameras.azimuth_offset_deg = c.value("azimuth_offset_deg", s.cameras.azimuth_offset_deg);
      s.cameras.test_views = c.value("test_views", s.cameras.test_views);
      if (c.contains("target")) s.cameras.target = vec_from_json(c["target"]);
    }
    if (j.contains("resolution")) {
      const auto& r = j["resolution"];
      s.width = r.is_array() ? r.at(0).get<int>() : r.get<int>();
      s.height = r.is_array() ? r.at(1).get<int>() : r.get<int>();
    }
    if (j.contains("bounds")) s.bounds = Aabb{vec_from_json(j["bounds"].at(0)), vec_from_json(j["bounds"].at(1))};
    if (j.contains("background")) s.background = rgb_from_json(j["background"]);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

json scene_spec_to_json(const SceneSpec& s) {
  json j;
  j["objects"] = json::array();
  for (const auto& o : s.objects) {
    j["objects"].push_back({{"primitive", o.primitive == Primitive::kSphere ? "sphere" : "box"},
                            {"center", to_json3(o.center.array())},
                            {"size", to_json3(o.size.array())},
                            {"texture", texture_to_json(o.texture)}});
  }
  j["ground"] = {{"enabled", s.ground.enabled}, {"height", s.ground.height},
                 {"half_extent", s.ground.half_extent}, {"texture", texture_to_json(s.ground.texture)}};
  j["light"] = {{"direction", to_json3(s.light.direction.array())}, {"intensity", s.light.intensity},
                {"ambient", s.light.ambient}, {"shadows", s.light.shadows}};
  j["cameras"] = {{"count", s.cameras.count}, {"radius", s.cameras.radius},
                  {"elevation_deg", s.cameras.elevation_deg}, {"fov_deg", s.cameras.fov_deg},
                  {"azimuth_offset_deg", s.cameras.azimuth_offset_deg},
                  {"target", to_json3(s.cameras.target.array())}, {"test_views", s.cameras.test_views}};
  j["resolution"] = {s.width, s.height};
  j["bounds"] = {to_json3(s.bounds.min.array()), to_json3(s.bounds.max.array())};
  j["background"] = to_json3(s.background);
  j["seed"] = s.seed;
  return j;
}

SceneSpec load_scene_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open scene spec " + path);
  try {
    return scene_spec_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kFormat, path + ": malformed JSON: " + e.what());
  }
}

int trace_primary(const SceneSpec& spec, const Vec3& origin, const Vec3& dir, double* t_hit) {
  const Hit h = nearest_hit(spec, origin, dir);
  if (t_hit) *t_hit = h.t;
  return h.id;
}

SceneDataset generate_scene(const SceneSpec& input) {
  input.validate();
  // The scene seed perturbs every noise texture.
  SceneSpec spec = input;
  auto reseed = [&](Texture& t) { t.seed ^= spec.seed * 0x9e3779b97f4a7c15ULL; };
  for (auto& o : spec.objects) reseed(o.texture);
  reseed(spec.ground.texture);
  const auto& ring = spec.cameras;
  const double angle_x = ring.fov_deg * kPi / 180.0;
  const double elev = ring.elevation_deg * kPi / 180.0;

  // Test views are spread evenly around the ring.
  std::vector<bool> is_test(ring.count, false);
  for (int i = 0; i < ring.test_views; ++i) {
    const int idx = static_cast<int>((i + 0.5) * ring.count / ring.test_views);
    is_test[std::min(idx, ring.count - 1)] = true;
  }

  std::vector<View> views(ring.count);
  parallel_for(ring.count, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const double az = ring.azimuth_offset_deg * kPi / 180.0 + 2.0 * kPi * v / ring.count;
      const Vec3 eye = ring.target + ring.radius * Vec3(std::cos(elev) * std::cos(az),
                                                        std::cos(elev) * std::sin(az), std::sin(elev));
      View& view = views[v];
      char name[32];
      std::snprintf(name, sizeof(name), "r_%03zu", v);
      view.name = name;
      view.camera = camera_from_fov(spec.width, spec.height, angle_x, look_at(eye, ring.target));
      view.image = Image(spec.width, spec.height, 3);
      view.mask = LabelMap(spec.width, spec.height, 0);
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const Vec3 dir = view.camera.pixel_direction(x, y);
          const Rgb c = shade(spec, eye, dir);
          for (int ch = 0; ch < 3; ++ch) view.image.at(x, y, ch) = static_cast<float>(c[ch]);
          const int id = trace_primary(spec, eye, dir);
          view.mask->labels[static_cast<std::size_t>(y) * spec.width + x] =
              static_cast<std::uint8_t>(id >= 0 ? id + 1 : 0);
        }
      }
      quantize_8bit(view.image);
    }
  });

  SceneDataset ds;
  ds.camera_angle_x = angle_x;
  ds.bounds = spec.bounds;
  ds.num_objects = static_cast<int>(spec.objects.size());
  for (int v = 0; v < ring.count; ++v) (is_test[v] ? ds.test : ds.train).push_back(std::move(views[v]));
  return ds;
}

}  // namespace rfp
