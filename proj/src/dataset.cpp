#include "dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace rfp {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<const View*> SceneDataset::all_views() const {
  std::vector<const View*> out;
  for (const auto& v : train) out.push_back(&v);
  for (const auto& v : test) out.push_back(&v);
  return out;
}

namespace {

bool same_view(const View& a, const View& b) {
  return a.name == b.name && a.image == b.image && a.mask == b.mask &&
         a.camera.pose == b.camera.pose && a.camera.fx == b.camera.fx && a.camera.fy == b.camera.fy &&
         a.camera.cx == b.camera.cx && a.camera.cy == b.camera.cy &&
         a.camera.width == b.camera.width && a.camera.height == b.camera.height;
}

bool same_views(const std::vector<View>& a, const std::vector<View>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_view(a[i], b[i])) return false;
  return true;
}

json transforms_json(const SceneDataset& ds, const std::vector<View>& views) {
  json j;
  j["camera_angle_x"] = ds.camera_angle_x;
  if (ds.bounds) {
    j["aabb"] = {{ds.bounds->min.x(), ds.bounds->min.y(), ds.bounds->min.z()},
                 {ds.bounds->max.x(), ds.bounds->max.y(), ds.bounds->max.z()}};
  }
  if (ds.num_objects) j["num_objects"] = *ds.num_objects;
  j["frames"] = json::array();
  for (const auto& v : views) {
    json m = json::array();
    for (int r = 0; r < 4; ++r) m.push_back({v.camera.pose(r, 0), v.camera.pose(r, 1), v.camera.pose(r, 2), v.camera.pose(r, 3)});
    j["frames"].push_back({{"file_path", "images/" + v.name}, {"transform_matrix", m}});
  }
  return j;
}

void load_split(const fs::path& dir, const std::string& file, double tolerance, SceneDataset& ds,
                std::vector<View>& out) {
  const fs::path path = dir / file;
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, path.string() + ": malformed JSON: " + e.what());
  }
  try {
    ds.camera_angle_x = j.at("camera_angle_x").get<double>();
    if (j.contains("aabb")) {
      const auto& a = j.at("aabb");
      ds.bounds = Aabb{Vec3(a[0][0], a[0][1], a[0][2]), Vec3(a[1][0], a[1][1], a[1][2])};
    }
    if (j.contains("num_objects")) ds.num_objects = j.at("num_objects").get<int>();
    for (const auto& frame : j.at("frames")) {
      const std::string rel = frame.at("file_path").get<std::string>();
      fs::path image_path = dir / rel;
      if (!image_path.has_extension()) image_path += ".png";
      if (!fs::exists(image_path))
        fail(ErrorCode::kIo, path.string() + ": frame image not found: " + image_path.string());
      View v;
      v.name = image_path.stem().string();
      v.image = read_png(image_path.string());
      if (v.image.channels == 4) {
        Image rgb(v.image.width, v.image.height, 3);
        for (std::size_t p = 0; p < rgb.pixel_count(); ++p)
          for (int c = 0; c < 3; ++c) rgb.data[p * 3 + c] = v.image.data[p * 4 + c];
        v.image = std::move(rgb);
      }
      if (v.image.channels != 3) fail(ErrorCode::kFormat, image_path.string() + ": expected an RGB image");
      Mat4 pose;
      const auto& m = frame.at("transform_matrix");
      if (m.size() != 4) fail(ErrorCode::kFormat, path.string() + ": transform_matrix must be 4x4");
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) pose(r, c) = m.at(r).at(c).get<double>();
      check_rigid(pose, tolerance, path.string() + " frame " + v.name);
      v.camera = camera_from_fov(v.image.width, v.image.height, ds.camera_angle_x, pose);
      const fs::path mask_path = dir / "masks" / (v.name + ".png");
      if (fs::exists(mask_path)) {
        v.mask = read_label_png(mask_path.string());
        if (v.mask->width != v.image.width || v.mask->height != v.image.height)
          fail(ErrorCode::kFormat, mask_path.string() + ": mask resolution differs from its image");
      }
      out.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

}  // namespace

bool SceneDataset::operator==(const SceneDataset& other) const {
  auto same_bounds = [](const std::optional<Aabb>& a, const std::optional<Aabb>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->min == b->min && a->max == b->max);
  };
  return camera_angle_x == other.camera_angle_x && num_objects == other.num_objects &&
         same_bounds(bounds, other.bounds) && same_views(train, other.train) &&
         same_views(test, other.test);
}

void save_dataset(const SceneDataset& ds, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "images");
  bool any_mask = false;
  for (const auto* v : ds.all_views()) {
    write_png((root / "images" / (v->name + ".png")).string(), v->image);
    if (v->mask) {
      if (!any_mask) fs::create_directories(root / "masks");
      any_mask = true;
      write_label_png((root / "masks" / (v->name + ".png")).string(), *v->mask);
    }
  }
  const std::pair<const char*, const std::vector<View>*> splits[] = {
      {"transforms_train.json", &ds.train}, {"transforms_test.json", &ds.test}};
  for (const auto& [file, views] : splits) {
    std::ofstream out(root / file, std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + (root / file).string());
    out << transforms_json(ds, *views).dump(2) << '\n';
  }
}

SceneDataset load_dataset(const std::string& dir, double pose_tolerance) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "dataset directory not found: " + dir);
  SceneDataset ds;
  load_split(root, "transforms_train.json", pose_tolerance, ds, ds.train);
  if (fs::exists(root / "transforms_test.json"))
    load_split(root, "transforms_test.json", pose_tolerance, ds, ds.test);
  require(!ds.train.empty(), dir + ": no training frames");
  const auto views = ds.all_views();
  for (const auto* v : views)
    if (v->image.width != views.front()->image.width || v->image.height != views.front()->image.height)
      fail(ErrorCode::kFormat, dir + ": views do not share one resolution (" + v->name + ")");
  return ds;
}

}  // namespace rfp
