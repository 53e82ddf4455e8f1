#pragma once

#include <optional>
#include <string>
#include <vector>

#include "camera.hpp"
#include "image.hpp"

namespace rfp {

struct View {
  std::string name;  // file stem, e.g. "r_000"
  Image image;
  Camera camera;
  std::optional<LabelMap> mask;
};

// Posed views split into train and test. Bounds and object count are optional
// extras: generated scenes carry them, external exports usually do not.
struct SceneDataset {
  std::vector<View> train;
  std::vector<View> test;
  double camera_angle_x = 0.0;
  std::optional<Aabb> bounds;
  std::optional<int> num_objects;

  std::vector<const View*> all_views() const;
  bool operator==(const SceneDataset& other) const;
};

// Directory layout:
//   images/<name>.png, masks/<name>.png (optional, 8-bit label indices),
//   transforms_train.json, transforms_test.json with camera_angle_x and
//   frames[{file_path, transform_matrix}] (row-major camera-to-world).
void save_dataset(const SceneDataset& dataset, const std::string& dir);
SceneDataset load_dataset(const std::string& dir, double pose_tolerance = 1e-4);

}  // namespace rfp
