#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "render.hpp"

namespace rfp {

enum class EditKind { kIsolate, kRemove, kDuplicate, kTransform };

// x_world' = R (x_world - pivot) + pivot + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 pivot = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * (x - pivot) + pivot + translation; }
  Vec3 inverse(const Vec3& x) const { return rotation.transpose() * (x - pivot - translation) + pivot; }
  RigidTransform then(const RigidTransform& next) const;  // next after this
  bool is_identity() const;
};

struct Edit {
  int label = 0;
  EditKind kind = EditKind::kTransform;
  RigidTransform transform;
  int new_label = -1;  // duplicates only; -1 picks the next free label
};

struct EditScript {
  std::vector<Edit> edits;
  void validate(int num_labels) const;
};

// {"edits": [{label, kind, rotation: axis-angle [3] or 3x3 matrix, translation, pivot?, new_label?}]}
EditScript edit_script_from_json(const nlohmann::json& j);
EditScript load_edit_script(const std::string& path);

// Density gated by the object's 3D mask.
double masked_density_at(const SceneModel& model, int k, const Vec3& x);

// A placed copy of one object of the source model.
struct ObjectInstance {
  int source_label = 0;
  int output_label = 0;
  RigidTransform transform;
};

// Composition of the unedited labels (queried in place) and transformed object
// instances (queried at the inverse-transformed point). Overlaps add density
// and blend color by density. Immutable once built.
class EditedScene {
 public:
  EditedScene(const SceneModel& model, const EditScript& script, Warnings* warnings = nullptr);

  const SceneModel& model() const { return *model_; }
  int num_output_labels() const { return num_output_labels_; }
  const std::vector<ObjectInstance>& instances() const { return instances_; }
  bool base_keeps(int label) const { return base_labels_[label] != 0; }

  struct Sample {
    double sigma = 0.0;
    Rgb color = Rgb::Zero();
    int label = 0;  // output label holding the largest density share
  };
  Sample query(const Vec3& x, const Vec3& dir) const;
  double density_at(const Vec3& x) const { return query(x, Vec3::UnitZ()).sigma; }

 private:
  const SceneModel* model_;
  std::vector<char> base_labels_;
  std::vector<ObjectInstance> instances_;
  int num_output_labels_ = 0;
};

struct EditedFrame {
  Image rgb;
  std::vector<float> alpha;
  std::vector<float> depth;
  LabelMap label_map;
};

EditedFrame render_edited(const EditedScene& scene, const Camera& camera, const RenderOptions& options);

// RGB plus per-pixel alpha of object k alone.
EditedFrame render_object(const SceneModel& model, int k, const Camera& camera, const RenderOptions& options);

}  // namespace rfp
