#include "editor.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace rfp {

using nlohmann::json;

RigidTransform RigidTransform::then(const RigidTransform& next) const {
  // next(this(x)) = Rn (R (x - p) + p + t - pn) + pn + tn
  RigidTransform out;
  out.rotation = next.rotation * rotation;
  out.pivot = Vec3::Zero();
  out.translation = next.apply(apply(Vec3::Zero()));
  return out;
}

bool RigidTransform::is_identity() const {
  return rotation == Mat3::Identity() && translation == Vec3::Zero();
}

void EditScript::validate(int num_labels) const {
  for (std::size_t i = 0; i < edits.size(); ++i) {
    const Edit& e = edits[i];
    const std::string where = "edit " + std::to_string(i) + ": ";
    require(e.label >= 0 && e.label < num_labels, where + "label " + std::to_string(e.label) + " out of range");
    const Mat3& r = e.transform.rotation;
    require((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-6 && r.determinant() > 0.0,
            where + "rotation is not a proper rotation");
    require(e.transform.translation.allFinite() && e.transform.pivot.allFinite(), where + "non-finite transform");
    if (e.kind == EditKind::kDuplicate && e.new_label >= 0)
      require(e.new_label >= num_labels && e.new_label < kUnlabeled,
              where + "new_label must be a fresh label in [K+1, 254]");
  }
}

namespace {

Vec3 vec3(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

Mat3 rotation_from_json(const json& j) {
  if (j.size() == 3 && j.at(0).is_array()) {
    Mat3 r;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r(a, b) = j.at(a).at(b).get<double>();
    return r;
  }
  const Vec3 aa = vec3(j);
  const double angle = aa.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

EditKind kind_from_string(const std::string& s) {
  if (s == "isolate") return EditKind::kIsolate;
  if (s == "remove") return EditKind::kRemove;
  if (s == "duplicate") return EditKind::kDuplicate;
  if (s == "transform") return EditKind::kTransform;
  fail(ErrorCode::kInvalidArgument, "unknown edit kind: " + s);
}

struct PointSample {
  double sigma;
  int label;
  Rgb color;
};

PointSample sample_model(const SceneModel& model, const Vec3& x, std::span<const double> basis,
                         std::vector<double>& logits) {
  const Stencil st = model.geometry().stencil(x);
  double raw = 0.0;
  model.density().gather(st, std::span<double>(&raw, 1));
  model.semantics().gather(st, logits);
  const int label = argmax_label(logits);
  double coeffs[27];
  model.color(label).gather(st, std::span<double>(coeffs, 3 * basis.size()));
  return {softplus(raw), label, shade(coeffs, basis)};
}

}  // namespace

EditScript edit_script_from_json(const json& j) {
  EditScript s;
  try {
    const json& list = j.is_array() ? j : j.at("edits");
    for (const auto& je : list) {
      Edit e;
      e.label = je.at("label").get<int>();
      e.kind = kind_from_string(je.value("kind", "transform"));
      if (je.contains("rotation")) e.transform.rotation = rotation_from_json(je["rotation"]);
      if (je.contains("translation")) e.transform.translation = vec3(je["translation"]);
      if (je.contains("pivot")) e.transform.pivot = vec3(je["pivot"]);
      e.new_label = je.value("new_label", -1);
      s.edits.push_back(e);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("edit script: ") + e.what());
  }
  return s;
}

EditScript load_edit_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open edit script " + path);
  try {
    return edit_script_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kFormat, path + ": malformed JSON: " + e.what());
  }
}

double masked_density_at(const SceneModel& model, int k, const Vec3& x) {
  return model.object_mask_at(x, k) * model.density_at(x);
}

EditedScene::EditedScene(const SceneModel& model, const EditScript& script, Warnings* warnings)
    : model_(&model), base_labels_(model.num_labels(), 1), num_output_labels_(model.num_labels()) {
  script.validate(model.num_labels());
  int next_free = model.num_labels();
  for (const Edit& e : script.edits) {
    const int k = e.label;
    switch (e.kind) {
      case EditKind::kIsolate: {
        for (int l = 0; l < model.num_labels(); ++l) base_labels_[l] = l == k;
        std::erase_if(instances_, [&](const ObjectInstance& o) { return o.output_label != k; });
        break;
      }
      case EditKind::kRemove: {
        base_labels_[k] = 0;
        std::erase_if(instances_, [&](const ObjectInstance& o) { return o.output_label == k; });
        break;
      }
      case EditKind::kTransform: {
        if (base_labels_[k]) {
          base_labels_[k] = 0;
          instances_.push_back({k, k, e.transform});
        } else {
          for (auto& o : instances_)
            if (o.output_label == k) o.transform = o.transform.then(e.transform);
        }
        break;
      }
      case EditKind::kDuplicate: {
        const int label = e.new_label >= 0 ? e.new_label : next_free;
        require(label < kUnlabeled, "too many duplicated objects for 8-bit label maps");
        next_free = std::max(next_free, label + 1);
        instances_.push_back({k, label, e.transform});
        break;
      }
    }
  }
  num_output_labels_ = next_free;

  // Warn when a placed instance leaves the box: that part is clipped.
  const auto& g = model.geometry();
  const auto shape = g.shape();
  for (const auto& inst : instances_) {
    if (inst.transform.is_identity()) continue;
    bool clipped = false;
    for (int iz = 0; iz < shape.nz && !clipped; ++iz)
      for (int iy = 0; iy < shape.ny && !clipped; ++iy)
        for (int ix = 0; ix < shape.nx && !clipped; ++ix) {
          const Vec3 c = g.cell_center(ix, iy, iz);
          if (masked_density_at(model, inst.source_label, c) < 0.5) continue;
          clipped = !model.bounds().contains(inst.transform.apply(c));
        }
    if (clipped)
      warn(warnings, "edited object " + std::to_string(inst.source_label) +
                         " is moved partly outside the scene bounds and will be clipped");
  }
}

EditedScene::Sample EditedScene::query(const Vec3& x, const Vec3& dir) const {
  const SceneModel& m = *model_;
  std::vector<double> basis(m.sh_count()), logits(m.num_labels());
  Sample out;
  int active = 0;
  double best_sigma = -1.0;
  Rgb weighted = Rgb::Zero();
  auto add = [&](double sigma, const Rgb& color, int label) {
    if (sigma <= 0.0) return;
    ++active;
    out.sigma += sigma;
    weighted += sigma * color;
    if (active == 1) out.color = color;
    if (sigma > best_sigma) {
      best_sigma = sigma;
      out.label = label;
    }
  };

  bool any_base = false;
  for (char b : base_labels_) any_base |= b != 0;
  if (any_base) {
    sh_basis(m.sh_degree(), dir, basis);
    const PointSample s = sample_model(m, x, basis, logits);
    if (base_labels_[s.label]) add(s.sigma, s.color, s.label);
  }
  for (const auto& inst : instances_) {
    const Vec3 local = inst.transform.inverse(x);
    if (!m.bounds().contains(local)) continue;
    sh_basis(m.sh_degree(), inst.transform.rotation.transpose() * dir, basis);
    const PointSample s = sample_model(m, local, basis, logits);
    if (s.label == inst.source_label) add(s.sigma, s.color, inst.output_label);
  }
  if (active > 1) out.color = weighted / out.sigma;
  return out;
}

EditedFrame render_edited(const EditedScene& scene, const Camera& camera, const RenderOptions& options) {
  const SceneModel& m = scene.model();
  const int W = camera.width, H = camera.height, L = scene.num_output_labels();
  EditedFrame f;
  f.rgb = Image(W, H, 3);
  f.alpha.assign(static_cast<std::size_t>(W) * H, 0.0f);
  f.depth.assign(f.alpha.size(), 0.0f);
  f.label_map = LabelMap(W, H, 0);
  const RayBatch rays = generate_all_rays(camera, m.bounds());
  const auto samples = sample_points(rays, options.samples, options.stratified, options.seed);
  parallel_for(rays.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> sigma, share(L);
    std::vector<Rgb> color;
    std::vector<int> label;
    for (std::size_t r = begin; r < end; ++r) {
      if (!rays.valid[r]) continue;
      const auto& s = samples[r];
      const int P = static_cast<int>(s.size());
      sigma.resize(P);
      color.resize(P);
      label.resize(P);
      for (int p = 0; p < P; ++p) {
        const auto q = scene.query(rays.origins[r] + s.t[p] * rays.directions[r], rays.directions[r]);
        sigma[p] = q.sigma;
        color[p] = q.color;
        label[p] = q.label;
      }
      const RenderWeights w = render_weights(sigma, s.delta);
      Rgb c = Rgb::Zero();
      double alpha = 0.0, depth = 0.0;
      std::fill(share.begin(), share.end(), 0.0);
      for (int p = 0; p < P; ++p) {
        c += w.weight[p] * color[p];
        alpha += w.weight[p];
        depth += w.weight[p] * s.t[p];
        share[label[p]] += w.weight[p];
      }
      for (int ch = 0; ch < 3; ++ch) f.rgb.data[r * 3 + ch] = static_cast<float>(c[ch]);
      f.alpha[r] = static_cast<float>(alpha);
      f.depth[r] = static_cast<float>(depth);
      f.label_map.labels[r] = static_cast<std::uint8_t>(argmax_label(share));
    }
  });
  return f;
}

EditedFrame render_object(const SceneModel& model, int k, const Camera& camera, const RenderOptions& options) {
  model.check_label(k);
  EditScript script;
  script.edits.push_back({k, EditKind::kIsolate, {}, -1});
  return render_edited(EditedScene(model, script), camera, options);
}

}  // namespace rfp
