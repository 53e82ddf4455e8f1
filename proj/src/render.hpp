#pragma once

#include <span>
#include <vector>

#include "camera.hpp"
#include "field.hpp"
#include "image.hpp"

namespace rfp {

// Depths and interval lengths along one ray. The last interval runs to t_far.
struct QuadratureSamples {
  std::vector<double> t;
  std::vector<double> delta;
  std::size_t size() const { return t.size(); }
};

// jitter == nullptr places depths at bin midpoints; otherwise jitter[p] in [0, 1)
// positions sample p inside its own bin.
QuadratureSamples sample_points(double t_near, double t_far, int count, const double* jitter);
std::vector<QuadratureSamples> sample_points(const RayBatch& batch, int count, bool stratified,
                                             std::uint64_t seed);

struct RenderWeights {
  std::vector<double> transmittance;  // T(t_p), before sample p
  std::vector<double> weight;         // T(t_p) * alpha(sigma_p * delta_p)
};
RenderWeights render_weights(std::span<const double> sigma, std::span<const double> delta);

// Forward evaluation of every field along one ray. Kept as the cache for the
// backward pass during training.
struct RayTrace {
  int samples = 0;
  int labels = 0;  // K + 1
  int basis_count = 0;
  bool all_colors = true;
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<Stencil> stencils;
  std::vector<double> raw_density;
  std::vector<double> sigma;
  std::vector<double> logits;  // samples x labels
  std::vector<int> label;      // argmax per sample
  std::vector<double> colors;  // samples x labels x 3; only label's slot when !all_colors
  std::vector<double> basis;
  std::vector<double> transmittance;
  std::vector<double> weight;

  const double* color(int p, int k) const { return colors.data() + (static_cast<std::size_t>(p) * labels + k) * 3; }
  const double* logit(int p) const { return logits.data() + static_cast<std::size_t>(p) * labels; }
};

// all_colors == false evaluates only the assigned object's color at each sample,
// which is all the correct composite needs.
void trace_ray(const SceneModel& model, const Vec3& origin, const Vec3& direction,
               const QuadratureSamples& samples, RayTrace& out, bool all_colors = true);

Rgb render_color(const RayTrace& trace);
Rgb render_erroneous(const RayTrace& trace, int i, int j);
// All ordered pairs at once, out[i * L + j]; diagonal entries are left zero.
void render_erroneous_all(const RayTrace& trace, std::vector<Rgb>& out);
std::vector<double> render_semantics(const RayTrace& trace);
double render_depth(const RayTrace& trace);
double render_opacity(const RayTrace& trace);

struct RenderOptions {
  int samples = 128;
  bool stratified = false;
  std::uint64_t seed = 0;
};

struct FrameRender {
  Image rgb;
  std::vector<float> depth;
  std::vector<float> alpha;
  std::vector<double> logits;  // pixels x labels
  int labels = 0;
  LabelMap label_map;
};

FrameRender render_frame(const SceneModel& model, const Camera& camera, const RenderOptions& options);
Image render_image(const SceneModel& model, const Camera& camera, const RenderOptions& options,
                   std::vector<float>* depth = nullptr);
LabelMap render_label_map(const SceneModel& model, const Camera& camera, const RenderOptions& options);

// Argmax of per-pixel logits, ties and empty rays resolving to label 0.
LabelMap label_map_from_logits(std::span<const double> logits, int labels, int width, int height);

}  // namespace rfp
