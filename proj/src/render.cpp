#include "render.hpp"

#include <cmath>

namespace rfp {

QuadratureSamples sample_points(double t_near, double t_far, int count, const double* jitter) {
  require(count >= 2, "at least two quadrature samples per ray are required");
  QuadratureSamples s;
  s.t.resize(count);
  s.delta.resize(count);
  const double bin = (t_far - t_near) / count;
  for (int p = 0; p < count; ++p) s.t[p] = t_near + (p + (jitter ? jitter[p] : 0.5)) * bin;
  for (int p = 0; p + 1 < count; ++p) s.delta[p] = s.t[p + 1] - s.t[p];
  s.delta[count - 1] = t_far - s.t[count - 1];
  return s;
}

std::vector<QuadratureSamples> sample_points(const RayBatch& batch, int count, bool stratified,
                                             std::uint64_t seed) {
  std::vector<QuadratureSamples> out;
  out.reserve(batch.size());
  Rng rng(seed);
  std::vector<double> jitter(count);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    if (stratified)
      for (auto& j : jitter) j = rng.uniform();
    out.push_back(sample_points(batch.t_near[r], batch.t_far[r], count,
                                stratified ? jitter.data() : nullptr));
  }
  return out;
}

RenderWeights render_weights(std::span<const double> sigma, std::span<const double> delta) {
  RenderWeights w;
  w.transmittance.resize(sigma.size());
  w.weight.resize(sigma.size());
  double optical_depth = 0.0;
  for (std::size_t p = 0; p < sigma.size(); ++p) {
    const double tau = sigma[p] * delta[p];
    w.transmittance[p] = std::exp(-optical_depth);
    w.weight[p] = w.transmittance[p] * -std::expm1(-tau);
    optical_depth += tau;
  }
  return w;
}

void trace_ray(const SceneModel& model, const Vec3& origin, const Vec3& direction,
               const QuadratureSamples& samples, RayTrace& out, bool all_colors) {
  const int P = static_cast<int>(samples.size());
  const int L = model.num_labels();
  const int B = model.sh_count();
  out.samples = P;
  out.labels = L;
  out.basis_count = B;
  out.all_colors = all_colors;
  out.origin = origin;
  out.direction = direction;
  out.t = samples.t;
  out.delta = samples.delta;
  out.stencils.resize(P);
  out.raw_density.resize(P);
  out.sigma.resize(P);
  out.logits.resize(static_cast<std::size_t>(P) * L);
  out.label.resize(P);
  out.colors.assign(static_cast<std::size_t>(P) * L * 3, 0.0);
  out.basis.resize(B);
  out.transmittance.resize(P);
  out.weight.resize(P);
  sh_basis(model.sh_degree(), direction, out.basis);

  const auto& geometry = model.geometry();
  double coeffs[27];
  double raw = 0.0;
  double optical_depth = 0.0;
  for (int p = 0; p < P; ++p) {
    const Vec3 x = origin + samples.t[p] * direction;
    const Stencil st = geometry.stencil(x);
    out.stencils[p] = st;
    model.density().gather(st, std::span<double>(&raw, 1));
    out.raw_density[p] = raw;
    out.sigma[p] = softplus(raw);
    double* s = out.logits.data() + static_cast<std::size_t>(p) * L;
    model.semantics().gather(st, std::span<double>(s, L));
    const int label = argmax_label(std::span<const double>(s, L));
    out.label[p] = label;
    for (int k = 0; k < L; ++k) {
      if (!all_colors && k != label) continue;
      model.color(k).gather(st, std::span<double>(coeffs, 3 * B));
      const Rgb c = shade(coeffs, out.basis);
      double* dst = out.colors.data() + (static_cast<std::size_t>(p) * L + k) * 3;
      dst[0] = c[0];
      dst[1] = c[1];
      dst[2] = c[2];
    }
    const double tau = out.sigma[p] * samples.delta[p];
    out.transmittance[p] = std::exp(-optical_depth);
    out.weight[p] = out.transmittance[p] * -std::expm1(-tau);
    optical_depth += tau;
  }
}

Rgb render_color(const RayTrace& trace) {
  Rgb c = Rgb::Zero();
  for (int p = 0; p < trace.samples; ++p) {
    const double* col = trace.color(p, trace.label[p]);
    c += trace.weight[p] * Rgb(col[0], col[1], col[2]);
  }
  return c;
}

Rgb render_erroneous(const RayTrace& trace, int i, int j) {
  require(i != j, "erroneous render requires two distinct labels");
  require(i >= 0 && j >= 0 && i < trace.labels && j < trace.labels, "label out of range");
  require(trace.all_colors, "erroneous render needs every object's color");
  Rgb c = Rgb::Zero();
  for (int p = 0; p < trace.samples; ++p) {
    const double* col = trace.color(p, trace.label[p] == i ? j : i);
    c += trace.weight[p] * Rgb(col[0], col[1], col[2]);
  }
  return c;
}

void render_erroneous_all(const RayTrace& trace, std::vector<Rgb>& out) {
  require(trace.all_colors, "erroneous render needs every object's color");
  const int L = trace.labels;
  // C~_ij = A_i + B_ij - B_ii with A_k = sum_p w c_k and B_ij = sum_{p: l=i} w c_j.
  std::vector<Rgb> a(L, Rgb::Zero());
  std::vector<Rgb> b(static_cast<std::size_t>(L) * L, Rgb::Zero());
  for (int p = 0; p < trace.samples; ++p) {
    const double w = trace.weight[p];
    const int l = trace.label[p];
    for (int k = 0; k < L; ++k) {
      const double* col = trace.color(p, k);
      const Rgb c(col[0], col[1], col[2]);
      a[k] += w * c;
      b[static_cast<std::size_t>(l) * L + k] += w * c;
    }
  }
  out.assign(static_cast<std::size_t>(L) * L, Rgb::Zero());
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      if (i != j) out[i * L + j] = a[i] + b[i * L + j] - b[i * L + i];
}

std::vector<double> render_semantics(const RayTrace& trace) {
  std::vector<double> s(trace.labels, 0.0);
  for (int p = 0; p < trace.samples; ++p) {
    const double* lp = trace.logit(p);
    for (int k = 0; k < trace.labels; ++k) s[k] += trace.weight[p] * lp[k];
  }
  return s;
}

double render_depth(const RayTrace& trace) {
  double d = 0.0;
  for (int p = 0; p < trace.samples; ++p) d += trace.weight[p] * trace.t[p];
  return d;
}

double render_opacity(const RayTrace& trace) {
  double a = 0.0;
  for (double w : trace.weight) a += w;
  return a;
}

LabelMap label_map_from_logits(std::span<const double> logits, int labels, int width, int height) {
  LabelMap out(width, height);
  for (std::size_t i = 0; i < out.pixel_count(); ++i)
    out.labels[i] = static_cast<std::uint8_t>(argmax_label(logits.subspan(i * labels, labels)));
  return out;
}

FrameRender render_frame(const SceneModel& model, const Camera& camera, const RenderOptions& options) {
  const int W = camera.width, H = camera.height, L = model.num_labels();
  FrameRender f;
  f.rgb = Image(W, H, 3);
  f.depth.assign(static_cast<std::size_t>(W) * H, 0.0f);
  f.alpha.assign(f.depth.size(), 0.0f);
  f.logits.assign(f.depth.size() * L, 0.0);
  f.labels = L;
  const RayBatch rays = generate_all_rays(camera, model.bounds());
  const auto samples = sample_points(rays, options.samples, options.stratified, options.seed);
  parallel_for(rays.size(), [&](std::size_t begin, std::size_t end) {
    RayTrace trace;
    for (std::size_t r = begin; r < end; ++r) {
      if (!rays.valid[r]) continue;
      trace_ray(model, rays.origins[r], rays.directions[r], samples[r], trace, false);
      const Rgb c = render_color(trace);
      for (int ch = 0; ch < 3; ++ch) f.rgb.data[r * 3 + ch] = static_cast<float>(c[ch]);
      f.depth[r] = static_cast<float>(render_depth(trace));
      f.alpha[r] = static_cast<float>(render_opacity(trace));
      const auto s = render_semantics(trace);
      std::copy(s.begin(), s.end(), f.logits.begin() + r * L);
    }
  });
  f.label_map = label_map_from_logits(f.logits, L, W, H);
  return f;
}

Image render_image(const SceneModel& model, const Camera& camera, const RenderOptions& options,
                   std::vector<float>* depth) {
  auto f = render_frame(model, camera, options);
  if (depth) *depth = std::move(f.depth);
  return std::move(f.rgb);
}

LabelMap render_label_map(const SceneModel& model, const Camera& camera, const RenderOptions& options) {
  return render_frame(model, camera, options).label_map;
}

}  // namespace rfp
