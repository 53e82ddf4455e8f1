#include <doctest.h>

#include <cmath>

#include "render.hpp"

using namespace rfp;

namespace {

SceneModel constant_model(int k, double raw_density, double color_logit) {
  ModelConfig c;
  c.num_objects = k;
  c.resolution = {4, 4, 4};
  SceneModel m(c, 0);
  m.density().fill(raw_density);
  for (int l = 0; l <= k; ++l) m.color(l).fill(color_logit);
  return m;
}

RayTrace trace_through(const SceneModel& m, int samples, bool stratified = false) {
  const Vec3 o(0, 0, -3), d(0, 0, 1);
  double tn, tf;
  REQUIRE(intersect_aabb(m.bounds(), o, d, tn, tf));
  RayBatch b;
  b.push(o, d, m.bounds(), {0, 0});
  auto s = sample_points(b, samples, stratified, 5);
  RayTrace t;
  trace_ray(m, o, d, s[0], t);
  return t;
}

}  // namespace

TEST_CASE("ray generation") {
  Camera cam = camera_from_fov(8, 6, 0.8, Mat4::Identity());
  // pixel centers straddle the principal point for even sizes; use an odd image
  Camera odd = camera_from_fov(9, 7, 0.8, Mat4::Identity());
  Pixel center{4, 3};
  RayBatch b = generate_rays(odd, std::span<const Pixel>(&center, 1), Aabb{});
  CHECK(b.origins[0].norm() == 0.0);
  CHECK((b.directions[0] - odd.forward()).norm() < 1e-12);
  CHECK((b.directions[0] - Vec3(0, 0, -1)).norm() < 1e-12);

  Pixel pair[2] = {{1, 2}, {6, 3}};
  RayBatch m = generate_rays(cam, pair, Aabb{});
  CHECK(m.directions[0].x() == doctest::Approx(-m.directions[1].x()));
  CHECK(m.directions[0].y() == doctest::Approx(-m.directions[1].y()));
  CHECK(m.directions[0].z() == doctest::Approx(m.directions[1].z()));
  for (const auto& d : m.directions) CHECK(d.norm() == doctest::Approx(1.0));

  Pixel outside{8, 0};
  CHECK_THROWS(generate_rays(cam, std::span<const Pixel>(&outside, 1), Aabb{}));

  // rotated pose: the central ray points at the look-at target
  const Mat4 pose = look_at(Vec3(2, -3, 1), Vec3(0, 0, 0));
  Camera looking = camera_from_fov(9, 7, 0.8, pose);
  looking.validate();
  RayBatch c = generate_rays(looking, std::span<const Pixel>(&center, 1), Aabb{});
  CHECK((c.directions[0] - (-Vec3(2, -3, 1)).normalized()).norm() < 1e-12);
  CHECK(c.t_near[0] < c.t_far[0]);
  const auto px = looking.project(Vec3::Zero());
  CHECK(px.x() == doctest::Approx(4.5));
  CHECK(px.y() == doctest::Approx(3.5));
}

TEST_CASE("quadrature sampling") {
  auto s = sample_points(0.0, 1.0, 4, nullptr);
  CHECK(s.t == std::vector<double>{0.125, 0.375, 0.625, 0.875});
  CHECK(s.delta[3] == doctest::Approx(0.125));
  CHECK_THROWS(sample_points(0.0, 1.0, 1, nullptr));

  RayBatch b;
  for (int i = 0; i < 10; ++i) b.push(Vec3(0, 0, -3), Vec3(0, 0, 1), Aabb{}, {0, 0});
  auto a = sample_points(b, 32, true, 77);
  auto again = sample_points(b, 32, true, 77);
  for (std::size_t r = 0; r < a.size(); ++r) {
    CHECK(a[r].t == again[r].t);
    const double tn = b.t_near[r], bin = (b.t_far[r] - tn) / 32;
    for (int p = 0; p < 32; ++p) {
      CHECK(a[r].t[p] >= tn + p * bin);
      CHECK(a[r].t[p] < tn + (p + 1) * bin);
      if (p + 1 < 32) CHECK(a[r].delta[p] > 0.0);
    }
  }
}

TEST_CASE("render weights") {
  std::vector<double> zero(5, 0.0), delta(5, 0.1);
  auto w = render_weights(zero, delta);
  for (double x : w.weight) CHECK(x == 0.0);

  std::vector<double> one(2, 1.0), d2(2, 0.1);
  w = render_weights(one, d2);
  CHECK(w.weight[0] == doctest::Approx(0.09516).epsilon(1e-4));
  CHECK(w.weight[1] == doctest::Approx(0.08611).epsilon(1e-4));
  CHECK(w.weight[0] == doctest::Approx(1.0 - std::exp(-0.1)).epsilon(1e-14));
  CHECK(w.weight[1] == doctest::Approx(std::exp(-0.1) * (1.0 - std::exp(-0.1))).epsilon(1e-14));

  std::vector<double> opaque{1e6, 1.0, 1.0};
  w = render_weights(opaque, std::vector<double>(3, 0.1));
  CHECK(w.weight[0] == doctest::Approx(1.0));
  CHECK(w.weight[1] < 1e-12);

  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> sigma(20), dl(20);
    for (int p = 0; p < 20; ++p) {
      sigma[p] = rng.uniform(0, 5);
      dl[p] = rng.uniform(0.01, 0.2);
    }
    w = render_weights(sigma, dl);
    CHECK(w.transmittance[0] == 1.0);
    double sum = 0.0;
    for (int p = 0; p < 20; ++p) {
      CHECK(w.weight[p] >= 0.0);
      CHECK(w.weight[p] <= 1.0);
      if (p) CHECK(w.transmittance[p] <= w.transmittance[p - 1]);
      sum += w.weight[p];
    }
    CHECK(sum <= 1.0 + 1e-12);
  }
}

TEST_CASE("render color, semantics and erroneous renders") {
  SceneModel empty = constant_model(2, -1e4, 0.3);
  RayTrace t = trace_through(empty, 16);
  CHECK(render_color(t).matrix().norm() < 1e-12);
  for (double s : render_semantics(t)) CHECK(std::abs(s) < 1e-12);
  CHECK(render_depth(t) < 1e-9);

  SceneModel m = constant_model(2, 0.5, 0.0);
  // degree-0 coefficients are scaled by the constant basis value
  double y00 = 0.0;
  sh_basis(0, Vec3::UnitZ(), std::span<double>(&y00, 1));
  for (std::size_t c = 0; c < m.color(1).shape().cell_count(); ++c) {
    m.color(1).cell(c)[0] = std::log(0.3 / 0.7) / y00;
    m.color(1).cell(c)[1] = std::log(0.6 / 0.4) / y00;
    m.color(1).cell(c)[2] = std::log(0.9 / 0.1) / y00;
  }
  for (std::size_t c = 0; c < m.semantics().shape().cell_count(); ++c) {
    double* s = m.semantics().cell(c);
    s[0] = 0.1;
    s[1] = 0.5;
    s[2] = -0.2;
  }
  t = trace_through(m, 64);
  const double opacity = render_opacity(t);
  const Rgb c = render_color(t);
  CHECK(c[0] == doctest::Approx(opacity * 0.3));
  CHECK(c[2] == doctest::Approx(opacity * 0.9));
  auto S = render_semantics(t);
  CHECK(S[1] == doctest::Approx(opacity * 0.5));
  // every sample is assigned to 1, so C~_{1,j} renders with c_j and C~_{0,1} stays c_0
  CHECK((render_erroneous(t, 1, 0) - opacity * 0.5).abs().maxCoeff() < 1e-12);
  CHECK((render_erroneous(t, 0, 1) - opacity * 0.5).abs().maxCoeff() < 1e-12);
  CHECK_THROWS(render_erroneous(t, 2, 2));

  // an opaque first sample returns its color
  SceneModel wall = constant_model(1, 1e5, 0.0);
  t = trace_through(wall, 8);
  CHECK(render_color(t)[0] == doctest::Approx(0.5));
  CHECK(render_opacity(t) == doctest::Approx(1.0));

  // identical color fields: erroneous renders equal the correct render
  SceneModel same = constant_model(3, 0.2, 0.0);
  Rng rng(3);
  for (double& v : same.semantics().values()) v = rng.uniform(-1, 1);
  for (double& v : same.color(0).values()) v = rng.uniform(-1, 1);
  for (int k = 1; k <= 3; ++k)
    std::copy(same.color(0).values().begin(), same.color(0).values().end(), same.color(k).values().begin());
  t = trace_through(same, 32, true);
  std::vector<Rgb> all;
  render_erroneous_all(t, all);
  const Rgb ref = render_color(t);
  for (int i = 0; i <= 3; ++i)
    for (int j = 0; j <= 3; ++j)
      if (i != j) CHECK((all[i * 4 + j] - ref).abs().maxCoeff() < 1e-12);
}

TEST_CASE("quadrature converges to the closed form") {
  const double raw = 0.3;
  SceneModel m = constant_model(1, raw, 0.4);
  const double sigma = softplus(raw);
  const double c = m.color_at(0, Vec3::Zero(), Vec3::UnitZ())[0];
  double previous = 1.0;
  for (int P : {2, 4, 8, 16, 32, 64, 128, 256}) {
    RayTrace t = trace_through(m, P);
    const double length = t.t.back() + t.delta.back() - (t.t[0] - 0.5 * t.delta[0]);
    const double exact = (1.0 - std::exp(-sigma * length)) * c;
    const double err = std::abs(render_color(t)[0] - exact);
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("frame rendering") {
  SceneModel empty = constant_model(1, -1e4, 0.0);
  Camera cam = camera_from_fov(12, 10, 0.9, look_at(Vec3(0, -3, 1), Vec3::Zero()));
  RenderOptions opt;
  opt.samples = 16;
  std::vector<float> depth;
  Image img = render_image(empty, cam, opt, &depth);
  for (float v : img.data) CHECK(v == doctest::Approx(0.0f).epsilon(1e-6));
  for (float v : depth) CHECK(v == doctest::Approx(0.0f).epsilon(1e-6));
  LabelMap lm = render_label_map(empty, cam, opt);
  CHECK(lm.count(0) == lm.pixel_count());

  ModelConfig c;
  c.num_objects = 2;
  c.resolution = {6, 6, 6};
  SceneModel m(c, 9);
  Rng rng(5);
  for (VoxelField* f : m.fields())
    for (double& v : f->values()) v = rng.uniform(-2, 2);
  FrameRender a = render_frame(m, cam, opt);
  FrameRender b = render_frame(m, cam, opt);
  CHECK(a.rgb == b.rgb);
  CHECK(a.label_map == b.label_map);
  for (std::size_t p = 0; p < a.label_map.pixel_count(); ++p)
    CHECK(a.label_map.labels[p] <= 2);

  std::vector<double> logits{0, 0, 0, 0.1, 0.3, 0.3, -1, -2, -3};
  LabelMap l = label_map_from_logits(logits, 3, 3, 1);
  CHECK(l.labels == std::vector<std::uint8_t>{0, 1, 0});
}
