#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dataset.hpp"
#include "metrics.hpp"
#include "scene_gen.hpp"
#include "seg_oracle.hpp"

using namespace rfp;
namespace fs = std::filesystem;

namespace {

SceneSpec small_sphere_spec() {
  SceneSpec s = load_scene_spec(std::string(RFP_CONFIG_DIR) + "/sphere_scene.json");
  s.width = 24;
  s.height = 24;
  s.cameras.count = 6;
  s.cameras.test_views = 2;
  return s;
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("rfp_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("scene specs are validated") {
  SceneSpec s = small_sphere_spec();
  s.validate();
  SceneSpec empty = s;
  empty.objects.clear();
  CHECK_THROWS(empty.validate());
  SceneSpec outside = s;
  outside.objects[0].center = Vec3(5, 0, 0);
  CHECK_THROWS(outside.validate());
  SceneSpec again = scene_spec_from_json(scene_spec_to_json(s));
  CHECK(scene_spec_to_json(again) == scene_spec_to_json(s));
}

TEST_CASE("generated scenes are deterministic") {
  SceneSpec s = small_sphere_spec();
  SceneDataset a = generate_scene(s);
  SceneDataset b = generate_scene(s);
  CHECK(a == b);
  CHECK(a.train.size() == 4);
  CHECK(a.test.size() == 2);
  CHECK(a.num_objects.value() == 1);

  const fs::path da = scratch_dir("gen_a"), db = scratch_dir("gen_b");
  save_dataset(a, da.string());
  save_dataset(b, db.string());
  for (const auto& e : fs::recursive_directory_iterator(da)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), da);
    CHECK(slurp(e.path()) == slurp(db / rel));
  }
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST_CASE("a centered sphere projects to a filled disk") {
  SceneSpec s = small_sphere_spec();
  s.ground.enabled = false;
  s.cameras.elevation_deg = 89.0;
  s.cameras.target = s.objects[0].center;
  SceneDataset d = generate_scene(s);
  const View& v = d.train[0];
  const LabelMap& m = *v.mask;
  const auto c = v.camera.project(s.objects[0].center);
  std::size_t inside = 0;
  double radius2 = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (m.labels[y * m.width + x] != 1) continue;
      ++inside;
      radius2 = std::max(radius2, std::pow(x + 0.5 - c.x(), 2) + std::pow(y + 0.5 - c.y(), 2));
    }
  REQUIRE(inside > 20);
  // every pixel center within the disk radius (minus one pixel) is labeled
  const double r = std::sqrt(radius2);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const double dist = std::hypot(x + 0.5 - c.x(), y + 0.5 - c.y());
      if (dist < r - 1.0) CHECK(m.labels[y * m.width + x] == 1);
    }
  CHECK(m.labels[0] == 0);
}

TEST_CASE("dataset round trip and validation") {
  SceneDataset a = generate_scene(small_sphere_spec());
  const fs::path dir = scratch_dir("roundtrip");
  save_dataset(a, dir.string());
  SceneDataset b = load_dataset(dir.string());
  CHECK(a == b);

  // a frame without its image names the missing file
  const std::string name = a.train.back().name;
  fs::remove(dir / "images" / (name + ".png"));
  try {
    load_dataset(dir.string());
    FAIL("missing image accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(name) != std::string::npos);
    CHECK(e.code() == ErrorCode::kIo);
  }
  fs::remove_all(dir);

  // a reflected pose is rejected
  save_dataset(a, dir.string());
  nlohmann::json t;
  std::ifstream(dir / "transforms_train.json") >> t;
  for (int c = 0; c < 4; ++c) {
    double v = t["frames"][0]["transform_matrix"][c][0].get<double>();
    t["frames"][0]["transform_matrix"][c][0] = -v;
  }
  std::ofstream(dir / "transforms_train.json") << t.dump();
  CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("determinant"), Error);
  fs::remove_all(dir);
}


TEST_CASE("segmentation metrics") {
  LabelMap gt(8, 8, 0);
  for (int i = 0; i < 16; ++i) gt.labels[i] = 1;
  CHECK(seg_metrics(gt, gt).acc == 1.0);
  CHECK(seg_metrics(gt, gt).miou == 1.0);

  // disjoint foregrounds of equal area a in an image of area 4a
  LabelMap pred(8, 8, 0);
  for (int i = 16; i < 32; ++i) pred.labels[i] = 1;
  SegMetrics d = seg_metrics(pred, gt);
  CHECK(d.per_class_iou[1] == 0.0);
  CHECK(d.per_class_iou[0] == doctest::Approx(0.5));
  CHECK(d.miou == doctest::Approx(0.25));
  CHECK(d.acc == doctest::Approx(0.5));

  // swapped foreground labels are matched back
  LabelMap g3(6, 6, 0), p3(6, 6, 0);
  for (int i = 0; i < 10; ++i) {
    g3.labels[i] = 1;
    p3.labels[i] = 2;
  }
  for (int i = 20; i < 30; ++i) {
    g3.labels[i] = 2;
    p3.labels[i] = 1;
  }
  SegMetrics s = seg_metrics(p3, g3);
  CHECK(s.miou == 1.0);
  CHECK(s.acc == 1.0);
  CHECK(s.matching[1] == 2);

  Rng rng(42);
  for (int t = 0; t < 100; ++t) {
    const int labels = 2 + static_cast<int>(rng.index(3));
    LabelMap g(9, 7, 0), p(9, 7, 0);
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      g.labels[i] = static_cast<std::uint8_t>(rng.index(labels));
      p.labels[i] = rng.uniform() < 0.6 ? static_cast<std::uint8_t>((g.labels[i] * 7 + t) % labels)
                                        : static_cast<std::uint8_t>(rng.index(labels));
    }
    g.labels[0] = static_cast<std::uint8_t>(labels - 1);
    p.labels[1] = static_cast<std::uint8_t>(labels - 1);
    const oracle::Score o = oracle::brute_force(std::span<const LabelMap>(&p, 1), std::span<const LabelMap>(&g, 1), labels);
    const SegMetrics m = seg_metrics(p, g);
    CAPTURE(t);
    CHECK(m.miou == o.miou);
    if (o.unique) CHECK(m.acc == o.acc);
  }
}

TEST_CASE("assignment solver") {
  std::vector<std::vector<double>> cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  auto a = solve_assignment(cost);
  CHECK(a == std::vector<int>{1, 0, 2});
  std::vector<std::vector<double>> wide{{5, 1, 9, 9}, {1, 5, 9, 9}};
  CHECK(solve_assignment(wide) == std::vector<int>{1, 0});
  std::vector<std::vector<double>> tall{{1}, {0}, {2}};
  CHECK(solve_assignment(tall) == std::vector<int>{-1, 0, -1});
}

TEST_CASE("image metrics") {
  Image a(16, 16, 3, 0.0f), b(16, 16, 3, 0.5f);
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(4.0)));
  CHECK(psnr(a, b) == doctest::Approx(6.0206).epsilon(1e-4));
  CHECK(psnr(b, b) == kPsnrIdentical);
  Rng rng(3);
  for (float& v : b.data) v = static_cast<float>(rng.uniform());
  CHECK(ssim(b, b) == doctest::Approx(1.0));
  Image c = b;
  for (float& v : c.data) v = std::clamp(v + static_cast<float>(rng.uniform(-0.2, 0.2)), 0.0f, 1.0f);
  CHECK(ssim(b, c) < 1.0);
  CHECK(ssim(b, c) > 0.0);
  CHECK_THROWS(psnr(a, Image(8, 8, 3)));
}

TEST_CASE("png and float image io") {
  Image img(5, 4, 3);
  Rng rng(2);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  const fs::path dir = scratch_dir("io");
  fs::create_directories(dir);
  Image q = img;
  quantize_8bit(q);
  write_png((dir / "a.png").string(), q);
  CHECK(read_png((dir / "a.png").string()) == q);
  write_float_image((dir / "a.rfpimg").string(), img);
  CHECK(read_float_image((dir / "a.rfpimg").string()) == img);
  LabelMap l(5, 4, 3);
  l.labels[2] = kUnlabeled;
  write_label_png((dir / "l.png").string(), l);
  CHECK(read_label_png((dir / "l.png").string()) == l);
  CHECK_THROWS(read_png((dir / "missing.png").string()));
  fs::remove_all(dir);
}
