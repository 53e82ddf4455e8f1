#include <doctest.h>

#include "pipeline.hpp"
#include "scene_gen.hpp"
#include "train.hpp"

using namespace rfp;

namespace {

SceneDataset tiny_sphere() {
  SceneSpec s = load_scene_spec(std::string(RFP_CONFIG_DIR) + "/sphere_scene.json");
  s.width = 20;
  s.height = 20;
  s.cameras.count = 6;
  s.cameras.test_views = 1;
  return generate_scene(s);
}

RunConfig tiny_config() {
  RunConfig c;
  c.model.num_objects = 1;
  c.model.resolution = {16, 16, 16};
  c.train.iterations = 200;
  c.train.batch_size = 64;
  c.train.samples = 32;
  c.render.samples = 32;
  c.seed = 3;
  return c;
}

std::vector<LabelMap> gt_labels(const SceneDataset& d) {
  std::vector<LabelMap> out;
  for (const auto& v : d.train) out.push_back(*v.mask);
  return out;
}

}  // namespace

TEST_CASE("training schedules") {
  TrainConfig c;
  c.iterations = 100;
  c.loss.weights.lambda_init = 1.0;
  c.lambda_init_floor = 0.04;
  c.init_anneal_fraction = 0.4;
  CHECK(c.lambda_init_at(0) == 1.0);
  CHECK(c.lambda_init_at(20) == doctest::Approx(0.52));
  CHECK(c.lambda_init_at(40) == doctest::Approx(0.04));
  CHECK(c.lambda_init_at(99) == doctest::Approx(0.04));
  CHECK(c.learning_rate_at(0) == doctest::Approx(0.02));
  CHECK(c.learning_rate_at(50) == doctest::Approx(0.02 * std::sqrt(0.1)));
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("zero iterations leave the model unchanged") {
  SceneDataset d = tiny_sphere();
  RunConfig c = tiny_config().resolved();
  c.train.iterations = 0;
  SceneModel m(model_config_for(c, d), c.seed);
  const SceneModel before = m;
  TrainingRays rays = build_training_rays(d, gt_labels(d), m.bounds());
  TrainResult r = train(m, rays, c.train);
  CHECK(r.trace.empty());
  auto a = m.fields();
  auto b = before.fields();
  for (std::size_t f = 0; f < a.size(); ++f)
    CHECK(std::equal(a[f]->values().begin(), a[f]->values().end(), b[f]->values().begin()));
}

TEST_CASE("training reduces the reconstruction error and is deterministic") {
  SceneDataset d = tiny_sphere();
  RunConfig c = tiny_config().resolved();
  const auto labels = gt_labels(d);
  auto run = [&] {
    SceneModel m(model_config_for(c, d), c.seed);
    TrainingRays rays = build_training_rays(d, labels, m.bounds());
    TrainResult r = train(m, rays, c.train);
    return std::make_pair(std::move(m), r);
  };
  auto [m1, r1] = run();
  auto [m2, r2] = run();
  REQUIRE(r1.trace.size() == 200);
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += r1.trace[i].loss.photo_pos;
    late += r1.trace[190 + i].loss.photo_pos;
  }
  CHECK(late < 0.7 * early);
  for (std::size_t i = 0; i < r1.trace.size(); ++i) CHECK(r1.trace[i].loss.total == r2.trace[i].loss.total);
  CHECK(std::equal(m1.density().values().begin(), m1.density().values().end(), m2.density().values().begin()));
}

TEST_CASE("training rays") {
  SceneDataset d = tiny_sphere();
  auto labels = gt_labels(d);
  labels[0].labels[0] = kUnlabeled;
  SceneModel m(model_config_for(tiny_config(), d), 0);
  TrainingRays rays = build_training_rays(d, labels, m.bounds());
  CHECK(rays.size() > 0);
  CHECK(rays.size() <= d.train.size() * 400);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    CHECK(rays.rays.valid[r] == 1);
    CHECK(rays.rays.t_near[r] < rays.rays.t_far[r]);
    CHECK(rays.targets[r].init_label >= -1);
    CHECK(rays.targets[r].init_label <= 1);
  }
}

TEST_CASE("run configs") {
  RunConfig c = tiny_config();
  c.no_prop = true;
  c.em.feature_scale = 4.0;
  c.train.loss.photo.clamp = std::numeric_limits<double>::infinity();
  RunConfig back = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(back) == run_config_to_json(c));
  CHECK(std::isinf(back.train.loss.photo.clamp));

  RunConfig r = c.resolved();
  CHECK(r.train.loss.weights.lambda_prop == 0.0);
  CHECK_FALSE(r.train.loss.photo.negative_term);
  CHECK(r.train.seed == 3);
  CHECK(r.init.seed == 3);

  RunConfig ni = tiny_config();
  ni.no_init_loss = true;
  CHECK(ni.resolved().train.lambda_init_at(0) == 0.0);

  CHECK_THROWS(run_config_from_json(nlohmann::json::parse(R"({"model": {"num_objects": 0}})")).validate());
  CHECK_THROWS(run_config_from_json(nlohmann::json::parse(R"({"train": {"iterations": "many"}})")));
}
