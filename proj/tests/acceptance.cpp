// Acceptance suite: one PASS/FAIL line per criterion, thresholds fixed here.
// Trains the bundled scenes end to end; expect a few hours on one core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "checkpoint.hpp"
#include "editor.hpp"
#include "gradcheck.hpp"
#include "pipeline.hpp"
#include "scene_gen.hpp"
#include "seg_oracle.hpp"

using namespace rfp;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = RFP_CONFIG_DIR;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};
std::vector<Verdict> verdicts;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  verdicts.push_back({id, name, pass, detail});
  std::printf("%s  criterion %d  %s | %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

void progress(const std::string& s) {
  std::printf("  .. %s\n", s.c_str());
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// ---------------------------------------------------------------------------
// End-to-end runs

struct RunOutcome {
  SceneModel model;
  RunConfig config;
  EvalMetrics plain;    // rendered argmax
  EvalMetrics refined;  // after EM (equal to plain when EM is off)
  fs::path dir;
  double seconds = 0.0;
};

RunOutcome run_pipeline(const SceneDataset& ds, RunConfig rc, const fs::path& dir) {
  const auto t0 = Clock::now();
  rc = rc.resolved();
  fs::create_directories(dir);
  const InitSegResult init = run_init_seg(ds, rc);
  RunOutcome out{SceneModel(model_config_for(rc, ds), rc.seed), rc, {}, {}, dir, 0.0};
  const TrainingRays rays = build_training_rays(ds, init.labels, out.model.bounds());
  const TrainResult tr = train(out.model, rays, rc.train);
  save_checkpoint(out.model, (dir / "model.rfpckpt").string());
  write_loss_csv((dir / "loss.csv").string(), tr.trace);
  out.plain = evaluate(ds, segment_views(out.model, ds, rc, false));
  out.refined = rc.use_em ? evaluate(ds, segment_views(out.model, ds, rc, true)) : out.plain;
  std::ofstream(dir / "metrics.json") << metrics_to_json(rc.use_em ? out.refined : out.plain).dump(2) << '\n';
  out.seconds = seconds_since(t0);
  progress(fmt("%s: train mIoU %.4f (EM %.4f), N-mIoU %.4f (EM %.4f), N-acc %.4f, PSNR %.2f, SSIM %.4f, %.0f s",
               dir.filename().c_str(), out.plain.train->miou, out.refined.train->miou, out.plain.test->miou,
               out.refined.test->miou, out.refined.test->acc, out.refined.psnr, out.refined.ssim, out.seconds));
  return out;
}

// ---------------------------------------------------------------------------
// 1-3, 10: properties

void criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0, mismatch = 0.0;
  int checked = 0;
  bool all = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const int k = 1 + static_cast<int>(s % 2);
    const int res = 4 + static_cast<int>(s % 5);  // 4..8
    GradCheckFixture fx = make_grad_check_fixture(1000 + s, k, res, static_cast<int>(s % 3));
    GradCheckOptions opt;
    opt.seed = s;
    opt.step = 1e-5;
    opt.tolerance = 1e-5;
    const GradCheckReport r = gradient_check(fx.model, fx.batch, opt);
    worst = std::max(worst, r.max_rel_error);
    mismatch = std::max(mismatch, r.loss_mismatch);
    checked += r.checked;
    all = all && r.passed;
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", all && worst <= 1e-5 && secs <= 120.0,
         fmt("5 scenes (grids 4^3..8^3, K<=2), %d parameters, max rel err %.3g (tol 1e-5), "
             "reference/training loss gap %.2g, %.1f s (limit 120 s)",
             checked, worst, mismatch, secs));
}

void criterion_quadrature() {
  ModelConfig c;
  c.num_objects = 1;
  c.resolution = {4, 4, 4};
  SceneModel m(c, 0);
  m.density().fill(0.3);
  m.color(0).fill(0.4);
  m.color(1).fill(0.4);
  const double sigma = softplus(0.3);
  const Vec3 o(0.1, -0.2, -3.0), d(0, 0, 1);
  double tn, tf;
  intersect_aabb(m.bounds(), o, d, tn, tf);
  const double exact = (1.0 - std::exp(-sigma * (tf - tn))) * m.color_at(0, Vec3::Zero(), d)[0];
  std::vector<double> errors;
  std::string list;
  for (int P : {8, 32, 128, 512}) {
    RayTrace t;
    trace_ray(m, o, d, sample_points(tn, tf, P, nullptr), t);
    errors.push_back(std::abs(render_color(t)[0] - exact));
    list += fmt("P=%d: %.3g  ", P, errors.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i) monotone = monotone && errors[i] < errors[i - 1];
  report(2, "rendering quadrature", monotone && errors.back() <= 1e-3,
         list + "(monotone decrease, <= 1e-3 at P=512)");
}

void criterion_null_loss() {
  double worst = 0.0;
  int batches = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    GradCheckFixture fx = make_grad_check_fixture(500 + s, 1 + static_cast<int>(s % 3), 6, static_cast<int>(s % 3), 32);
    for (int k = 1; k < fx.model.num_labels(); ++k)
      std::copy(fx.model.color(0).values().begin(), fx.model.color(0).values().end(),
                fx.model.color(k).values().begin());
    std::vector<RayTrace> traces;
    trace_batch(fx.model, fx.batch.rays, fx.batch.samples, traces);
    PhotoOptions opt;
    opt.clamp = std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(loss_photo_bidirectional(traces, fx.batch.targets, opt)));
    ++batches;
  }
  report(3, "null-loss identity", worst <= 1e-12,
         fmt("%d random batches, tied colors, clamp off: max |L_photo| = %.3g (tol 1e-12)", batches, worst));
}

void criterion_metric_oracle() {
  Rng rng(2024);
  int pairs = 0, mismatches = 0, perm_mismatches = 0, acc_skipped = 0;
  for (int t = 0; t < 100; ++t) {
    const int labels = 2 + static_cast<int>(rng.index(4));  // 2..5
    const int views = 1 + static_cast<int>(rng.index(3));
    const int w = 6 + static_cast<int>(rng.index(8)), h = 5 + static_cast<int>(rng.index(8));
    std::vector<LabelMap> gt, pred;
    for (int v = 0; v < views; ++v) {
      LabelMap g(w, h, 0), p(w, h, 0);
      for (std::size_t i = 0; i < g.labels.size(); ++i) {
        g.labels[i] = static_cast<std::uint8_t>(rng.index(labels));
        p.labels[i] = rng.uniform() < 0.5 ? static_cast<std::uint8_t>((g.labels[i] * 3 + t) % labels)
                                          : static_cast<std::uint8_t>(rng.index(labels));
      }
      g.labels[0] = static_cast<std::uint8_t>(labels - 1);
      p.labels[0] = static_cast<std::uint8_t>(labels - 1);
      gt.push_back(g);
      pred.push_back(p);
    }
    ++pairs;
    const SegMetrics m = seg_metrics(pred, gt);
    const oracle::Score o = oracle::brute_force(pred, gt, labels);
    if (m.miou != o.miou || (o.unique && m.acc != o.acc)) ++mismatches;
    if (!o.unique) ++acc_skipped;

    // relabel foreground predictions by a random permutation
    std::vector<std::uint8_t> perm(labels);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = labels - 1; i > 1; --i) std::swap(perm[i], perm[1 + rng.index(i)]);
    std::vector<LabelMap> permuted = pred;
    for (auto& p : permuted)
      for (auto& l : p.labels) l = perm[l];
    const SegMetrics q = seg_metrics(permuted, gt);
    if (q.miou != m.miou || (o.unique && q.acc != m.acc)) ++perm_mismatches;
  }
  report(10, "metric oracle equivalence", mismatches == 0 && perm_mismatches == 0,
         fmt("%d random multi-view pairs: %d mismatches vs brute force, %d under label permutation "
             "(exact equality; acc compared where the optimal matching is unique, %d tied cases)",
             pairs, mismatches, perm_mismatches, acc_skipped));
}

// ---------------------------------------------------------------------------
// 4, 7, 8, 9: single object

Vec3 object_centroid(const SceneModel& m, int k) {
  const auto& g = m.geometry();
  Vec3 c = Vec3::Zero();
  double mass = 0.0;
  for (int z = 0; z < g.shape().nz; ++z)
    for (int y = 0; y < g.shape().ny; ++y)
      for (int x = 0; x < g.shape().nx; ++x) {
        const Vec3 p = g.cell_center(x, y, z);
        const double s = masked_density_at(m, k, p);
        c += s * p;
        mass += s;
      }
  return c / mass;
}

std::optional<Eigen::Vector2d> mask_centroid(const LabelMap& m, int k) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  double n = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.labels[static_cast<std::size_t>(y) * m.width + x] == k) {
        c += Eigen::Vector2d(x + 0.5, y + 0.5);
        n += 1;
      }
  if (n == 0) return std::nullopt;
  return c / n;
}

void criterion_editing(const RunOutcome& run, const SceneDataset& ds) {
  const SceneModel& m = run.model;
  RenderOptions ro = run.config.render;
  ro.stratified = false;
  const Vec3 t(0.3, 0.2, 0.0);
  const Vec3 c3 = object_centroid(m, 1);
  double worst_shift = 0.0, worst_area = 0.0;
  bool identical = true;
  for (const View& v : ds.test) {
    const Camera& cam = v.camera;
    const EditedFrame base = render_edited(EditedScene(m, EditScript{}), cam, ro);
    const FrameRender plain = render_frame(m, cam, ro);
    EditScript ident;
    for (int k = 0; k < m.num_labels(); ++k) ident.edits.push_back({k, EditKind::kTransform, {}, -1});
    const EditedFrame id = render_edited(EditedScene(m, ident), cam, ro);
    identical = identical && id.rgb == plain.rgb && base.rgb == plain.rgb && id.label_map == base.label_map;

    EditScript move;
    RigidTransform tr;
    tr.translation = t;
    move.edits.push_back({1, EditKind::kTransform, tr, -1});
    const EditedFrame moved = render_edited(EditedScene(m, move), cam, ro);
    const auto before = mask_centroid(base.label_map, 1), after = mask_centroid(moved.label_map, 1);
    const Eigen::Vector2d expected = cam.project(c3 + t) - cam.project(c3);
    const double err = before && after ? ((*after - *before) - expected).norm() : 1e9;
    worst_shift = std::max(worst_shift, err);

    EditScript remove;
    remove.edits.push_back({1, EditKind::kRemove, {}, -1});
    const EditedFrame removed = render_edited(EditedScene(m, remove), cam, ro);
    const double area0 = static_cast<double>(base.label_map.count(1));
    const double ratio = area0 > 0 ? removed.label_map.count(1) / area0 : 1.0;
    worst_area = std::max(worst_area, ratio);
  }
  report(8, "editing geometry", worst_shift <= 1.0 && worst_area < 0.01 && identical,
         fmt("%zu held-out views, seed %llu model: translation by (0.3, 0.2, 0) centroid error %.3f px "
             "(limit 1), removal leaves %.2f%% of mask area (limit 1%%), identity edit bit-identical: %s",
             ds.test.size(), static_cast<unsigned long long>(run.config.seed), worst_shift, 100.0 * worst_area,
             identical ? "yes" : "no"));
}

void single_object_suite(const fs::path& out, const std::set<int>& wanted) {
  const SceneSpec spec = load_scene_spec(kConfigDir + "/sphere_scene.json");
  const SceneDataset ds = generate_scene(spec);
  const RunConfig base = load_run_config(kConfigDir + "/sphere_run.json");
  progress(fmt("single-object scene: %zu train + %zu test views at %dx%d, %d iterations per run", ds.train.size(),
               ds.test.size(), spec.width, spec.height, base.train.iterations));

  const int seeds = wanted.count(4) || wanted.count(7) ? 5 : 1;
  std::vector<RunOutcome> runs;
  for (int s = 0; s < seeds; ++s) {
    RunConfig rc = base;
    rc.seed = static_cast<std::uint64_t>(s);
    runs.push_back(run_pipeline(ds, rc, out / fmt("sphere_seed%d", s)));
  }

  if (wanted.count(4)) {
    int good = 0;
    double slowest = 0.0;
    std::string per;
    for (const auto& r : runs) {
      const auto& t = *r.refined.test;
      good += t.miou >= 0.80 && t.acc >= 0.95;
      slowest = std::max(slowest, r.seconds);
      per += fmt("%.3f/%.3f ", t.miou, t.acc);
    }
    report(4, "single-object segmentation", good >= 4 && slowest <= 1800.0,
           fmt("N-mIoU/N-acc per seed: %s-> %d of 5 seeds with N-mIoU >= 0.80 and N-acc >= 0.95 (need 4); "
               "slowest run %.0f s (limit 1800 s)",
               per.c_str(), good, slowest));
  }
  if (wanted.count(7)) {
    double psnr = 0.0, ssim = 0.0;
    std::string per;
    for (const auto& r : runs) {
      psnr += r.refined.psnr / runs.size();
      ssim += r.refined.ssim / runs.size();
      per += fmt("%.2f/%.3f ", r.refined.psnr, r.refined.ssim);
    }
    report(7, "novel view synthesis", psnr >= 25.0 && ssim >= 0.85,
           fmt("held-out PSNR/SSIM per seed: %s-> mean %.2f dB / %.4f (need >= 25 dB and >= 0.85)", per.c_str(),
               psnr, ssim));
  }
  if (wanted.count(8)) criterion_editing(runs[0], ds);
  if (wanted.count(9)) {
    RunConfig rc = base;
    rc.seed = 0;
    const RunOutcome again = run_pipeline(ds, rc, out / "sphere_seed0_rerun");
    const bool ckpt = slurp(runs[0].dir / "model.rfpckpt") == slurp(again.dir / "model.rfpckpt");
    const bool metrics = slurp(runs[0].dir / "metrics.json") == slurp(again.dir / "metrics.json");
    report(9, "determinism", ckpt && metrics,
           fmt("seed 0 trained twice: checkpoint bytes identical: %s, metrics JSON identical: %s",
               ckpt ? "yes" : "no", metrics ? "yes" : "no"));
  }
}

// ---------------------------------------------------------------------------
// 5, 6: three objects

void em_unit_checks(const RunOutcome& run, const SceneDataset& ds, bool& simplex_ok, double& fixed_drift,
                    bool& passthrough_ok) {
  // Simplex after every e_step and exact pass-through at T = 0, w -> large,
  // on the trained model's rendered views.
  const RunConfig& rc = run.config;
  const auto views = segment_views(run.model, ds, rc, false);
  simplex_ok = true;
  passthrough_ok = true;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& vs = views[v];
    const View& view = v < ds.train.size() ? ds.train[v] : ds.test[v - ds.train.size()];
    FeatureMap f = extract_features(vs.test ? vs.render.rgb : view.image, rc.init.features);
    for (double& x : f.data) x *= rc.em.feature_scale;
    const int L = vs.render.labels;
    EmState s;
    s.means = init_means(f, vs.render.label_map, L);
    for (int it = 0; it < 10; ++it) {
      e_step(s, f);
      for (Eigen::Index p = 0; p < s.responsibilities.rows(); ++p) {
        const auto row = s.responsibilities.row(p);
        if (std::abs(row.sum() - 1.0) > 1e-12 || row.minCoeff() < 0.0) simplex_ok = false;
      }
      m_step(s, f);
    }
    EmMatrix logits = Eigen::Map<const EmMatrix>(vs.render.logits.data(),
                                                 static_cast<Eigen::Index>(vs.render.label_map.pixel_count()), L);
    EmOptions big;
    big.iterations = 0;
    big.weight = 1e12;
    big.feature_scale = rc.em.feature_scale;
    passthrough_ok = passthrough_ok && refine(vs.render.label_map, logits, f, big).labels == vs.render.label_map;
  }

  // Fixed point on a two-cluster fixture.
  FeatureMap f{40, 1, 3, FeatureSource::kExternal, {}};
  Rng rng(77);
  for (int p = 0; p < 40; ++p)
    for (int d = 0; d < 3; ++d) f.data.push_back((p < 20 ? -25.0 : 25.0) + rng.uniform(-0.2, 0.2));
  EmState s;
  s.means = EmMatrix::Zero(2, 3);
  s.means.row(0).setConstant(-25.0);
  s.means.row(1).setConstant(25.0);
  for (int it = 0; it < 5; ++it) {
    e_step(s, f);
    m_step(s, f);
  }
  const EmMatrix before = s.means;
  e_step(s, f);
  m_step(s, f);
  fixed_drift = (s.means - before).cwiseAbs().maxCoeff();
}

void multi_object_suite(const fs::path& out, const std::set<int>& wanted) {
  const SceneSpec spec = load_scene_spec(kConfigDir + "/three_objects_scene.json");
  const SceneDataset ds = generate_scene(spec);
  const RunConfig base = load_run_config(kConfigDir + "/three_objects_run.json");
  progress(fmt("three-object scene: %zu train + %zu test views, K = %d, %d iterations per run", ds.train.size(),
               ds.test.size(), base.model.num_objects, base.train.iterations));

  struct Row {
    double full = 0, no_em = 0, no_prop = 0, no_init = 0;
    double n_full = 0, n_no_em = 0, n_no_prop = 0, n_no_init = 0;
  };
  std::vector<Row> rows;
  std::vector<RunOutcome> fulls;
  const auto t0 = Clock::now();
  const bool ablations = wanted.count(5) > 0;
  for (int s = 0; s < 3; ++s) {
    RunConfig rc = base;
    rc.seed = static_cast<std::uint64_t>(s);
    Row row;
    RunOutcome full = run_pipeline(ds, rc, out / fmt("three_seed%d_full", s));
    row.full = full.refined.train->miou;
    row.no_em = full.plain.train->miou;
    row.n_full = full.refined.test->miou;
    row.n_no_em = full.plain.test->miou;
    if (ablations) {
      RunConfig np = rc;
      np.no_prop = true;
      const RunOutcome a = run_pipeline(ds, np, out / fmt("three_seed%d_no_prop", s));
      row.no_prop = a.refined.train->miou;
      row.n_no_prop = a.refined.test->miou;
      RunConfig ni = rc;
      ni.no_init_loss = true;
      const RunOutcome b = run_pipeline(ds, ni, out / fmt("three_seed%d_no_init", s));
      row.no_init = b.refined.train->miou;
      row.n_no_init = b.refined.test->miou;
    }
    rows.push_back(row);
    fulls.push_back(std::move(full));
  }
  const double secs = seconds_since(t0);

  auto mean = [&](double Row::*f) {
    double s = 0;
    for (const auto& r : rows) s += r.*f;
    return s / rows.size();
  };
  if (ablations) {
    const double full = mean(&Row::full), no_em = mean(&Row::no_em), no_prop = mean(&Row::no_prop),
                 no_init = mean(&Row::no_init);
    const bool order = full >= no_em && no_em >= no_prop && full - no_init >= 0.10;
    report(5, "ablation ordering", order && secs <= 3 * 2700.0,
           fmt("mean train mIoU over 3 seeds: full %.4f, w/o EM %.4f, w/o propagation %.4f, w/o init %.4f "
               "(need full >= w/o EM >= w/o prop, full - w/o init >= 0.10); held-out N-mIoU: %.4f, %.4f, %.4f, "
               "%.4f; %.0f s (limit 8100 s)",
               full, no_em, no_prop, no_init, mean(&Row::n_full), mean(&Row::n_no_em), mean(&Row::n_no_prop),
               mean(&Row::n_no_init), secs));
  }
  if (wanted.count(6)) {
    bool simplex_ok = false, passthrough_ok = false;
    double drift = 0.0;
    em_unit_checks(fulls[0], ds, simplex_ok, drift, passthrough_ok);
    int better = 0;
    bool within = true;
    std::string per;
    for (const auto& r : rows) {
      better += r.full > r.no_em;
      within = within && r.full >= r.no_em - 0.005;
      per += fmt("%.4f vs %.4f, ", r.full, r.no_em);
    }
    report(6, "EM refinement",
           simplex_ok && drift <= 1e-10 && passthrough_ok && within && better >= 2,
           fmt("simplex after every e_step: %s; fixed-point drift %.2g (tol 1e-10); T=0, w=1e12 reproduces masks: %s; "
               "train mIoU refined vs unrefined per seed: %s-> strictly better on %d of 3 (need 2), none worse than "
               "-0.005: %s",
               simplex_ok ? "yes" : "no", drift, passthrough_ok ? "yes" : "no", per.c_str(), better,
               within ? "yes" : "no"));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string criteria = "1,2,3,4,5,6,7,8,9,10";
  std::string out = "acceptance_runs";
  int threads = 0;
  app.add_option("--criteria", criteria, "comma-separated criteria to run");
  app.add_option("--out", out, "directory for run artifacts");
  app.add_option("--threads", threads, "worker thread cap (0 = all cores)");
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::err);
  set_thread_count(threads);
  std::set<int> wanted;
  {
    std::stringstream ss(criteria);
    std::string item;
    while (std::getline(ss, item, ',')) wanted.insert(std::stoi(item));
  }
  const auto t0 = Clock::now();
  try {
    if (wanted.count(1)) criterion_gradients();
    if (wanted.count(2)) criterion_quadrature();
    if (wanted.count(3)) criterion_null_loss();
    if (wanted.count(10)) criterion_metric_oracle();
    if (wanted.count(4) || wanted.count(7) || wanted.count(8) || wanted.count(9))
      single_object_suite(fs::path(out), wanted);
    if (wanted.count(5) || wanted.count(6)) multi_object_suite(fs::path(out), wanted);
  } catch (const std::exception& e) {
    std::printf("FAIL  acceptance aborted: %s\n", e.what());
    return 2;
  }

  int passed = 0;
  for (const auto& v : verdicts) passed += v.pass;
  std::printf("acceptance: %d of %zu criteria passed in %.0f s\n", passed, verdicts.size(), seconds_since(t0));
  return passed == static_cast<int>(verdicts.size()) ? 0 : 1;
}
