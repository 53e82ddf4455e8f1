#include "gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace rfp {

FrozenBatch freeze_batch(const SceneModel& model, const GradCheckBatch& batch) {
  std::vector<RayTrace> traces;
  trace_batch(model, batch.rays, batch.samples, traces);
  FrozenBatch f;
  const auto stats = compute_batch_stats(traces, batch.config.prop_min_weight);
  f.mean = stats.mean;
  f.count = stats.count;
  for (const auto& tr : traces) {
    f.labels.push_back(tr.label);
    f.logits.push_back(tr.logits);
    std::vector<std::uint8_t> in(tr.samples);
    for (int p = 0; p < tr.samples; ++p) in[p] = tr.weight[p] >= batch.config.prop_min_weight;
    f.in_prop.push_back(std::move(in));
  }
  return f;
}

namespace {

using Real = long double;

// Extended-precision point queries written independently of the training path.
struct ReferenceSampler {
  const SceneModel& model;

  std::vector<Real> sample(const VoxelField& field, const Vec3& x) const {
    const auto& shape = field.shape();
    const auto& bounds = field.bounds();
    const int n[3] = {shape.nx, shape.ny, shape.nz};
    int i0[3], i1[3];
    Real frac[3];
    for (int a = 0; a < 3; ++a) {
      const Real h = (static_cast<Real>(bounds.max[a]) - bounds.min[a]) / n[a];
      Real u = (static_cast<Real>(x[a]) - bounds.min[a]) / h - 0.5L;
      u = std::min<Real>(std::max<Real>(u, 0.0L), n[a] - 1);
      int lo = static_cast<int>(std::floor(u));
      if (lo > n[a] - 2) lo = std::max(n[a] - 2, 0);
      i0[a] = lo;
      i1[a] = std::min(lo + 1, n[a] - 1);
      frac[a] = u - lo;
    }
    const int C = field.channels();
    std::vector<Real> out(C, 0.0L);
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const Real w = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) *
                         (dz ? frac[2] : 1 - frac[2]);
          const std::size_t cell =
              (static_cast<std::size_t>(dz ? i1[2] : i0[2]) * shape.ny + (dy ? i1[1] : i0[1])) * shape.nx +
              (dx ? i1[0] : i0[0]);
          const double* v = field.cell(cell);
          for (int c = 0; c < C; ++c) out[c] += w * v[c];
        }
    return out;
  }

  Real density(const Vec3& x) const {
    const Real raw = sample(model.density(), x)[0];
    return raw > 0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  }

  std::array<Real, 3> color(int k, const Vec3& x, const Vec3& d) const {
    const Real X = d.x(), Y = d.y(), Z = d.z();
    const Real basis[9] = {0.28209479177387814L,
                           -0.4886025119029199L * Y,
                           0.4886025119029199L * Z,
                           -0.4886025119029199L * X,
                           1.0925484305920792L * X * Y,
                           -1.0925484305920792L * Y * Z,
                           0.31539156525252005L * (2 * Z * Z - X * X - Y * Y),
                           -1.0925484305920792L * X * Z,
                           0.5462742152960396L * (X * X - Y * Y)};
    const int B = model.sh_count();
    const auto coeffs = sample(model.color(k), x);
    std::array<Real, 3> c{};
    for (int ch = 0; ch < 3; ++ch) {
      Real acc = 0;
      for (int b = 0; b < B; ++b) acc += coeffs[ch * B + b] * basis[b];
      c[ch] = 1 / (1 + std::exp(-acc));
    }
    return c;
  }
};

}  // namespace

std::vector<long double> reference_ray_losses(const SceneModel& model, const GradCheckBatch& batch,
                                              const FrozenBatch& frozen) {
  const int L = model.num_labels();
  const int K = L - 1;
  const auto& cfg = batch.config;
  const ReferenceSampler q{model};
  using RgbL = std::array<Real, 3>;
  auto sq_dist = [](const RgbL& a, const Rgb& b) {
    Real s = 0;
    for (int ch = 0; ch < 3; ++ch) s += (a[ch] - b[ch]) * (a[ch] - b[ch]);
    return s;
  };
  std::vector<long double> out;

  for (std::size_t r = 0; r < batch.rays.size(); ++r) {
    const Vec3 o = batch.rays.origins[r];
    const Vec3 d = batch.rays.directions[r];
    const Rgb target = batch.targets[r].color;
    const int P = batch.rays.valid[r] ? static_cast<int>(batch.samples[r].size()) : 0;

    RgbL c_hat{};
    std::vector<RgbL> c_err(static_cast<std::size_t>(L) * L, RgbL{});
    std::vector<Real> s_hat(L, 0);
    Real optical = 0, prop = 0;
    for (int p = 0; p < P; ++p) {
      const Vec3 x = o + batch.samples[r].t[p] * d;
      const Real delta = batch.samples[r].delta[p];
      const Real sigma = q.density(x);
      const Real w = std::exp(-optical) * (1 - std::exp(-sigma * delta));
      optical += sigma * delta;

      const auto s = q.sample(model.semantics(), x);
      std::vector<Real> m(L);
      std::vector<RgbL> c(L);
      for (int k = 0; k < L; ++k) {
        m[k] = (k == frozen.labels[r][p] ? 1 : 0) + s[k] - frozen.logits[r][p * L + k];
        c[k] = q.color(k, x, d);
      }
      for (int k = 0; k < L; ++k) {
        for (int ch = 0; ch < 3; ++ch) c_hat[ch] += w * m[k] * c[k][ch];
        s_hat[k] += w * s[k];
      }
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
          if (i != j)
            for (int ch = 0; ch < 3; ++ch)
              c_err[i * L + j][ch] += w * (m[i] * c[j][ch] + (1 - m[i]) * c[i][ch]);
      if (frozen.in_prop[r][p]) {
        for (int k = 0; k < L; ++k) {
          if (frozen.count[k] == 0) continue;
          const Real inv = 1 - m[k];
          for (int ch = 0; ch < 3; ++ch) {
            const Real v = inv * (c[k][ch] - frozen.mean[k][ch]);
            prop += v * v;
          }
        }
      }
    }

    Real loss = sq_dist(c_hat, target);
    if (cfg.photo.negative_term) {
      Real sum = 0;
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
          if (i != j) sum += std::min<Real>(sq_dist(c_err[i * L + j], target), cfg.photo.clamp);
      loss -= sum / (static_cast<Real>(K) * (K + 1));
    }
    loss += cfg.weights.lambda_prop * prop;
    const int y = batch.targets[r].init_label;
    if (y >= 0) {
      Real z = 0;
      for (Real v : s_hat) z += std::exp(v);
      const Real p_y = std::exp(s_hat[y]) / z;
      loss -= cfg.weights.lambda_init * std::log(std::max<Real>(p_y, 1e-8L));
    }
    out.push_back(loss);
  }
  return out;
}

double reference_loss(const SceneModel& model, const GradCheckBatch& batch, const FrozenBatch& frozen) {
  long double total = 0;
  for (long double v : reference_ray_losses(model, batch, frozen)) total += v;
  return static_cast<double>(total);
}

void analytic_gradient(SceneModel& model, const GradCheckBatch& batch) {
  compute_gradients(model, batch.rays, batch.samples, batch.targets, batch.config);
}

GradCheckReport gradient_check(SceneModel& model, const GradCheckBatch& batch,
                               const GradCheckOptions& options) {
  const auto& photo = batch.config.photo;
  require(photo.negative_updates_density && photo.negative_updates_semantics &&
              photo.negative_updates_colors,
          "gradient check needs full gradient flow through the subtracted term");
  require(model.geometry().shape().cell_count() <= 8 * 8 * 8, "gradient check is meant for grids of at most 8^3");

  GradCheckReport report;
  const FrozenBatch frozen = freeze_batch(model, batch);
  std::vector<RayTrace> traces;
  trace_batch(model, batch.rays, batch.samples, traces);
  const double training_loss = batch_loss(traces, batch.targets, batch.config, nullptr).total;
  report.loss_mismatch = std::abs(reference_loss(model, batch, frozen) - training_loss);

  options.gradient(model, batch);

  // Candidate cells: every lattice cell some sample reaches with nonzero weight.
  std::vector<std::int32_t> cells;
  for (const auto& tr : traces)
    for (const auto& st : tr.stencils)
      for (int c = 0; c < 8; ++c)
        if (st.weight[c] > 0.0) cells.push_back(st.cell[c]);
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  if (cells.empty()) {
    report.passed = true;
    return report;
  }

  auto fields = model.fields();
  Rng rng(options.seed);
  for (int n = 0; n < options.parameters; ++n) {
    const std::size_t f = n % fields.size();
    VoxelField& field = *fields[f];
    const std::size_t cell = cells[rng.index(cells.size())];
    const std::size_t idx = cell * field.channels() + rng.index(field.channels());
    const double analytic = field.gradient()[idx];
    const double saved = field.values()[idx];
    const double plus = saved + options.step;
    const double minus = saved - options.step;
    field.values()[idx] = plus;
    const auto up = reference_ray_losses(model, batch, frozen);
    field.values()[idx] = minus;
    const auto down = reference_ray_losses(model, batch, frozen);
    field.values()[idx] = saved;
    long double diff = 0;
    for (std::size_t r = 0; r < up.size(); ++r) diff += up[r] - down[r];
    const double numeric = static_cast<double>(diff / (static_cast<long double>(plus) - minus));
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (report.worst.empty() || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      std::ostringstream s;
      s << "field " << f << " index " << idx << ": analytic " << analytic << " numeric " << numeric;
      report.worst = s.str();
    }
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

GradCheckFixture make_grad_check_fixture(std::uint64_t seed, int num_objects, int resolution,
                                         int sh_degree, int rays, int samples) {
  ModelConfig mc;
  mc.num_objects = num_objects;
  mc.resolution = {resolution, resolution, resolution};
  mc.bounds = Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  mc.sh_degree = sh_degree;
  GradCheckFixture fx{SceneModel(mc, seed), {}};
  Rng rng(seed ^ 0x5bd1e995ull);
  for (double& v : fx.model.density().values()) v = rng.uniform(-1.0, 2.0);
  for (double& v : fx.model.semantics().values()) v = rng.uniform(-1.0, 1.0);
  for (int k = 0; k < fx.model.num_labels(); ++k)
    for (double& v : fx.model.color(k).values()) v = rng.uniform(-2.0, 2.0);

  auto& b = fx.batch;
  for (int r = 0; r < rays; ++r) {
    Vec3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (dir.norm() < 1e-3) dir = Vec3::UnitX();
    dir.normalize();
    const Vec3 target(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    b.rays.push(target - 3.0 * dir, dir, mc.bounds, Pixel{r, 0});
    std::vector<double> jitter(samples);
    for (auto& j : jitter) j = rng.uniform();
    b.samples.push_back(b.rays.valid.back()
                            ? sample_points(b.rays.t_near.back(), b.rays.t_far.back(), samples, jitter.data())
                            : QuadratureSamples{});
    RayTarget t;
    t.color = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
    t.init_label = rng.uniform() < 0.2 ? -1 : static_cast<int>(rng.index(num_objects + 1));
    b.targets.push_back(t);
  }
  b.config.weights = {0.5, 0.7};
  b.config.photo.clamp = 0.75;
  return fx;
}

}  // namespace rfp
