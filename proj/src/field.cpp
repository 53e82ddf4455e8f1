#include "field.hpp"

#include <algorithm>
#include <cmath>

namespace rfp {

GridGeometry::GridGeometry(GridShape shape, Aabb bounds) : shape_(shape), bounds_(bounds) {
  require(shape.nx > 0 && shape.ny > 0 && shape.nz > 0, "grid resolution must be positive");
  bounds.validate();
  cell_size_ = bounds.extent().cwiseQuotient(Vec3(shape.nx, shape.ny, shape.nz));
}

Vec3 GridGeometry::cell_center(int ix, int iy, int iz) const {
  return bounds_.min + (Vec3(ix, iy, iz).array() + 0.5).matrix().cwiseProduct(cell_size_);
}

Stencil GridGeometry::stencil(const Vec3& x) const {
  const int n[3] = {shape_.nx, shape_.ny, shape_.nz};
  int lo[3];
  int hi[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    double u = (x[a] - bounds_.min[a]) / cell_size_[a] - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(n[a] - 1));
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::min(i0, std::max(n[a] - 2, 0));
    lo[a] = i0;
    hi[a] = std::min(i0 + 1, n[a] - 1);
    f[a] = u - i0;
  }
  Stencil s;
  for (int c = 0; c < 8; ++c) {
    const int bx = c & 1;
    const int by = (c >> 1) & 1;
    const int bz = (c >> 2) & 1;
    s.cell[c] = static_cast<std::int32_t>(
        flat_index(bx ? hi[0] : lo[0], by ? hi[1] : lo[1], bz ? hi[2] : lo[2]));
    s.weight[c] = (bx ? f[0] : 1.0 - f[0]) * (by ? f[1] : 1.0 - f[1]) * (bz ? f[2] : 1.0 - f[2]);
  }
  return s;
}

VoxelField::VoxelField(GridShape shape, int channels, Aabb bounds)
    : geometry_(shape, bounds), channels_(channels) {
  require(channels > 0, "field channel count must be positive");
  values_.assign(shape.cell_count() * channels, 0.0);
  gradient_.assign(values_.size(), 0.0);
}

void VoxelField::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void VoxelField::zero_gradient() { std::fill(gradient_.begin(), gradient_.end(), 0.0); }

void VoxelField::gather(const Stencil& s, std::span<double> out) const {
  const int C = channels_;
  std::fill(out.begin(), out.begin() + C, 0.0);
  for (int c = 0; c < 8; ++c) {
    const double w = s.weight[c];
    if (w == 0.0) continue;
    const double* v = values_.data() + static_cast<std::size_t>(s.cell[c]) * C;
    for (int k = 0; k < C; ++k) out[k] += w * v[k];
  }
}

void VoxelField::scatter_gradient(const Stencil& s, std::span<const double> grad) {
  const int C = channels_;
  for (int c = 0; c < 8; ++c) {
    const double w = s.weight[c];
    if (w == 0.0) continue;
    double* g = gradient_.data() + static_cast<std::size_t>(s.cell[c]) * C;
    for (int k = 0; k < C; ++k) g[k] += w * grad[k];
  }
}

std::vector<double> VoxelField::sample(const Vec3& x) const {
  std::vector<double> out(channels_);
  gather(geometry_.stencil(x), out);
  return out;
}

std::vector<double> trilinear_sample(const VoxelField& field, const Vec3& x) {
  return field.sample(x);
}

int sh_basis_count(int degree) {
  require(degree >= 0 && degree <= 2, "sh_degree must be 0, 1 or 2");
  return (degree + 1) * (degree + 1);
}

void sh_basis(int degree, const Vec3& dir, std::span<double> out) {
  constexpr double kC0 = 0.28209479177387814;
  constexpr double kC1 = 0.4886025119029199;
  constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                             -1.0925484305920792, 0.5462742152960396};
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[0] = kC0;
  if (degree < 1) return;
  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (degree < 2) return;
  out[4] = kC2[0] * x * y;
  out[5] = kC2[1] * y * z;
  out[6] = kC2[2] * (2.0 * z * z - x * x - y * y);
  out[7] = kC2[3] * x * z;
  out[8] = kC2[4] * (x * x - y * y);
}

int argmax_label(std::span<const double> logits) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(logits.size()); ++k)
    if (logits[k] > logits[best]) best = k;
  return best;
}

Assignment hard_assignment(std::span<const double> logits) {
  Assignment a;
  a.logits.assign(logits.begin(), logits.end());
  a.label = argmax_label(logits);
  a.one_hot.assign(logits.size(), 0.0);
  a.one_hot[a.label] = 1.0;
  return a;
}

void hard_assignment_backward(std::span<const double> grad_one_hot, std::span<double> grad_logits) {
  for (std::size_t k = 0; k < grad_one_hot.size(); ++k) grad_logits[k] += grad_one_hot[k];
}

void ModelConfig::validate() const {
  require(num_objects >= 1, "num_objects (K) must be at least 1");
  require(num_objects <= 250, "num_objects (K) must fit an 8-bit label map");
  require(resolution.nx > 0 && resolution.ny > 0 && resolution.nz > 0,
          "grid resolution must be positive");
  bounds.validate();
  sh_basis_count(sh_degree);
  require(semantic_init_range >= 0.0, "semantic_init_range must be non-negative");
}

SceneModel::SceneModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  const int L = config.num_objects + 1;
  density_ = VoxelField(config.resolution, 1, config.bounds);
  density_.fill(config.density_init);
  semantics_ = VoxelField(config.resolution, L, config.bounds);
  Rng rng(seed);
  for (double& v : semantics_.values())
    v = rng.uniform(-config.semantic_init_range, config.semantic_init_range);
  const int B = sh_basis_count(config.sh_degree);
  colors_.reserve(L);
  for (int k = 0; k < L; ++k) {
    VoxelField field(config.resolution, 3 * B, config.bounds);
    if (config.color_init != 0.0) {
      for (std::size_t cell = 0; cell < config.resolution.cell_count(); ++cell)
        for (int ch = 0; ch < 3; ++ch) field.cell(cell)[ch * B] = config.color_init;
    }
    colors_.push_back(std::move(field));
  }
}

std::vector<VoxelField*> SceneModel::fields() {
  std::vector<VoxelField*> out{&density_, &semantics_};
  for (auto& c : colors_) out.push_back(&c);
  return out;
}

std::vector<const VoxelField*> SceneModel::fields() const {
  std::vector<const VoxelField*> out{&density_, &semantics_};
  for (const auto& c : colors_) out.push_back(&c);
  return out;
}

void SceneModel::zero_gradients() {
  for (auto* f : fields()) f->zero_gradient();
}

void SceneModel::check_label(int k) const {
  require(k >= 0 && k <= config_.num_objects, "label out of range");
}

double SceneModel::raw_density_at(const Vec3& x) const { return density_.sample(x)[0]; }

double SceneModel::density_at(const Vec3& x) const { return softplus(raw_density_at(x)); }

std::vector<double> SceneModel::semantic_logits_at(const Vec3& x) const {
  return semantics_.sample(x);
}

Assignment SceneModel::assignment_at(const Vec3& x) const {
  return hard_assignment(semantic_logits_at(x));
}

double SceneModel::object_mask_at(const Vec3& x, int k) const {
  check_label(k);
  return assignment_at(x).one_hot[k];
}

Rgb shade(const double* coeffs, std::span<const double> basis) {
  const int B = static_cast<int>(basis.size());
  Rgb out;
  for (int ch = 0; ch < 3; ++ch) {
    double acc = 0.0;
    for (int b = 0; b < B; ++b) acc += coeffs[ch * B + b] * basis[b];
    out[ch] = sigmoid(acc);
  }
  return out;
}

Rgb SceneModel::color_at(int k, const Vec3& x, const Vec3& dir) const {
  check_label(k);
  std::vector<double> basis(sh_count());
  sh_basis(config_.sh_degree, dir, basis);
  const auto coeffs = colors_[k].sample(x);
  return shade(coeffs.data(), basis);
}

Rgb SceneModel::composite_color_at(const Vec3& x, const Vec3& dir) const {
  const auto a = assignment_at(x);
  Rgb c = Rgb::Zero();
  for (int k = 0; k < num_labels(); ++k)
    if (a.one_hot[k] != 0.0) c += a.one_hot[k] * color_at(k, x, dir);
  return c;
}

Rgb SceneModel::erroneous_color_at(int i, int j, const Vec3& x, const Vec3& dir) const {
  check_label(i);
  check_label(j);
  require(i != j, "erroneous color requires two distinct labels");
  const double m = object_mask_at(x, i);
  return m * color_at(j, x, dir) + (1.0 - m) * color_at(i, x, dir);
}

}  // namespace rfp
