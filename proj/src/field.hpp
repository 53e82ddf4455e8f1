#pragma once

#include <array>
#include <span>
#include <vector>

#include "common.hpp"

namespace rfp {

struct GridShape {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  bool operator==(const GridShape&) const = default;
};

// The eight cells surrounding a point and their trilinear weights.
struct Stencil {
  std::array<std::int32_t, 8> cell{};
  std::array<double, 8> weight{};
};

// Cell-centered lattice shared by every field of a model. Points outside the
// lattice of cell centers are clamped onto it.
class GridGeometry {
 public:
  GridGeometry() = default;
  GridGeometry(GridShape shape, Aabb bounds);

  const GridShape& shape() const { return shape_; }
  const Aabb& bounds() const { return bounds_; }
  Vec3 cell_size() const { return cell_size_; }
  Vec3 cell_center(int ix, int iy, int iz) const;
  std::size_t flat_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * shape_.ny + iy) * shape_.nx + ix;
  }

  Stencil stencil(const Vec3& x) const;

 private:
  GridShape shape_;
  Aabb bounds_;
  Vec3 cell_size_ = Vec3::Ones();
};

// Dense grid of learnable parameters, channel-innermost, with a gradient
// buffer of identical shape.
class VoxelField {
 public:
  VoxelField() = default;
  VoxelField(GridShape shape, int channels, Aabb bounds);

  const GridGeometry& geometry() const { return geometry_; }
  const GridShape& shape() const { return geometry_.shape(); }
  const Aabb& bounds() const { return geometry_.bounds(); }
  int channels() const { return channels_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> gradient() { return gradient_; }
  std::span<const double> gradient() const { return gradient_; }

  double* cell(std::size_t index) { return values_.data() + index * channels_; }
  const double* cell(std::size_t index) const { return values_.data() + index * channels_; }
  double* cell_gradient(std::size_t index) { return gradient_.data() + index * channels_; }

  void fill(double v);
  void zero_gradient();

  // out.size() == channels()
  void gather(const Stencil& s, std::span<double> out) const;
  void scatter_gradient(const Stencil& s, std::span<const double> grad);

  std::vector<double> sample(const Vec3& x) const;

 private:
  GridGeometry geometry_;
  int channels_ = 1;
  std::vector<double> values_;
  std::vector<double> gradient_;
};

std::vector<double> trilinear_sample(const VoxelField& field, const Vec3& x);

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Real spherical-harmonic basis, degree 0..2.
int sh_basis_count(int degree);
void sh_basis(int degree, const Vec3& dir, std::span<double> out);

struct Assignment {
  std::vector<double> one_hot;
  std::vector<double> logits;
  int label = 0;
};

// Forward value one-hot(argmax) with lowest-index ties.
int argmax_label(std::span<const double> logits);
Assignment hard_assignment(std::span<const double> logits);
// Straight-through backward: the one-hot output's gradient flows to the logits unchanged.
void hard_assignment_backward(std::span<const double> grad_one_hot, std::span<double> grad_logits);

struct ModelConfig {
  int num_objects = 1;  // K
  GridShape resolution{64, 64, 64};
  Aabb bounds;
  int sh_degree = 0;
  double density_init = -1.0;
  double semantic_init_range = 1e-2;
  double color_init = 0.0;

  void validate() const;
};

// Layered scene: one density grid, one (K+1)-channel semantic grid and K+1
// color grids holding SH coefficients per RGB channel (layout ch * B + b).
// Label 0 is the background.
class SceneModel {
 public:
  SceneModel() = default;
  SceneModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  int num_objects() const { return config_.num_objects; }
  int num_labels() const { return config_.num_objects + 1; }
  int sh_degree() const { return config_.sh_degree; }
  int sh_count() const { return sh_basis_count(config_.sh_degree); }
  const GridGeometry& geometry() const { return density_.geometry(); }
  const Aabb& bounds() const { return density_.bounds(); }

  VoxelField& density() { return density_; }
  const VoxelField& density() const { return density_; }
  VoxelField& semantics() { return semantics_; }
  const VoxelField& semantics() const { return semantics_; }
  VoxelField& color(int k) { return colors_.at(k); }
  const VoxelField& color(int k) const { return colors_.at(k); }

  // Density, semantics, then colors 0..K.
  std::vector<VoxelField*> fields();
  std::vector<const VoxelField*> fields() const;
  void zero_gradients();

  double raw_density_at(const Vec3& x) const;
  double density_at(const Vec3& x) const;
  std::vector<double> semantic_logits_at(const Vec3& x) const;
  Assignment assignment_at(const Vec3& x) const;
  double object_mask_at(const Vec3& x, int k) const;
  Rgb color_at(int k, const Vec3& x, const Vec3& dir) const;
  Rgb composite_color_at(const Vec3& x, const Vec3& dir) const;
  Rgb erroneous_color_at(int i, int j, const Vec3& x, const Vec3& dir) const;

  void check_label(int k) const;

 private:
  ModelConfig config_;
  VoxelField density_;
  VoxelField semantics_;
  std::vector<VoxelField> colors_;
};

// Color from SH coefficients (3 * B values) contracted with a precomputed basis.
Rgb shade(const double* coeffs, std::span<const double> basis);

}  // namespace rfp
