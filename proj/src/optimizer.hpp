#pragma once

#include <vector>

#include "field.hpp"

namespace rfp {

// Cells written by the current backward pass; every field of a model shares
// one lattice so one set covers them all.
class TouchedCells {
 public:
  explicit TouchedCells(std::size_t cell_count = 0) : stamp_(cell_count, 0) {}
  void add(std::int32_t cell) {
    if (stamp_[cell] != epoch_) {
      stamp_[cell] = epoch_;
      list_.push_back(cell);
    }
  }
  const std::vector<std::int32_t>& cells() const { return list_; }
  void clear();

 private:
  std::vector<std::uint32_t> stamp_;
  std::vector<std::int32_t> list_;
  std::uint32_t epoch_ = 1;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

// Adam restricted to the cells touched in a step (lazy/sparse Adam): moments
// of untouched cells are left as they are. Bias correction uses the global step.
class LazyAdam {
 public:
  LazyAdam(SceneModel& model, AdamOptions options = {});
  // Applies one step on the touched cells and zeroes their gradients.
  void step(const TouchedCells& touched, double learning_rate);
  long steps() const { return step_; }

 private:
  SceneModel& model_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long step_ = 0;
};

}  // namespace rfp
