#include "optimizer.hpp"

#include <cmath>

namespace rfp {

void TouchedCells::clear() {
  list_.clear();
  if (++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    epoch_ = 1;
  }
}

LazyAdam::LazyAdam(SceneModel& model, AdamOptions options) : model_(model), options_(options) {
  for (const auto* f : model.fields()) {
    m_.emplace_back(f->values().size(), 0.0);
    v_.emplace_back(f->values().size(), 0.0);
  }
}

void LazyAdam::step(const TouchedCells& touched, double learning_rate) {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double step_size = learning_rate / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
  auto fields = model_.fields();
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const int C = fields[f]->channels();
    auto values = fields[f]->values();
    auto grads = fields[f]->gradient();
    auto& m = m_[f];
    auto& v = v_[f];
    for (const std::int32_t cell : touched.cells()) {
      const std::size_t base = static_cast<std::size_t>(cell) * C;
      for (int c = 0; c < C; ++c) {
        const std::size_t i = base + c;
        const double g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        values[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + options_.epsilon);
        grads[i] = 0.0;
      }
    }
  }
}

}  // namespace rfp
