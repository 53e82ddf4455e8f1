#include "em.hpp"

#include <cmath>

namespace rfp {

EmMatrix init_means(const FeatureMap& f, const LabelMap& masks, int num_labels, Warnings* warnings) {
  require(num_labels >= 1, "EM needs at least one label");
  require(masks.width == f.width && masks.height == f.height, "EM masks and features differ in resolution");
  EmMatrix sums = EmMatrix::Zero(num_labels, f.dims);
  Eigen::RowVectorXd global = Eigen::RowVectorXd::Zero(f.dims);
  std::vector<std::size_t> counts(num_labels, 0);
  for (std::size_t p = 0; p < f.pixel_count(); ++p) {
    const Eigen::Map<const Eigen::RowVectorXd> v(f.pixel(p), f.dims);
    global += v;
    const int l = masks.labels[p];
    if (l < num_labels) {
      sums.row(l) += v;
      ++counts[l];
    }
  }
  global /= static_cast<double>(f.pixel_count());
  for (int k = 0; k < num_labels; ++k) {
    if (counts[k] == 0) {
      warn(warnings, "EM: label " + std::to_string(k) + " has an empty mask; using the global feature mean");
      sums.row(k) = global;
    } else {
      sums.row(k) /= static_cast<double>(counts[k]);
    }
  }
  return sums;
}

void e_step(EmState& state, const FeatureMap& f) {
  const Eigen::Index k = state.means.rows();
  require(k >= 1 && state.means.cols() == f.dims, "EM means do not match the feature dimension");
  state.responsibilities.resize(static_cast<Eigen::Index>(f.pixel_count()), k);
  for (std::size_t p = 0; p < f.pixel_count(); ++p) {
    const Eigen::Map<const Eigen::RowVectorXd> v(f.pixel(p), f.dims);
    auto z = state.responsibilities.row(p);
    for (Eigen::Index c = 0; c < k; ++c) z(c) = -(v - state.means.row(c)).squaredNorm();
    z.array() -= z.maxCoeff();
    z = z.array().exp().matrix();
    z /= z.sum();
  }
}

void m_step(EmState& state, const FeatureMap& f, Warnings* warnings) {
  const Eigen::Index k = state.means.rows();
  require(state.responsibilities.rows() == static_cast<Eigen::Index>(f.pixel_count()) &&
              state.responsibilities.cols() == k,
          "EM responsibilities not computed");
  const Eigen::Map<const EmMatrix> v(f.data.data(), static_cast<Eigen::Index>(f.pixel_count()), f.dims);
  const EmMatrix weighted = state.responsibilities.transpose() * v;
  const Eigen::RowVectorXd mass = state.responsibilities.colwise().sum();
  for (Eigen::Index c = 0; c < k; ++c) {
    if (mass(c) < 1e-12) {
      warn(warnings, "EM: label " + std::to_string(c) + " lost all responsibility; mean kept");
      continue;
    }
    state.means.row(c) = weighted.row(c) / mass(c);
  }
  ++state.iteration;
}

EmResult refine(const LabelMap& masks, const EmMatrix& logits, const FeatureMap& input, const EmOptions& options,
                Warnings* warnings) {
  require(options.iterations >= 0, "EM iteration count must be >= 0");
  require(options.feature_scale > 0.0, "EM feature scale must be > 0");
  FeatureMap scaled;
  if (options.feature_scale != 1.0) {
    scaled = input;
    for (double& v : scaled.data) v *= options.feature_scale;
  }
  const FeatureMap& f = options.feature_scale != 1.0 ? scaled : input;
  require(logits.rows() == static_cast<Eigen::Index>(f.pixel_count()), "EM logits do not match the feature map");
  const int labels = static_cast<int>(logits.cols());
  EmResult r;
  r.state.means = init_means(f, masks, labels, warnings);
  e_step(r.state, f);
  for (int t = 0; t < options.iterations; ++t) {
    m_step(r.state, f, warnings);
    e_step(r.state, f);
  }
  r.final_scores = r.state.responsibilities;
  for (Eigen::Index p = 0; p < logits.rows(); ++p) {
    if (options.mixing == EmMixing::kLogit) {
      r.final_scores.row(p) += options.weight * logits.row(p);
    } else {
      Eigen::RowVectorXd s = logits.row(p).array() - logits.row(p).maxCoeff();
      s = s.array().exp().matrix();
      r.final_scores.row(p) += options.weight * (s / s.sum());
    }
  }
  r.labels = LabelMap(f.width, f.height, 0);
  for (Eigen::Index p = 0; p < logits.rows(); ++p) {
    Eigen::Index best = 0;
    const auto row = r.final_scores.row(p);
    for (Eigen::Index c = 1; c < row.size(); ++c)
      if (row(c) > row(best)) best = c;
    r.labels.labels[p] = static_cast<std::uint8_t>(best);
  }
  return r;
}

}  // namespace rfp
