#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "features.hpp"

namespace rfp {

using EmMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Means are (K+1) x d_v; responsibilities are pixels x (K+1).
struct EmState {
  EmMatrix means;
  EmMatrix responsibilities;
  int iteration = 0;
};

// Mask-weighted mean feature per label 0..num_labels-1. Labels with no pixel
// fall back to the global feature mean.
EmMatrix init_means(const FeatureMap& features, const LabelMap& masks, int num_labels,
                    Warnings* warnings = nullptr);

// z_k(x) = softmax_k(-||v(x) - mu_k||^2).
void e_step(EmState& state, const FeatureMap& features);

// mu_k = sum_x z_k(x) v(x) / sum_x z_k(x); classes with total mass < 1e-12 keep their mean.
void m_step(EmState& state, const FeatureMap& features, Warnings* warnings = nullptr);

enum class EmMixing { kProbability, kLogit };

struct EmOptions {
  int iterations = 10;  // T
  double weight = 1.0;  // w
  EmMixing mixing = EmMixing::kProbability;
  // Features are multiplied by this before EM; it sets the sharpness of the
  // posteriors exp(-||v - mu||^2).
  double feature_scale = 1.0;
};

struct EmResult {
  LabelMap labels;
  EmMatrix final_scores;  // S_final, pixels x (K+1)
  EmState state;
};

// logits: pixels x (K+1) rendered semantic logits for the same view. T sweeps of
// e/m from init_means, then S_final = Z + w * softmax(logits) (or + w * logits
// in logit mode) and the refined label is its argmax.
EmResult refine(const LabelMap& masks, const EmMatrix& logits, const FeatureMap& features,
                const EmOptions& options, Warnings* warnings = nullptr);

}  // namespace rfp
