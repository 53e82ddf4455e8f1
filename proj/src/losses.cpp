#include "losses.hpp"

#include <algorithm>
#include <cmath>

namespace rfp {

void LossWeights::validate() const {
  require(std::isfinite(lambda_prop) && lambda_prop >= 0.0, "lambda_prop must be finite and >= 0");
  require(std::isfinite(lambda_init) && lambda_init >= 0.0, "lambda_init must be finite and >= 0");
}

double propagation_term(std::span<const double> colors, std::span<const std::uint8_t> in_mask,
                        int channels, std::span<double> grad_colors, std::span<double> grad_mask) {
  const std::size_t n = in_mask.size();
  std::vector<double> mu(channels, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_mask[i]) continue;
    ++count;
    for (int c = 0; c < channels; ++c) mu[c] += colors[i * channels + c];
  }
  if (count == 0) return 0.0;
  for (double& m : mu) m /= static_cast<double>(count);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_mask[i]) continue;
    double sq = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double d = colors[i * channels + c] - mu[c];
      sq += d * d;
      if (!grad_colors.empty()) grad_colors[i * channels + c] += 2.0 * d;
    }
    loss += sq;
    if (!grad_mask.empty()) grad_mask[i] -= 2.0 * sq;
  }
  return loss;
}

double init_cross_entropy(std::span<const double> logits, int target, std::span<double> grad) {
  const std::size_t L = logits.size();
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double s : logits) z += std::exp(s - peak);
  const double log_p = logits[target] - peak - std::log(z);
  constexpr double kFloor = -18.420680743952367;  // log(1e-8)
  if (log_p < kFloor) return -kFloor;
  if (!grad.empty()) {
    for (std::size_t k = 0; k < L; ++k)
      grad[k] += std::exp(logits[k] - peak) / z - (static_cast<int>(k) == target ? 1.0 : 0.0);
  }
  return -log_p;
}

BatchStats compute_batch_stats(std::span<const RayTrace> traces, double min_weight) {
  BatchStats stats;
  if (traces.empty()) return stats;
  const int L = traces.front().labels;
  stats.mean.assign(L, Rgb::Zero());
  stats.count.assign(L, 0);
  for (const auto& tr : traces) {
    for (int p = 0; p < tr.samples; ++p) {
      if (tr.weight[p] < min_weight) continue;
      const int l = tr.label[p];
      const double* c = tr.color(p, l);
      stats.mean[l] += Rgb(c[0], c[1], c[2]);
      ++stats.count[l];
    }
  }
  for (int k = 0; k < L; ++k)
    if (stats.count[k] > 0) stats.mean[k] /= static_cast<double>(stats.count[k]);
  return stats;
}

namespace {

Rgb rgb_at(const double* c) { return Rgb(c[0], c[1], c[2]); }

void add_rgb(double* dst, const Rgb& v) {
  dst[0] += v[0];
  dst[1] += v[1];
  dst[2] += v[2];
}

}  // namespace

LossBreakdown ray_loss(const RayTrace& tr, const RayTarget& target, const BatchStats& stats,
                       const LossConfig& config, RayGradient* grad) {
  const int P = tr.samples;
  const int L = tr.labels;
  const int K = L - 1;
  const auto& weights = config.weights;
  const auto& photo = config.photo;
  LossBreakdown out;

  // Correct composite.
  const Rgb c_hat = render_color(tr);
  const Rgb residual = c_hat - target.color;
  out.photo_pos = residual.matrix().squaredNorm();
  const Rgb g_hat = 2.0 * residual;

  // Erroneous composites.
  const double pair_scale = 1.0 / (static_cast<double>(K) * (K + 1));
  std::vector<Rgb> g_pair;
  bool any_pair_grad = false;
  if (photo.negative_term && P > 0) {
    std::vector<Rgb> c_err;
    render_erroneous_all(tr, c_err);
    g_pair.assign(static_cast<std::size_t>(L) * L, Rgb::Zero());
    double clamped_sum = 0.0;
    for (int i = 0; i < L; ++i) {
      for (int j = 0; j < L; ++j) {
        if (i == j) continue;
        const Rgb e = c_err[i * L + j] - target.color;
        const double err = e.matrix().squaredNorm();
        if (err < photo.clamp) {
          clamped_sum += err;
          g_pair[i * L + j] = -pair_scale * 2.0 * e;
          any_pair_grad = true;
        } else {
          clamped_sum += photo.clamp;
        }
      }
    }
    out.photo_neg = pair_scale * clamped_sum;
  } else if (photo.negative_term) {
    // Empty ray: every erroneous render is black.
    const double err = target.color.matrix().squaredNorm();
    out.photo_neg = std::min(err, photo.clamp);
  }

  // Rendered semantics and initial-estimation loss.
  std::vector<double> g_sem;
  if (target.init_label >= 0) {
    const auto s_hat = render_semantics(tr);
    std::vector<double> g(L, 0.0);
    out.init = init_cross_entropy(s_hat, target.init_label, g);
    g_sem.resize(L);
    for (int k = 0; k < L; ++k) g_sem[k] = weights.lambda_init * g[k];
  }

  // Propagation regularizer (per-sample, batch means detached).
  const double lp = weights.lambda_prop;
  for (int p = 0; p < P; ++p) {
    if (tr.weight[p] < config.prop_min_weight) continue;
    for (int k = 0; k < L; ++k) {
      if (k == tr.label[p] || stats.count[k] == 0) continue;
      const Rgb d = rgb_at(tr.color(p, k)) - stats.mean[k];
      out.prop += d.matrix().squaredNorm();
    }
  }

  out.total = out.photo() + weights.lambda_prop * out.prop + weights.lambda_init * out.init;
  if (!grad) return out;

  grad->raw_density.assign(P, 0.0);
  grad->logits.assign(static_cast<std::size_t>(P) * L, 0.0);
  grad->colors.assign(static_cast<std::size_t>(P) * L * 3, 0.0);
  if (P == 0) return out;

  std::vector<double> g_weight(P, 0.0);  // dL/dw_p from every term the density may see
  std::vector<double> d_mask(L);
  std::vector<Rgb> g_out(L);  // sum_{j != k} g_kj
  const double neg_density = photo.negative_updates_density ? 1.0 : 0.0;
  const double neg_sem = photo.negative_updates_semantics ? 1.0 : 0.0;
  const double neg_col = photo.negative_updates_colors ? 1.0 : 0.0;
  if (any_pair_grad) {
    for (int k = 0; k < L; ++k) {
      g_out[k] = Rgb::Zero();
      for (int j = 0; j < L; ++j)
        if (j != k) g_out[k] += g_pair[k * L + j];
    }
  }

  for (int p = 0; p < P; ++p) {
    const double w = tr.weight[p];
    const int l = tr.label[p];
    double* dc = grad->colors.data() + static_cast<std::size_t>(p) * L * 3;
    double* ds = grad->logits.data() + static_cast<std::size_t>(p) * L;
    std::fill(d_mask.begin(), d_mask.end(), 0.0);

    // Composite color c = sum_k m_k c_k.
    const Rgb c_l = rgb_at(tr.color(p, l));
    add_rgb(dc + 3 * l, w * g_hat);
    for (int k = 0; k < L; ++k) d_mask[k] += w * (g_hat * rgb_at(tr.color(p, k))).sum();
    g_weight[p] += (g_hat * c_l).sum();

    // Erroneous composites c~_ij = m_i c_j + (1 - m_i) c_i.
    if (any_pair_grad) {
      double gw_neg = 0.0;
      for (int k = 0; k < L; ++k) {
        const Rgb c_k = rgb_at(tr.color(p, k));
        if (k != l) {
          add_rgb(dc + 3 * k, neg_col * w * (g_out[k] + g_pair[l * L + k]));
          gw_neg += (g_pair[l * L + k] * c_k).sum() + (g_out[k] * c_k).sum();
        }
        double dm = 0.0;
        for (int j = 0; j < L; ++j)
          if (j != k) dm += (g_pair[k * L + j] * (rgb_at(tr.color(p, j)) - c_k)).sum();
        d_mask[k] += neg_sem * w * dm;
      }
      g_weight[p] += neg_density * gw_neg;
    }

    // Rendered semantics.
    if (!g_sem.empty()) {
      const double* s = tr.logit(p);
      for (int k = 0; k < L; ++k) {
        ds[k] += w * g_sem[k];
        g_weight[p] += g_sem[k] * s[k];
      }
    }

    // Propagation: d/dc_k = 2 lp (c_k - mu_k), d/dm_k = -2 lp |c_k - mu_k|^2.
    if (lp > 0.0 && w >= config.prop_min_weight) {
      for (int k = 0; k < L; ++k) {
        if (k == l || stats.count[k] == 0) continue;
        const Rgb d = rgb_at(tr.color(p, k)) - stats.mean[k];
        add_rgb(dc + 3 * k, 2.0 * lp * d);
        d_mask[k] -= 2.0 * lp * d.matrix().squaredNorm();
      }
    }

    hard_assignment_backward(d_mask, std::span<double>(ds, L));
  }

  // Weights to density: w_p = T_p (1 - e^{-tau_p}), T_p = exp(-sum_{q<p} tau_q).
  double suffix = 0.0;  // sum_{q > p} g_q w_q
  for (int p = P - 1; p >= 0; --p) {
    const double tau = tr.sigma[p] * tr.delta[p];
    const double d_tau = g_weight[p] * tr.transmittance[p] * std::exp(-tau) - suffix;
    suffix += g_weight[p] * tr.weight[p];
    grad->raw_density[p] = d_tau * tr.delta[p] * sigmoid(tr.raw_density[p]);
  }
  return out;
}

LossBreakdown batch_loss(std::span<const RayTrace> traces, std::span<const RayTarget> targets,
                         const LossConfig& config, std::vector<RayGradient>* grads,
                         BatchStats* stats_out) {
  require(traces.size() == targets.size(), "one target per ray is required");
  const BatchStats stats = compute_batch_stats(traces, config.prop_min_weight);
  std::vector<LossBreakdown> per_ray(traces.size());
  if (grads) grads->resize(traces.size());
  parallel_for(traces.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r)
      per_ray[r] = ray_loss(traces[r], targets[r], stats, config, grads ? &(*grads)[r] : nullptr);
  });
  LossBreakdown total;
  for (const auto& l : per_ray) {
    total.photo_pos += l.photo_pos;
    total.photo_neg += l.photo_neg;
    total.prop += l.prop;
    total.init += l.init;
  }
  total.total = total_loss(total.photo(), total.prop, total.init, config.weights);
  if (stats_out) *stats_out = stats;
  return total;
}

double loss_prop(std::span<const RayTrace> traces, const LossConfig& config) {
  std::vector<RayTarget> targets(traces.size());
  LossConfig c = config;
  c.photo.negative_term = false;
  return batch_loss(traces, targets, c, nullptr).prop;
}

double loss_photo_bidirectional(std::span<const RayTrace> traces, std::span<const RayTarget> targets,
                                const PhotoOptions& options) {
  LossConfig c;
  c.photo = options;
  return batch_loss(traces, targets, c, nullptr).photo();
}

double loss_init(std::span<const RayTrace> traces, std::span<const RayTarget> targets) {
  return batch_loss(traces, targets, LossConfig{}, nullptr).init;
}

double total_loss(double photo, double prop, double init, const LossWeights& weights) {
  return photo + weights.lambda_prop * prop + weights.lambda_init * init;
}

}  // namespace rfp
