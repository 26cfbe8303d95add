#include "gazemark/frame_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gazemark/rng.hpp"

namespace gazemark {

std::vector<double> compute_weights(int sequence_length, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::domain_error("lambda must be in [0, 1]");
  }
  if (sequence_length < 2) {
    throw std::invalid_argument("sequence_length must be >= 2");
  }
  const int count = sequence_length - 1;
  std::vector<double> weights(count);
  double sum = 0.0;
  for (int i = 0; i < count; ++i) {
    weights[i] = std::exp(-lambda * static_cast<double>(count - 1 - i));
    sum += weights[i];
  }
  for (double& w : weights) {
    w /= sum;
  }
  return weights;
}

std::vector<std::size_t> weighted_sample_without_replacement(
    const std::vector<double>& weights, std::size_t count, std::mt19937_64& rng) {
  if (count > weights.size()) {
    throw std::invalid_argument("cannot draw more items than weights given");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights must be finite and non-negative");
    }
  }
  // log(key_i) = log(u_i) / w_i with u_i uniform on [0, 1). Using
  // log1p(-u) keeps the argument in (0, 1] so the log never hits zero
  // from below; the transform is monotone, so ordering is preserved.
  std::vector<double> log_keys(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double u = uniform01(rng);
    log_keys[i] = weights[i] > 0.0
                      ? std::log1p(-u) / weights[i]
                      : -std::numeric_limits<double>::infinity();
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return log_keys[a] > log_keys[b];
                   });
  order.resize(count);
  return order;
}

SamplingPlan draw_plan(int sequence_length, const SamplingConfig& config) {
  if (config.sample_size < 1) {
    throw std::domain_error("sample_size must be >= 1");
  }
  if (sequence_length < 1) {
    throw std::invalid_argument("sequence_length must be >= 1");
  }
  SamplingPlan plan;
  plan.config_used = config;
  plan.sequence_length = sequence_length;

  if (sequence_length >= 2) {
    plan.probabilities = compute_weights(sequence_length, config.lambda);
  }

  if (config.sample_size >= sequence_length) {
    plan.frame_indices.resize(sequence_length);
    std::iota(plan.frame_indices.begin(), plan.frame_indices.end(), 0);
    return plan;
  }

  std::mt19937_64 rng(config.seed);
  const std::size_t extra = static_cast<std::size_t>(config.sample_size) - 1;
  std::vector<std::size_t> drawn =
      weighted_sample_without_replacement(plan.probabilities, extra, rng);

  plan.frame_indices.reserve(config.sample_size);
  for (std::size_t idx : drawn) {
    plan.frame_indices.push_back(static_cast<int>(idx));
  }
  plan.frame_indices.push_back(sequence_length - 1);
  std::sort(plan.frame_indices.begin(), plan.frame_indices.end());
  return plan;
}

std::vector<double> plan_to_timestamps(const SamplingPlan& plan, double fps) {
  if (!(fps > 0.0)) {
    throw std::domain_error("fps must be positive");
  }
  std::vector<double> out;
  out.reserve(plan.frame_indices.size());
  for (int idx : plan.frame_indices) {
    out.push_back(static_cast<double>(idx) / fps);
  }
  return out;
}

}  // namespace gazemark
