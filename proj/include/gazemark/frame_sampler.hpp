#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gazemark {

struct SamplingConfig {
  double lambda = 0.1;        // temporal bias strength, in [0, 1]
  int sample_size = 15;       // n, number of frames to select
  std::uint64_t seed = 0;

  bool operator==(const SamplingConfig&) const = default;
};

struct SamplingPlan {
  std::vector<int> frame_indices;       // strictly increasing, always ends with N_v-1
  std::vector<double> probabilities;    // over indices 0..N_v-2; empty when N_v == 1
  SamplingConfig config_used;
  int sequence_length = 0;              // N_v
};

// Inverse-exponential selection probabilities over frame indices 0..N_v-2:
// element i is exp(-lambda*(N_v-2-i)) normalized over all eligible indices,
// so the weight at the last eligible index is exactly 1 before normalizing
// and lambda == 0 collapses to the exact uniform 1/(N_v-1).
// Throws std::domain_error if lambda is outside [0, 1],
// std::invalid_argument if sequence_length < 2.
std::vector<double> compute_weights(int sequence_length, double lambda);

// Weighted sampling without replacement via exponential keys
// (key_i = u_i^(1/w_i), take the top `count`), computed in the log domain.
// Returns indices in draw order: element 0 is the first draw, whose
// distribution is exactly weights/sum(weights). Zero-weight indices are
// selected only after every positive-weight index is exhausted.
// Throws std::invalid_argument if count > weights.size() or any weight is
// negative or non-finite.
std::vector<std::size_t> weighted_sample_without_replacement(
    const std::vector<double>& weights, std::size_t count, std::mt19937_64& rng);

// Draws a sampling plan: the final frame is always included, and the
// remaining min(n-1, N_v-1) indices come from compute_weights via
// weighted_sample_without_replacement. Pure function of its arguments.
// Throws std::domain_error if sample_size < 1 or lambda is outside [0, 1],
// std::invalid_argument if sequence_length < 1.
SamplingPlan draw_plan(int sequence_length, const SamplingConfig& config);

// timestamp_k = frame_index_k / fps. Throws std::domain_error if fps <= 0.
std::vector<double> plan_to_timestamps(const SamplingPlan& plan, double fps);

}  // namespace gazemark
