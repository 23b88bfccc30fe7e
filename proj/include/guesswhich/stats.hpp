#pragma once

#include <cstdint>
#include <span>

#include "guesswhich/embedding.hpp"
#include "guesswhich/pool_spec.hpp"

namespace guesswhich::analytics {

/// Arithmetic mean of ranks; lower is better. Throws EmptyInput.
double mean_rank(std::span<const int> ranks);

/// Mean of 1/rank; higher is better. Throws EmptyInput or NonPositiveRank.
double mean_reciprocal_rank(std::span<const int> ranks);

/// Rank of the secret when the pool is sorted by euclidean distance to the
/// guess's embedding (guess included at distance 0; ties by image id).
/// Throws UnknownImage or MissingEmbedding.
int coarse_round_rank(const pools::EmbeddingStore& store, const PoolSpec& pool, const ImageId& guess_id,
                      const ImageId& secret_id);

struct BootstrapOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double point = 0.0;  // statistic on the original sample
};

/// Percentile bootstrap CI for the mean. With B resamples and k = floor(B *
/// (1 - level) / 2), the endpoints are the (k+1)-th smallest and (k+1)-th
/// largest resampled means. Throws TooFewSamples below two values.
ConfidenceInterval bootstrap_ci(std::span<const double> values, const BootstrapOptions& options = {});

enum class PValueMethod { Exact, NormalApproximation };

struct MannWhitneyResult {
  double u_a = 0.0;
  double u_b = 0.0;
  double p_two_sided = 1.0;
  PValueMethod method = PValueMethod::NormalApproximation;
};

/// Combined sample size at or below which the p-value is computed by exact
/// enumeration of the permutation distribution of the midrank sum.
inline constexpr std::size_t kMannWhitneyExactLimit = 12;

/// Two-sided Mann-Whitney U with midranks for ties. Above the exact limit the
/// p-value uses the normal approximation with tie and continuity corrections.
/// Throws EmptyInput.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Standard error of the mean (sample standard deviation / sqrt(n)).
double standard_error(std::span<const double> values);

}  // namespace guesswhich::analytics
