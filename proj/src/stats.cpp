#include "guesswhich/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "guesswhich/error.hpp"
#include "guesswhich/rng.hpp"

namespace guesswhich::analytics {

double mean_rank(std::span<const int> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::EmptyInput, "mean rank of an empty sample");
  long long sum = 0;
  for (int r : ranks) sum += r;
  return static_cast<double>(sum) / static_cast<double>(ranks.size());
}

double mean_reciprocal_rank(std::span<const int> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::EmptyInput, "mean reciprocal rank of an empty sample");
  double sum = 0.0;
  for (int r : ranks) {
    if (r < 1) throw Error(ErrorCode::NonPositiveRank, "rank " + std::to_string(r) + " is not positive");
    sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

int coarse_round_rank(const pools::EmbeddingStore& store, const PoolSpec& pool, const ImageId& guess_id,
                      const ImageId& secret_id) {
  if (!pool.contains(guess_id)) throw Error(ErrorCode::UnknownImage, "guess '" + guess_id + "' is not in the pool");
  if (!pool.contains(secret_id)) throw Error(ErrorCode::UnknownImage, "secret '" + secret_id + "' is not in the pool");
  const auto guess = store.vector(guess_id);
  const double secret_d = pools::squared_distance(guess, store.vector(secret_id));
  // Rank = 1 + images strictly ahead of the secret in (distance, id) order.
  int rank = 1;
  for (const auto& id : pool.image_ids) {
    if (id == secret_id) continue;
    const double d = pools::squared_distance(guess, store.vector(id));
    if (d < secret_d || (d == secret_d && id < secret_id)) ++rank;
  }
  return rank;
}

ConfidenceInterval bootstrap_ci(std::span<const double> values, const BootstrapOptions& options) {
  if (values.size() < 2) throw Error(ErrorCode::TooFewSamples, "bootstrap needs at least two values");
  if (options.resamples < 1 || !(options.level > 0.0 && options.level < 1.0))
    throw Error(ErrorCode::InvalidParameter, "bootstrap needs resamples >= 1 and level in (0, 1)");

  const auto n = values.size();
  ConfidenceInterval ci;
  ci.point = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);

  Rng rng(options.seed);
  std::vector<double> means(static_cast<std::size_t>(options.resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[static_cast<std::size_t>(rng.uniform_index(n))];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const auto b = means.size();
  auto k = static_cast<std::size_t>(std::floor(static_cast<double>(b) * (1.0 - options.level) / 2.0 + 1e-9));
  k = std::min(k, (b - 1) / 2);
  ci.lo = means[k];
  ci.hi = means[b - 1 - k];
  return ci;
}

namespace {

/// Midranks (1-based) of the pooled sample, in pooled order, plus the tie term sum(t^3 - t).
std::vector<double> midranks(const std::vector<double>& pooled, double& tie_term) {
  const auto n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
  std::vector<double> ranks(n);
  tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

double exact_p(const std::vector<double>& ranks, std::size_t na, double u_obs) {
  const auto n = ranks.size();
  const double na_d = static_cast<double>(na);
  const double mu = na_d * static_cast<double>(n - na) / 2.0;
  const double observed = std::abs(u_obs - mu);
  std::uint64_t extreme = 0;
  std::uint64_t total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != na) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) sum += ranks[i];
    const double u = sum - na_d * (na_d + 1.0) / 2.0;
    ++total;
    // midranks are multiples of 1/2, so these sums are exact
    if (std::abs(u - mu) >= observed) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "Mann-Whitney U needs two nonempty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double tie_term = 0.0;
  const auto ranks = midranks(pooled, tie_term);

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double n = na + nb;
  const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);

  MannWhitneyResult result;
  result.u_a = rank_sum_a - na * (na + 1.0) / 2.0;
  result.u_b = na * nb - result.u_a;

  if (pooled.size() <= kMannWhitneyExactLimit) {
    result.method = PValueMethod::Exact;
    result.p_two_sided = exact_p(ranks, a.size(), result.u_a);
    return result;
  }

  result.method = PValueMethod::NormalApproximation;
  const double mu = na * nb / 2.0;
  const double variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (variance <= 0.0) {
    result.p_two_sided = 1.0;
    return result;
  }
  const double z = std::max(0.0, std::abs(result.u_a - mu) - 0.5) / std::sqrt(variance);
  result.p_two_sided = std::min(1.0, std::erfc(z / std::numbers::sqrt2));
  return result;
}

double standard_error(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::TooFewSamples, "standard error needs at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

}  // namespace guesswhich::analytics
