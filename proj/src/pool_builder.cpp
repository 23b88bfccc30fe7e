#include "guesswhich/pool_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "guesswhich/error.hpp"
#include "guesswhich/rng.hpp"

namespace guesswhich::pools {

std::vector<SecretCandidate> select_secret_candidates(const EmbeddingStore& store) {
  std::vector<SecretCandidate> out;
  out.reserve(store.categories().size());
  std::vector<double> mean(store.dim());
  for (const auto& [category, members] : store.categories()) {
    if (members.empty()) throw Error(ErrorCode::EmptyCategory, "category '" + category + "' has no members");
    std::fill(mean.begin(), mean.end(), 0.0);
    for (const auto& id : members) {
      const auto v = store.vector(id);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    }
    for (auto& m : mean) m /= static_cast<double>(members.size());

    // members are sorted, so strict < keeps the smallest id on ties
    const ImageId* best = nullptr;
    double best_sq = std::numeric_limits<double>::infinity();
    for (const auto& id : members) {
      const double sq = squared_distance(store.vector(id), mean);
      if (sq < best_sq) {
        best_sq = sq;
        best = &id;
      }
    }
    out.push_back({category, *best, std::sqrt(best_sq)});
  }
  return out;
}

std::vector<double> ShellConfig::radii() const {
  std::vector<double> r(static_cast<std::size_t>(std::max(shell_count, 0)));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = base_radius * static_cast<double>(i + 1);
  return r;
}

int ShellConfig::total_count() const { return std::accumulate(counts_per_shell.begin(), counts_per_shell.end(), 0); }

void ShellConfig::validate() const {
  if (!(base_radius > 0.0) || !std::isfinite(base_radius))
    throw Error(ErrorCode::InvalidParameter, "base radius must be a positive finite number");
  if (shell_count < 1) throw Error(ErrorCode::InvalidParameter, "shell count must be >= 1");
  if (static_cast<int>(counts_per_shell.size()) != shell_count)
    throw Error(ErrorCode::InvalidParameter, "expected " + std::to_string(shell_count) + " per-shell counts, got " +
                                                 std::to_string(counts_per_shell.size()));
  for (int c : counts_per_shell)
    if (c < 0) throw Error(ErrorCode::InvalidParameter, "per-shell counts must be >= 0");
}

std::vector<int> default_shell_counts(int pool_size, int shell_count) {
  if (pool_size < 2 || shell_count < 1) throw Error(ErrorCode::InvalidParameter, "need pool_size >= 2 and shells >= 1");
  const int distractors = pool_size - 1;
  std::vector<int> counts(static_cast<std::size_t>(shell_count), distractors / shell_count);
  for (int i = 0; i < distractors % shell_count; ++i) ++counts[static_cast<std::size_t>(i)];
  return counts;
}

double auto_base_radius(const EmbeddingStore& store, const ImageId& secret_id, int k) {
  const auto secret = store.vector(secret_id);
  std::vector<double> dists;
  dists.reserve(store.size());
  for (const auto& id : store.ids())
    if (id != secret_id) dists.push_back(euclidean_distance(secret, store.vector(id)));
  if (dists.empty()) throw Error(ErrorCode::InsufficientShellPopulation, "store has no images besides the secret");
  const auto idx = static_cast<std::size_t>(std::clamp(k, 1, static_cast<int>(dists.size())) - 1);
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(idx), dists.end());
  return dists[idx];
}

int shell_of(double distance, double base_radius, int shell_count) {
  for (int i = 0; i < shell_count; ++i)
    if (distance <= base_radius * static_cast<double>(i + 1)) return i;
  return -1;
}

PoolSpec sample_distractors(const EmbeddingStore& store, const ImageId& secret_id, const ShellConfig& config,
                            std::string pool_id, std::string caption) {
  config.validate();
  const auto secret = store.vector(secret_id);

  std::vector<std::vector<ShellMember>> shells(static_cast<std::size_t>(config.shell_count));
  for (const auto& id : store.ids()) {
    if (id == secret_id) continue;
    const double d = euclidean_distance(secret, store.vector(id));
    const int s = shell_of(d, config.base_radius, config.shell_count);
    if (s >= 0) shells[static_cast<std::size_t>(s)].push_back({id, s, d});
  }
  for (std::size_t i = 0; i < shells.size(); ++i) {
    const auto want = static_cast<std::size_t>(config.counts_per_shell[i]);
    if (shells[i].size() < want)
      throw Error(ErrorCode::InsufficientShellPopulation,
                  "shell " + std::to_string(i) + " around '" + secret_id + "' has " + std::to_string(shells[i].size()) +
                      " images, " + std::to_string(want) + " requested");
  }

  Rng rng(config.seed);
  ShellProvenance provenance{config.base_radius, config.shell_count, config.seed, {}};
  std::vector<ImageId> image_ids{secret_id};
  for (std::size_t i = 0; i < shells.size(); ++i) {
    for (auto& m : rng.sample(std::move(shells[i]), static_cast<std::size_t>(config.counts_per_shell[i]))) {
      image_ids.push_back(m.image_id);
      provenance.members.push_back(std::move(m));
    }
  }
  rng.shuffle(image_ids);

  PoolSpec pool;
  pool.pool_id = pool_id.empty() ? "pool-" + secret_id : std::move(pool_id);
  pool.secret_id = secret_id;
  pool.caption = std::move(caption);
  pool.image_ids = std::move(image_ids);
  pool.provenance = std::move(provenance);
  return pool;
}

PoolDifficultyStats pool_difficulty_stats(const PoolSpec& pool, const EmbeddingStore& store,
                                          std::optional<double> base_radius, std::optional<int> shell_count) {
  if (!base_radius && pool.provenance) base_radius = pool.provenance->base_radius;
  if (!shell_count && pool.provenance) shell_count = pool.provenance->shell_count;
  for (const auto& id : pool.image_ids)
    if (!store.contains(id)) throw Error(ErrorCode::UnknownImage, "pool image '" + id + "' has no embedding");

  PoolDifficultyStats stats;
  stats.per_shell_counts.assign(static_cast<std::size_t>(shell_count.value_or(0)), 0);
  const auto secret = store.vector(pool.secret_id);
  double sum = 0.0;
  int n = 0;
  stats.min_distance = std::numeric_limits<double>::infinity();
  stats.max_distance = 0.0;
  for (const auto& id : pool.image_ids) {
    if (id == pool.secret_id) continue;
    const double d = euclidean_distance(secret, store.vector(id));
    sum += d;
    ++n;
    stats.min_distance = std::min(stats.min_distance, d);
    stats.max_distance = std::max(stats.max_distance, d);
    if (base_radius && shell_count) {
      const int s = shell_of(d, *base_radius, *shell_count);
      if (s < 0) ++stats.outside_count;
      else ++stats.per_shell_counts[static_cast<std::size_t>(s)];
    }
  }
  if (n == 0) {
    stats.min_distance = 0.0;
  } else {
    stats.mean_distance = sum / n;
  }
  return stats;
}

GenPoolsResult generate_pools(const EmbeddingStore& store, const GenPoolsOptions& options) {
  GenPoolsResult result;
  auto counts = options.counts_per_shell.empty() ? default_shell_counts(options.pool_size, options.shell_count)
                                                 : options.counts_per_shell;
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  if (total != options.pool_size - 1)
    throw Error(ErrorCode::InvalidParameter, "per-shell counts sum to " + std::to_string(total) + ", pool size " +
                                                 std::to_string(options.pool_size) + " needs " +
                                                 std::to_string(options.pool_size - 1));

  for (const auto& candidate : select_secret_candidates(store)) {
    ShellConfig shell;
    shell.shell_count = options.shell_count;
    shell.counts_per_shell = counts;
    shell.seed = derive_seed(options.seed, candidate.category);
    try {
      shell.base_radius = options.base_radius ? *options.base_radius
                                              : auto_base_radius(store, candidate.image_id, options.auto_radius_neighbor);
      std::string caption;
      if (auto it = options.captions.find(candidate.image_id); it != options.captions.end()) caption = it->second;
      result.pools.push_back(
          sample_distractors(store, candidate.image_id, shell, "pool-" + candidate.category, std::move(caption)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientShellPopulation && e.code() != ErrorCode::InvalidParameter) throw;
      result.skipped.push_back({candidate, e.detail()});
    }
  }
  return result;
}

}  // namespace guesswhich::pools
