#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "guesswhich/embedding.hpp"
#include "guesswhich/pool_spec.hpp"

namespace guesswhich::pools {

struct SecretCandidate {
  std::string category;
  ImageId image_id;
  double distance_to_mean = 0.0;
};

/// For every category, the member nearest (euclidean) to the category's mean
/// embedding; ties go to the lexicographically smallest id. Throws EmptyCategory.
std::vector<SecretCandidate> select_secret_candidates(const EmbeddingStore& store);

/// Concentric shells around the secret. Shell 0 is the ball [0, r]; shell i
/// is the annulus (i*r, (i+1)*r].
struct ShellConfig {
  double base_radius = 1.0;
  int shell_count = 3;
  std::vector<int> counts_per_shell{7, 6, 6};
  std::uint64_t seed = 0;

  std::vector<double> radii() const;
  int total_count() const;
  void validate() const;
};

/// Near-uniform split of pool_size - 1 distractors, remainder to inner shells.
std::vector<int> default_shell_counts(int pool_size, int shell_count);

/// Distance from the secret to its k-th nearest other image (or the farthest
/// one when fewer than k exist).
double auto_base_radius(const EmbeddingStore& store, const ImageId& secret_id, int k = 50);

/// Shell index for a distance, or -1 beyond the outermost radius.
int shell_of(double distance, double base_radius, int shell_count);

/// Samples counts_per_shell[i] distractors uniformly without replacement
/// from shell i and returns a seeded-shuffled pool of secret + distractors.
/// Throws InsufficientShellPopulation naming the shell and the shortfall.
PoolSpec sample_distractors(const EmbeddingStore& store, const ImageId& secret_id, const ShellConfig& config,
                            std::string pool_id = {}, std::string caption = {});

struct PoolDifficultyStats {
  std::vector<int> per_shell_counts;  // one per shell
  int outside_count = 0;              // distractors beyond the outermost radius
  double min_distance = 0.0;
  double mean_distance = 0.0;
  double max_distance = 0.0;
};

/// Recomputes every distractor's distance to the secret. Shell radii come
/// from the pool's provenance unless given explicitly. Throws UnknownImage.
PoolDifficultyStats pool_difficulty_stats(const PoolSpec& pool, const EmbeddingStore& store,
                                          std::optional<double> base_radius = std::nullopt,
                                          std::optional<int> shell_count = std::nullopt);

struct GenPoolsOptions {
  int pool_size = 20;
  int shell_count = 3;
  std::optional<double> base_radius;  // nullopt = per-secret auto radius
  int auto_radius_neighbor = 50;
  std::vector<int> counts_per_shell;  // empty = default_shell_counts
  std::uint64_t seed = 0;
  std::map<ImageId, std::string> captions;
};

struct SkippedCandidate {
  SecretCandidate candidate;
  std::string reason;
};

struct GenPoolsResult {
  std::vector<PoolSpec> pools;
  std::vector<SkippedCandidate> skipped;
};

/// One pool per secret candidate, ids "pool-<category>". Candidates whose
/// shells are underpopulated are skipped and reported.
GenPoolsResult generate_pools(const EmbeddingStore& store, const GenPoolsOptions& options);

}  // namespace guesswhich::pools
