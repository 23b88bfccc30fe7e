#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "guesswhich/embedding.hpp"
#include "guesswhich/game.hpp"
#include "guesswhich/pool_spec.hpp"
#include "guesswhich/rng.hpp"

namespace testing {

namespace g = guesswhich::game;
using guesswhich::ImageId;
using guesswhich::PoolSpec;
using guesswhich::Rng;

inline std::string image_name(const std::string& prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return prefix + buf;
}

/// Pool "pool-<tag>" of ids img000.. with the secret at `secret_index`.
inline PoolSpec simple_pool(int n = 20, int secret_index = 0, const std::string& tag = "a") {
  PoolSpec pool;
  pool.pool_id = "pool-" + tag;
  pool.caption = "A caption for " + tag + ".";
  for (int i = 0; i < n; ++i) pool.image_ids.push_back(image_name("img", i));
  pool.secret_id = pool.image_ids[static_cast<std::size_t>(secret_index)];
  return pool;
}

inline std::vector<PoolSpec> numbered_pools(int count, int n = 20) {
  std::vector<PoolSpec> out;
  for (int i = 0; i < count; ++i) out.push_back(simple_pool(n, i % n, std::to_string(i)));
  return out;
}

/// Drives a fresh session through the caption guess and every dialog round.
inline g::GameSession play_dialog(g::GameSession s, const ImageId& guess) {
  guesswhich::TimestampMs t = 0;
  if (s.config.caption_guess_required) s = g::apply_event(std::move(s), {g::CaptionGuess{guess}, ++t});
  for (int r = 1; r <= s.config.dialog_rounds; ++r) {
    s = g::apply_event(std::move(s), {g::QuestionAsked{"is there a dog?"}, ++t});
    s = g::apply_event(std::move(s), {g::AnswerReceived{"no"}, ++t});
    s = g::apply_event(std::move(s), {g::RoundGuess{guess}, ++t});
  }
  return s;
}

/// Clusters of Gaussian points, one category per cluster, ids "c<k>-<i>".
inline guesswhich::pools::EmbeddingStore clustered_store(Rng& rng, int categories, int per_category, int dim,
                                                         double spread = 1.0, double separation = 4.0) {
  guesswhich::pools::EmbeddingStore::Builder builder;
  std::map<std::string, std::vector<ImageId>> members;
  for (int c = 0; c < categories; ++c) {
    std::vector<double> center(static_cast<std::size_t>(dim));
    for (auto& x : center) x = separation * rng.normal();
    for (int i = 0; i < per_category; ++i) {
      std::vector<double> v = center;
      for (auto& x : v) x += spread * rng.normal();
      const auto id = "c" + std::to_string(c) + "-" + image_name("", i);
      builder.add(id, std::move(v));
      members["cat" + std::to_string(c)].push_back(id);
    }
  }
  auto store = std::move(builder).build();
  store.set_categories(std::move(members));
  return store;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("guesswhich-" + tag + "-" + std::to_string(rng.next_u64()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
