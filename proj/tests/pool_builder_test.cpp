#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "guesswhich/error.hpp"
#include "guesswhich/pool_builder.hpp"
#include "support.hpp"

using namespace guesswhich;
using namespace guesswhich::pools;

namespace {

EmbeddingStore line_store(const std::vector<std::pair<std::string, double>>& points) {
  EmbeddingStore::Builder b;
  for (const auto& [id, x] : points) b.add(id, {x});
  return std::move(b).build();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::UsageError;
}

}  // namespace

TEST_CASE("load_embeddings reads vectors and rejects inconsistent files") {
  std::stringstream ok(R"({"id":"a","vector":[1,2,3,4]}
{"id":"b","vector":[0,0,0,0]}

{"id":"c","vector":[1,1,1,1]}
)");
  auto store = load_embeddings(ok);
  CHECK(store.size() == 3);
  CHECK(store.dim() == 4);
  CHECK(store.ids() == std::vector<ImageId>{"a", "b", "c"});

  std::stringstream mixed(R"({"id":"a","vector":[1,2,3,4]}
{"id":"b","vector":[1,2,3,4,5]})");
  CHECK(code_of([&] { load_embeddings(mixed); }) == ErrorCode::DimensionMismatch);
  std::stringstream dup(R"({"id":"a","vector":[1]}
{"id":"a","vector":[2]})");
  CHECK(code_of([&] { load_embeddings(dup); }) == ErrorCode::DuplicateId);
  std::stringstream broken("{\"id\":\"a\",\"vector\":[1]}\n{not json\n");
  try {
    load_embeddings(broken, "emb.jsonl");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("emb.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("store contents do not depend on file order") {
  std::stringstream a(R"({"id":"x","vector":[1]}
{"id":"y","vector":[2]})");
  std::stringstream b(R"({"id":"y","vector":[2]}
{"id":"x","vector":[1]})");
  auto sa = load_embeddings(a);
  auto sb = load_embeddings(b);
  CHECK(sa.ids() == sb.ids());
  CHECK(sa.vector("y")[0] == sb.vector("y")[0]);
}

TEST_CASE("categories must reference known images") {
  auto store = line_store({{"a", 0}, {"b", 1}});
  CHECK(code_of([&] { store.set_categories({{"cat", {"a", "zzz"}}}); }) == ErrorCode::UnknownImage);
  store.set_categories({{"empty", {}}});
  CHECK(code_of([&] { select_secret_candidates(store); }) == ErrorCode::EmptyCategory);
}

TEST_CASE("secret candidate is the member nearest the category mean") {
  auto store = line_store({{"A", 0}, {"B", 2}, {"P", 0}, {"Q", 1}, {"R", 5}});
  store.set_categories({{"tie", {"B", "A"}}, {"three", {"P", "Q", "R"}}});
  const auto c = select_secret_candidates(store);
  REQUIRE(c.size() == 2);
  CHECK(c[0].category == "three");
  CHECK(c[0].image_id == "Q");
  CHECK(c[1].category == "tie");
  CHECK(c[1].image_id == "A");
  CHECK(c[1].distance_to_mean == doctest::Approx(1.0));
}

TEST_CASE("one candidate per category for eighty categories") {
  Rng rng(5);
  auto store = testing::clustered_store(rng, 80, 4, 3);
  CHECK(select_secret_candidates(store).size() == 80);
}

TEST_CASE("each shell supplies exactly its count") {
  auto store = line_store({{"s", 0}, {"a", 0.5}, {"b", 1.5}, {"c", 2.5}, {"far", 9}});
  ShellConfig cfg;
  cfg.base_radius = 1.0;
  cfg.counts_per_shell = {1, 1, 1};
  auto pool = sample_distractors(store, "s", cfg);
  std::set<ImageId> ids(pool.image_ids.begin(), pool.image_ids.end());
  CHECK(ids == std::set<ImageId>{"s", "a", "b", "c"});
  CHECK(pool.secret_id == "s");
  REQUIRE(pool.provenance);
  CHECK(pool.provenance->members.size() == 3);

  cfg.counts_per_shell = {2, 1, 1};
  try {
    sample_distractors(store, "s", cfg);
    FAIL("expected a shortfall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientShellPopulation);
    CHECK(std::string(e.what()).find("shell 0") != std::string::npos);
  }
}

TEST_CASE("shell boundaries are closed above") {
  CHECK(shell_of(0.0, 1.0, 3) == 0);
  CHECK(shell_of(1.0, 1.0, 3) == 0);
  CHECK(shell_of(std::nextafter(1.0, 2.0), 1.0, 3) == 1);
  CHECK(shell_of(3.0, 1.0, 3) == 2);
  CHECK(shell_of(3.0001, 1.0, 3) == -1);
}

TEST_CASE("pools are reproducible from the seed") {
  Rng rng(99);
  EmbeddingStore::Builder b;
  for (int i = 0; i < 10000; ++i) b.add(testing::image_name("g", i), {rng.normal(), rng.normal(), rng.normal()});
  auto store = std::move(b).build();
  ShellConfig cfg;
  cfg.base_radius = 0.5;
  cfg.seed = 17;
  auto p1 = sample_distractors(store, "g000", cfg);
  auto p2 = sample_distractors(store, "g000", cfg);
  CHECK(p1 == p2);
  cfg.seed = 18;
  CHECK(sample_distractors(store, "g000", cfg).image_ids != p1.image_ids);
}

TEST_CASE("difficulty stats match a direct scan") {
  auto store = line_store({{"s", 0}, {"a", 2}, {"b", -2}, {"c", 2}});
  PoolSpec pool{"p", "s", "", {"s", "a", "b", "c"}, std::nullopt};
  auto stats = pool_difficulty_stats(pool, store, 1.0, 3);
  CHECK(stats.min_distance == 2.0);
  CHECK(stats.mean_distance == 2.0);
  CHECK(stats.max_distance == 2.0);
  CHECK(stats.per_shell_counts == std::vector<int>{0, 3, 0});

  Rng rng(3);
  auto big = testing::clustered_store(rng, 1, 400, 4, 1.0);
  ShellConfig cfg;
  cfg.base_radius = auto_base_radius(big, "c0-000", 50);
  auto sampled = sample_distractors(big, "c0-000", cfg);
  auto s2 = pool_difficulty_stats(sampled, big);
  CHECK(s2.per_shell_counts == std::vector<int>{7, 6, 6});
  CHECK(s2.outside_count == 0);

  double lo = 1e300, hi = 0, sum = 0;
  for (const auto& id : sampled.image_ids) {
    if (id == sampled.secret_id) continue;
    double sq = 0;
    for (std::size_t k = 0; k < big.dim(); ++k) {
      const double d = big.vector(id)[k] - big.vector("c0-000")[k];
      sq += d * d;
    }
    lo = std::min(lo, std::sqrt(sq));
    hi = std::max(hi, std::sqrt(sq));
    sum += std::sqrt(sq);
  }
  CHECK(s2.min_distance == doctest::Approx(lo).epsilon(1e-12));
  CHECK(s2.max_distance == doctest::Approx(hi).epsilon(1e-12));
  CHECK(s2.mean_distance == doctest::Approx(sum / 19).epsilon(1e-12));

  PoolSpec stray{"p", "s", "", {"s", "nope"}, std::nullopt};
  CHECK(code_of([&] { pool_difficulty_stats(stray, store); }) == ErrorCode::UnknownImage);
}

TEST_CASE("default counts split the distractors as evenly as possible") {
  CHECK(default_shell_counts(20, 3) == std::vector<int>{7, 6, 6});
  CHECK(default_shell_counts(10, 3) == std::vector<int>{3, 3, 3});
  CHECK(default_shell_counts(5, 2) == std::vector<int>{2, 2});
}

TEST_CASE("generate_pools skips categories whose shells run short") {
  Rng rng(8);
  auto store = testing::clustered_store(rng, 3, 60, 2, 1.0, 0.0);
  auto thin = line_store({{"x", 0}, {"y", 100}});
  thin.set_categories({{"lonely", {"x", "y"}}});

  GenPoolsOptions opt;
  opt.seed = 4;
  auto result = generate_pools(store, opt);
  CHECK(result.pools.size() + result.skipped.size() == 3);
  for (const auto& p : result.pools) {
    CHECK(p.image_ids.size() == 20);
    CHECK(p.pool_id.rfind("pool-cat", 0) == 0);
  }
  CHECK(generate_pools(store, opt).pools == result.pools);

  auto none = generate_pools(thin, opt);
  CHECK(none.pools.empty());
  REQUIRE(none.skipped.size() == 1);

  opt.counts_per_shell = {5, 5, 5};
  CHECK(code_of([&] { generate_pools(store, opt); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("pool spec files round-trip") {
  Rng rng(2);
  auto store = testing::clustered_store(rng, 2, 200, 3, 1.0, 0.0);
  GenPoolsOptions opt;
  auto pools = generate_pools(store, opt).pools;
  REQUIRE_FALSE(pools.empty());
  std::stringstream ss;
  write_pools(ss, pools);
  CHECK(read_pools(ss) == pools);
}

TEST_CASE("pool spec invariants") {
  PoolSpec p{"p", "s", "", {"s", "a", "a"}, std::nullopt};
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::InvalidPool);
  p.image_ids = {"a", "b"};
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::InvalidPool);
}
