#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "guesswhich/cli.hpp"
#include "guesswhich/game_log.hpp"
#include "support.hpp"

using namespace guesswhich;
using nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
  std::ostringstream out, err;
  const auto lookup = [&](const std::string& name) -> std::optional<std::string> {
    auto it = env.find(name);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  args.insert(args.begin(), {"--log-level", "off"});
  const int code = cli::run(args, out, err, lookup);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Embeddings and categories for three overlapping categories, written as JSONL.
void write_dataset(const testing::TempDir& dir) {
  Rng rng(21);
  const auto store = testing::clustered_store(rng, 3, 120, 4, 1.0, 0.0);
  std::ofstream emb(dir.file("emb.jsonl"));
  for (const auto& id : store.ids()) {
    const auto v = store.vector(id);
    emb << json{{"id", id}, {"vector", std::vector<double>(v.begin(), v.end())}}.dump() << '\n';
  }
  std::ofstream cats(dir.file("cats.jsonl"));
  for (const auto& [category, members] : store.categories())
    cats << json{{"category", category}, {"members", members}}.dump() << '\n';
}

}  // namespace

TEST_CASE("usage errors exit with 2 and one error line") {
  auto r = run_cli({"gen-pools", "--categories", "c.jsonl", "--out", "p.jsonl"});
  CHECK(r.code == 2);
  CHECK(r.err.find("error code=UsageError message=") != std::string::npos);
  CHECK(run_cli({"no-such-command"}).code == 2);
  CHECK(run_cli({"simulate", "--pools", "x", "--out", "y", "--games", "many"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("data errors exit with 3") {
  testing::TempDir dir("cli-data");
  std::ofstream(dir.file("bad.jsonl")) << "{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"b\",\"vector\":[1,2]}\n";
  std::ofstream(dir.file("cats.jsonl")) << "{\"category\":\"c\",\"members\":[\"a\"]}\n";
  auto r = run_cli({"gen-pools", "--embeddings", dir.file("bad.jsonl"), "--categories", dir.file("cats.jsonl"), "--out",
                    dir.file("p.jsonl")});
  CHECK(r.code == 3);
  CHECK(r.err.find("code=DimensionMismatch") != std::string::npos);
  CHECK(run_cli({"replay", dir.file("missing.jsonl")}).code != 0);
}

TEST_CASE("pipeline: gen-pools, simulate, replay, report") {
  testing::TempDir dir("cli-pipeline");
  write_dataset(dir);
  auto r = run_cli({"gen-pools", "--embeddings", dir.file("emb.jsonl"), "--categories", dir.file("cats.jsonl"), "--out",
                    dir.file("pools.jsonl"), "--seed", "5"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("wrote 3 pools") != std::string::npos);

  r = run_cli({"simulate", "--questioner", "oracle", "--embeddings", dir.file("emb.jsonl"), "--answerer", "truthful",
               "--attributes", dir.file("cats.jsonl"), "--pools", dir.file("pools.jsonl"), "--games", "12", "--seed",
               "1", "--out", dir.file("oracle.jsonl")});
  REQUIRE(r.code == 0);
  r = run_cli({"simulate", "--pools", dir.file("pools.jsonl"), "--games", "30", "--seed", "1", "--condition", "rand",
               "--out", dir.file("random.jsonl")});
  REQUIRE(r.code == 0);

  r = run_cli({"replay", dir.file("oracle.jsonl")});
  CHECK(r.code == 0);
  CHECK(r.out.find("verified 12 games") != std::string::npos);

  r = run_cli({"report", "--logs", dir.file("oracle.jsonl") + "," + dir.file("random.jsonl"), "--embeddings",
               dir.file("emb.jsonl"), "--pools", dir.file("pools.jsonl"), "--out", dir.file("report")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("games used 42 of 42") != std::string::npos);
  CHECK(r.out.find("truthful\tn=12\tMR=1 ") != std::string::npos);
  const auto report = json::parse(slurp(dir.file("report/report.json")));
  CHECK(report["conditions"].size() == 2);
  CHECK(report["mann_whitney"].size() == 1);
  CHECK(std::filesystem::exists(dir.file("report/coarse_mr_by_round.tsv")));
}

TEST_CASE("simulate is bit-identical for a fixed seed") {
  testing::TempDir dir("cli-repeat");
  write_dataset(dir);
  REQUIRE(run_cli({"gen-pools", "--embeddings", dir.file("emb.jsonl"), "--categories", dir.file("cats.jsonl"), "--out",
                   dir.file("pools.jsonl")})
              .code == 0);
  for (const char* name : {"a.jsonl", "b.jsonl"}) {
    REQUIRE(run_cli({"simulate", "--answerer", "noisy", "--attributes", dir.file("cats.jsonl"), "--questioner",
                     "seeker", "--pools", dir.file("pools.jsonl"), "--games", "20", "--seed", "9", "--out",
                     dir.file(name)})
                .code == 0);
  }
  CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
  CHECK_FALSE(slurp(dir.file("a.jsonl")).empty());
}

TEST_CASE("a tampered log fails replay with exit 3") {
  testing::TempDir dir("cli-tamper");
  write_dataset(dir);
  REQUIRE(run_cli({"gen-pools", "--embeddings", dir.file("emb.jsonl"), "--categories", dir.file("cats.jsonl"), "--out",
                   dir.file("pools.jsonl")})
              .code == 0);
  REQUIRE(run_cli({"simulate", "--pools", dir.file("pools.jsonl"), "--games", "3", "--out", dir.file("log.jsonl")}).code ==
          0);
  auto records = logs::read_log_file(dir.file("log.jsonl"));
  auto& game = std::get<logs::GameLogRecord>(records[1]);
  game.induced_rank = *game.induced_rank == 1 ? 2 : 1;
  logs::write_log_file(dir.file("log.jsonl"), records);
  const auto r = run_cli({"replay", dir.file("log.jsonl")});
  CHECK(r.code == 3);
  CHECK(r.err.find("code=VerificationFailed") != std::string::npos);
  CHECK(r.err.find("replay failed session=") != std::string::npos);
}

TEST_CASE("flags beat environment, environment beats config file") {
  testing::TempDir dir("cli-precedence");
  write_dataset(dir);
  REQUIRE(run_cli({"gen-pools", "--embeddings", dir.file("emb.jsonl"), "--categories", dir.file("cats.jsonl"), "--out",
                   dir.file("pools.jsonl")})
              .code == 0);
  std::ofstream(dir.file("config.json")) << json{{"pools", dir.file("pools.jsonl")}, {"games", 4}, {"seed", 2}}.dump();
  auto count_games = [&](const std::string& file) { return logs::read_log_file(file).size(); };

  REQUIRE(run_cli({"simulate", "--config", dir.file("config.json"), "--out", dir.file("one.jsonl")}).code == 0);
  CHECK(count_games(dir.file("one.jsonl")) == 4);

  REQUIRE(run_cli({"simulate", "--config", dir.file("config.json"), "--out", dir.file("two.jsonl")},
                  {{"GUESSWHICH_GAMES", "6"}})
              .code == 0);
  CHECK(count_games(dir.file("two.jsonl")) == 6);

  REQUIRE(run_cli({"simulate", "--config", dir.file("config.json"), "--games", "2", "--out", dir.file("three.jsonl")},
                  {{"GUESSWHICH_GAMES", "6"}})
              .code == 0);
  CHECK(count_games(dir.file("three.jsonl")) == 2);

  std::ofstream(dir.file("broken.json")) << "[1,2,3]";
  CHECK(run_cli({"simulate", "--config", dir.file("broken.json"), "--out", dir.file("x.jsonl")}).code == 3);
  CHECK(run_cli({"simulate", "--config", dir.file("config.json"), "--out", dir.file("x.jsonl")},
                {{"GUESSWHICH_GAMES", "lots"}})
            .code == 2);
}

TEST_CASE("the installed binary reports exit codes") {
  const char* binary = std::getenv("GUESSWHICH_CLI");
  if (!binary) {
    MESSAGE("GUESSWHICH_CLI not set; skipping");
    return;
  }
  testing::TempDir dir("cli-binary");
  auto status = [&](const std::string& args) {
    const int raw = std::system((std::string(binary) + " " + args + " >" + dir.file("out.txt") + " 2>" +
                                 dir.file("err.txt"))
                                    .c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--help") == 0);
  CHECK(status("gen-pools --out x") == 2);
  const auto err = slurp(dir.file("err.txt"));
  CHECK(err.find("error code=UsageError") != std::string::npos);
  std::ofstream(dir.file("junk.jsonl")) << "not json\n";
  CHECK(status("replay " + dir.file("junk.jsonl")) == 3);
}
