#include <doctest.h>

#include <fstream>
#include <thread>

#include "guesswhich/error.hpp"
#include "guesswhich/service/log_store.hpp"
#include "support.hpp"

using namespace guesswhich;
using namespace guesswhich::service;

namespace {

logs::LogRecord assignment(const std::string& id) {
  return logs::AssignmentRecord{id, "worker-" + id, "c", {id + "-game-01"}, logs::AssignmentStatus::Abandoned, {}};
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

TEST_CASE("jsonl store reads back what it wrote and stays write-once across reopen") {
  testing::TempDir dir("store");
  const auto path = dir.path() / "nested" / "log.jsonl";
  {
    JsonlLogStore store(path);
    store.append(assignment("a1"));
    store.append(assignment("a2"));
    CHECK(store.contains("assignment:a1"));
    CHECK_FALSE(store.contains("assignment:a3"));
    CHECK(code_of([&] { store.append(assignment("a1")); }) == ErrorCode::RecordExists);
    CHECK(store.read_all() == std::vector<logs::LogRecord>{assignment("a1"), assignment("a2")});
  }
  JsonlLogStore reopened(path);
  CHECK(reopened.contains("assignment:a2"));
  CHECK(code_of([&] { reopened.append(assignment("a2")); }) == ErrorCode::RecordExists);
  reopened.append(assignment("a3"));
  CHECK(reopened.read_all().size() == 3);
  CHECK(logs::read_log_file(path.string()).size() == 3);
}

TEST_CASE("jsonl store refuses a corrupt existing file") {
  testing::TempDir dir("store-bad");
  std::ofstream(dir.file("log.jsonl")) << "{\"record_type\":\"game\"}\n";
  CHECK_THROWS_AS(JsonlLogStore(dir.path() / "log.jsonl"), Error);
}

TEST_CASE("concurrent appends all land as whole lines") {
  testing::TempDir dir("store-threads");
  JsonlLogStore store(dir.path() / "log.jsonl");
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&store, t] {
      for (int i = 0; i < 25; ++i) store.append(assignment("t" + std::to_string(t) + "-" + std::to_string(i)));
    });
  }
  for (auto& th : threads) th.join();
  CHECK(logs::read_log_file(store.path().string()).size() == 200);
}

TEST_CASE("memory store injects failures without writing") {
  MemoryLogStore store;
  store.fail_next(2);
  CHECK(code_of([&] { store.append(assignment("a")); }) == ErrorCode::StorageError);
  CHECK(code_of([&] { store.append(assignment("a")); }) == ErrorCode::StorageError);
  CHECK_FALSE(store.contains("assignment:a"));
  store.append(assignment("a"));
  CHECK(store.contains("assignment:a"));
  CHECK(code_of([&] { store.append(assignment("a")); }) == ErrorCode::RecordExists);
  CHECK(store.read_all().size() == 1);
}
