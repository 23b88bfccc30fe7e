#pragma once

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "guesswhich/game_log.hpp"

namespace guesswhich::service {

/// Append-only, write-once record store keyed by logs::record_key.
class LogStore {
 public:
  virtual ~LogStore() = default;
  /// Durable on return. Throws RecordExists for a repeated key (nothing is
  /// written) or StorageError.
  virtual void append(const logs::LogRecord& record) = 0;
  virtual bool contains(const std::string& key) const = 0;
  virtual std::vector<logs::LogRecord> read_all() const = 0;
};

/// One JSON line per record, flushed and fsynced per append. Existing
/// records are indexed at open so write-once holds across restarts.
class JsonlLogStore final : public LogStore {
 public:
  explicit JsonlLogStore(std::filesystem::path path);
  ~JsonlLogStore() override;

  JsonlLogStore(const JsonlLogStore&) = delete;
  JsonlLogStore& operator=(const JsonlLogStore&) = delete;

  void append(const logs::LogRecord& record) override;
  bool contains(const std::string& key) const override;
  std::vector<logs::LogRecord> read_all() const override;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::FILE* file_ = nullptr;
  std::set<std::string> keys_;
};

class MemoryLogStore final : public LogStore {
 public:
  void append(const logs::LogRecord& record) override;
  bool contains(const std::string& key) const override;
  std::vector<logs::LogRecord> read_all() const override;

  /// The next `count` appends throw StorageError without writing.
  void fail_next(int count);

 private:
  mutable std::mutex mutex_;
  std::vector<logs::LogRecord> records_;
  std::set<std::string> keys_;
  int failures_left_ = 0;
};

}  // namespace guesswhich::service
