#include "guesswhich/service/log_store.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <unistd.h>

#include <json.hpp>

#include "guesswhich/error.hpp"

namespace guesswhich::service {

namespace {

std::string errno_text() { return std::strerror(errno); }

}  // namespace

JsonlLogStore::JsonlLogStore(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    if (!in) throw Error(ErrorCode::StorageError, "cannot read " + path_.string());
    for (const auto& record : logs::read_log(in, path_.string())) keys_.insert(logs::record_key(record));
  } else if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  file_ = std::fopen(path_.c_str(), "a");
  if (!file_) throw Error(ErrorCode::StorageError, "cannot open " + path_.string() + ": " + errno_text());
}

JsonlLogStore::~JsonlLogStore() {
  if (file_) std::fclose(file_);
}

void JsonlLogStore::append(const logs::LogRecord& record) {
  const auto key = logs::record_key(record);
  const auto line = logs::to_json(record).dump() + "\n";
  std::lock_guard lock(mutex_);
  if (keys_.contains(key)) throw Error(ErrorCode::RecordExists, "record '" + key + "' already written");
  const long offset = std::ftell(file_);
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
      ::fsync(::fileno(file_)) != 0) {
    const std::string reason = errno_text();
    std::clearerr(file_);
    // drop any partial line so the file stays parseable
    if (offset >= 0 && ::ftruncate(::fileno(file_), offset) != 0) std::clearerr(file_);
    throw Error(ErrorCode::StorageError, "append to " + path_.string() + " failed: " + reason);
  }
  keys_.insert(key);
}

bool JsonlLogStore::contains(const std::string& key) const {
  std::lock_guard lock(mutex_);
  return keys_.contains(key);
}

std::vector<logs::LogRecord> JsonlLogStore::read_all() const {
  std::lock_guard lock(mutex_);
  std::ifstream in(path_);
  if (!in) throw Error(ErrorCode::StorageError, "cannot read " + path_.string());
  return logs::read_log(in, path_.string());
}

void MemoryLogStore::append(const logs::LogRecord& record) {
  const auto key = logs::record_key(record);
  std::lock_guard lock(mutex_);
  if (keys_.contains(key)) throw Error(ErrorCode::RecordExists, "record '" + key + "' already written");
  if (failures_left_ > 0) {
    --failures_left_;
    throw Error(ErrorCode::StorageError, "injected storage failure");
  }
  records_.push_back(record);
  keys_.insert(key);
}

bool MemoryLogStore::contains(const std::string& key) const {
  std::lock_guard lock(mutex_);
  return keys_.contains(key);
}

std::vector<logs::LogRecord> MemoryLogStore::read_all() const {
  std::lock_guard lock(mutex_);
  return records_;
}

void MemoryLogStore::fail_next(int count) {
  std::lock_guard lock(mutex_);
  failures_left_ = count;
}

}  // namespace guesswhich::service
