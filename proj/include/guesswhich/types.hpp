#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace guesswhich {

using ImageId = std::string;

/// Milliseconds since the Unix epoch (or since simulation start for synthetic games).
using TimestampMs = std::int64_t;

inline TimestampMs system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace guesswhich
