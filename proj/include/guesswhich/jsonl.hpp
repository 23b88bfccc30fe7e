#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace guesswhich {

/// Calls `fn(record, line_number)` for each non-blank line of a JSON Lines
/// stream. Malformed lines raise Error(ParseError) naming source, line and
/// byte offset.
void for_each_jsonl_record(std::istream& in, const std::string& source,
                           const std::function<void(const nlohmann::json&, std::size_t)>& fn);

}  // namespace guesswhich
