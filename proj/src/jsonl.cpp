#include "guesswhich/jsonl.hpp"

#include <istream>

#include <json.hpp>

#include "guesswhich/error.hpp"

namespace guesswhich {

void for_each_jsonl_record(std::istream& in, const std::string& source,
                           const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": offset " +
                                             std::to_string(e.byte) + ": " + e.what());
    }
    if (!record.is_object())
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": record is not an object");
    fn(record, line_no);
  }
}

}  // namespace guesswhich
