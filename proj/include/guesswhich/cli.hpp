#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace guesswhich::cli {

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Runs one command line (without the program name) and returns the exit
/// code: 0 ok, 2 usage, 3 data or schema, 4 runtime. Option values resolve
/// as flags > GUESSWHICH_<OPTION> environment > --config JSON file > defaults.
/// Failures print one line "error code=<Code> message=<text>" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env);

int run(int argc, char** argv);

}  // namespace guesswhich::cli
