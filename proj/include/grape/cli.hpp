#pragma once

#include <string>
#include <vector>

namespace grape::cli {

/// Entry point of the `grape` command. `args[0]` is the program name.
/// Returns 0 on success, 1 for user errors (bad flags, unreadable or
/// malformed inputs), 2 for internal errors.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

} // namespace grape::cli
