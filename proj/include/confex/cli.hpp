// Command-line front end. The vector overload exists so tests can drive
// the full argument surface without spawning processes.
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace confex {

// Exit codes: 0 success, 1 internal error, 2 usage error, 3 partial failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace confex
