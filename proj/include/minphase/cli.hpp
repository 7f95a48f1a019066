#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace minphase {

// Entry point shared by tools/main.cpp and the CLI tests: parses args
// (excluding argv[0]) and executes one subcommand, writing human or JSON
// output to `out` and diagnostics to `err`.  Returns a process exit code:
// 0 success / property established, 1 property refuted or not established,
// 2 usage or input error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace minphase
