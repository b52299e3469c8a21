#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sbart {

// Runs one `sbart <subcommand> ...` invocation. args excludes the program
// name. Returns the process exit code (0 ok, 2 usage, 3 data, 4 numeric).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbart
