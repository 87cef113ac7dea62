#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rcmk::cli {

// Full CLI entry point; argv[0] is the program name. Parses flags, runs the
// selected subcommand, writes outputs + manifest under --out, and returns the
// process exit code. All failures print one "error: ..." line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_main(int argc, char** argv);

}  // namespace rcmk::cli
