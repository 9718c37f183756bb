#pragma once

// Command-line driver: preprocess, field, adapt and pipeline subcommands.
//
// Exit codes: 0 ok, 2 I/O, 3 configuration or parameter, 4 data
// precondition, 5 internal error.

#include <iosfwd>
#include <string>
#include <vector>

namespace eimesh::cli {

enum ExitCode : int { ok = 0, io_error = 2, config_error = 3, precondition_error = 4, internal_error = 5 };

// args excludes the program name. Machine-readable output goes to out,
// diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eimesh::cli
