// coughhmm/cli.hpp
//
// Command-line front end; exposed as a function so tests can drive the
// subcommands in-process.  Exit codes: 0 success, 1 input error,
// 2 internal invariant violation.

#pragma once

namespace cough::cli {

int run(int argc, const char* const* argv);

}  // namespace cough::cli
