#pragma once

#include <ostream>

namespace dsdr::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // bad flags, invalid input, failed check
inline constexpr int kExitIo = 2;       // unreadable/unwritable file or malformed file contents

// Runs the `dsdr` command line. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dsdr::cli
