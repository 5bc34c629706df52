#pragma once

#include <ostream>

namespace dggan {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitTraining = 4,
};

/// Entry point of the `dggan` command-line tool.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dggan
