#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace squeezelab {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitUnstable = 3,
  kExitValidation = 4,
  kExitSimulation = 5,
};

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace squeezelab
