#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mlsar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitInterrupted = 130;

/// Runs one command line (args[0] is the program name). Errors are
/// reported on `err`, and as error.json in the output directory when the
/// command has one.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Installs a SIGINT handler that stops a running estimate gracefully.
void install_interrupt_handler();

}  // namespace mlsar::cli
