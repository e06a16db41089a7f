#pragma once

#include <iosfwd>

namespace nora {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitBadConfig = 2;

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutDirEnv = "NORA_OUT_DIR";

/// Parses argv and runs the chosen subcommand. Returns 0 when every asserted
/// criterion holds, 1 on the first failing one, 2 on a malformed config or
/// command line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nora
