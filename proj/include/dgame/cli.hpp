#pragma once

#include "dgame/config.hpp"

namespace dgame {

// Command-line entry point; returns the process exit code (0 success,
// 1 runtime failure, 2 usage error).
int cli_run(int argc, const char* const* argv);

// Profile defaults (reduced | paper) for a case/regime pair, before
// [train] overrides from the experiment config are applied.
Config profile_defaults(const std::string& game_case,
                        const std::string& regime,
                        const std::string& profile);

}  // namespace dgame
