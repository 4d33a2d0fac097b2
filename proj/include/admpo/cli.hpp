#pragma once

namespace admpo {

// Entry point behind the admpo binary; exposed for in-process testing.
// Exit codes: 0 success, 2 configuration/usage errors, 1 runtime failures.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace admpo
