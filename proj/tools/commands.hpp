#pragma once

#include <iosfwd>

namespace bfo::cli {

/// Exit codes: 0 success, 1 a gate failed, 2 usage or configuration error,
/// 3 runtime failure (I/O, header mismatch, contraction not certified).
inline constexpr int kExitOk = 0;
inline constexpr int kExitGate = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point shared by the executable and the in-process tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bfo::cli
