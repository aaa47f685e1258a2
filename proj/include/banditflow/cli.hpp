#pragma once

// Command-line front end. Exit codes: 0 success, 1 verification failure,
// 2 configuration or usage error, 3 internal error.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace banditflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitInternalError = 3;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

/// Parses "1e7", "100000" or a comma-separated ladder "1e3,1e4,1e5" into
/// integer horizons. Throws ConfigError for non-integral or out-of-range values.
std::vector<std::int64_t> parse_horizons(const std::string& text);

} // namespace banditflow
