#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace staggercast::cli {

/// Exit codes: 0 success, 1 runtime error, 2 configuration error.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kConfigError = 2;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Inclusive seed list from `N` or `A..B`; throws std::invalid_argument.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

std::string version();

}  // namespace staggercast::cli
