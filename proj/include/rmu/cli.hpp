#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

namespace rmu {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kCertificateFailed = 1;
inline constexpr int kNotConverged = 2;
inline constexpr int kCertificateRefused = 3;
inline constexpr int kMissingDelta = 4;
inline constexpr int kUsage = 64;
inline constexpr int kDataError = 65;
inline constexpr int kIoError = 74;
}  // namespace exit_code

/// Parses "0.5", "1..50", "0..3:0.25" and comma-separated mixes of those
/// into a list of values. Ranges include both ends; the default step is 1.
std::vector<double> parse_axis(std::string_view text);

/// Entry point of the `rmu` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rmu
