#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bubblescope {

using Timestamp = std::int64_t;  // UTC seconds
using HourIndex = std::int64_t;  // UTC hours since epoch

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::string_view kZeroAddress = "0x0000000000000000000000000000000000000000";

constexpr HourIndex hour_of(Timestamp ts) noexcept {
  return ts >= 0 ? ts / kSecondsPerHour : (ts - kSecondsPerHour + 1) / kSecondsPerHour;
}
constexpr Timestamp hour_start(HourIndex h) noexcept { return h * kSecondsPerHour; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Severity { info, warning, error };

struct Diagnostic {
  std::string stage;
  Severity severity = Severity::warning;
  std::size_t line = 0;  // 0 when not tied to an input line
  std::string message;
};

class Diagnostics {
 public:
  void add(std::string stage, Severity severity, std::string message, std::size_t line = 0);
  void warn(std::string stage, std::string message, std::size_t line = 0) {
    add(std::move(stage), Severity::warning, std::move(message), line);
  }
  void append(const Diagnostics& other);

  [[nodiscard]] const std::vector<Diagnostic>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::size_t count(Severity severity) const noexcept;
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

 private:
  std::vector<Diagnostic> entries_;
};

// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write into
// preallocated per-index slots so results never depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// Parses "YYYY-MM-DDTHH[:MM[:SS]]" (UTC) into seconds.
Timestamp parse_utc(std::string_view text);
std::string format_utc_hour(HourIndex h);

// Sample statistics shared by several modules.
double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);  // n-1 denominator; 0 for n < 2
// Linear-interpolation quantile of sorted data (R type 7).
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace bubblescope
