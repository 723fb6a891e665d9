#include "bubblescope/common.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/info.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <chrono>
#include <cmath>
#include <numeric>

namespace bubblescope {

void Diagnostics::add(std::string stage, Severity severity, std::string message, std::size_t line) {
  entries_.push_back({std::move(stage), severity, line, std::move(message)});
}

void Diagnostics::append(const Diagnostics& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

std::size_t Diagnostics::count(Severity severity) const noexcept {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                 [&](const Diagnostic& d) { return d.severity == severity; }));
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  tbb::task_arena arena(std::min(threads, tbb::info::default_concurrency()));
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t>& r) {
      for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
    });
  });
}

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) throw Error("malformed timestamp: " + std::string(text));
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
  if (ec != std::errc{} || ptr != text.data() + pos + len) throw Error("malformed timestamp: " + std::string(text));
  return value;
}

}  // namespace

Timestamp parse_utc(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH
  if (text.size() < 13 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' '))
    throw Error("malformed timestamp: " + std::string(text));
  const int y = parse_field(text, 0, 4);
  const int mo = parse_field(text, 5, 2);
  const int d = parse_field(text, 8, 2);
  const int hh = parse_field(text, 11, 2);
  int mm = 0;
  int ss = 0;
  if (text.size() >= 16) {
    if (text[13] != ':') throw Error("malformed timestamp: " + std::string(text));
    mm = parse_field(text, 14, 2);
  }
  if (text.size() >= 19) {
    if (text[16] != ':') throw Error("malformed timestamp: " + std::string(text));
    ss = parse_field(text, 17, 2);
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) throw Error("invalid timestamp: " + std::string(text));
  const auto tp = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
  return duration_cast<seconds>(tp.time_since_epoch()).count();
}

std::string format_utc_hour(HourIndex h) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{hour_start(h)}};
  const auto days_part = floor<days>(tp);
  const year_month_day ymd{days_part};
  const auto hh = duration_cast<hours>(tp - days_part).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<long long>(hh));
  return buf;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return std::nan("");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::nan("");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace bubblescope
