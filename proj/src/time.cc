#include "flowstab/time.h"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace flowstab {
namespace {

int read_digits(std::string_view text, std::size_t& pos, std::size_t count) {
  if (pos + count > text.size()) {
    throw std::invalid_argument("truncated timestamp: " + std::string(text));
  }
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = text[pos + i];
    if (c < '0' || c > '9') {
      throw std::invalid_argument("malformed timestamp: " + std::string(text));
    }
    value = value * 10 + (c - '0');
  }
  pos += count;
  return value;
}

void expect(std::string_view text, std::size_t& pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
  }
  ++pos;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  while (!text.empty() && (text.front() == ' ' || text.front() == '"')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r')) {
    text.remove_suffix(1);
  }

  std::size_t pos = 0;
  const int y = read_digits(text, pos, 4);
  expect(text, pos, '-');
  const int mo = read_digits(text, pos, 2);
  expect(text, pos, '-');
  const int d = read_digits(text, pos, 2);
  if (pos >= text.size() || (text[pos] != 'T' && text[pos] != ' ')) {
    throw std::invalid_argument("timestamp lacks time of day: " + std::string(text));
  }
  ++pos;
  const int hh = read_digits(text, pos, 2);
  expect(text, pos, ':');
  const int mm = read_digits(text, pos, 2);
  int ss = 0;
  if (pos < text.size() && text[pos] == ':') {
    ++pos;
    ss = read_digits(text, pos, 2);
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      std::size_t digits = 0;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
        if (text[pos] != '0') {
          throw std::invalid_argument("sub-second timestamp: " + std::string(text));
        }
        ++pos;
        ++digits;
      }
      if (digits == 0) throw std::invalid_argument("malformed timestamp: " + std::string(text));
    }
  }
  seconds offset{0};
  if (pos < text.size()) {
    const char c = text[pos];
    if (c == 'Z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      ++pos;
      const int oh = read_digits(text, pos, 2);
      if (pos < text.size() && text[pos] == ':') ++pos;
      const int om = read_digits(text, pos, 2);
      offset = hours{oh} + minutes{om};
      if (c == '-') offset = -offset;
    }
  }
  if (pos != text.size()) {
    throw std::invalid_argument("trailing characters in timestamp: " + std::string(text));
  }

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
    throw std::invalid_argument("out-of-range timestamp: " + std::string(text));
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - offset;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const auto tod = t - day_start;
  const auto h = duration_cast<hours>(tod);
  const auto m = duration_cast<minutes>(tod - h);
  const auto s = tod - h - m;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(h.count()), static_cast<int>(m.count()),
                static_cast<int>(s.count()));
  return buf;
}

Timestamp floor_hour(Timestamp t) { return std::chrono::floor<std::chrono::hours>(t); }

int hour_of_day(Timestamp t) {
  using namespace std::chrono;
  return static_cast<int>(duration_cast<hours>(t - floor<days>(t)).count());
}

}  // namespace flowstab
