#include "adoptfit/time.hpp"

#include "adoptfit/error.hpp"

#include <charconv>
#include <cstdio>

namespace adoptfit {

using namespace std::chrono;

namespace {

int read_fixed(std::string_view text, std::size_t pos, std::size_t width)
{
  if (pos + width > text.size())
    fail(ErrorKind::validation, "truncated timestamp: " + std::string(text));
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + width, value);
  if (ec != std::errc() || ptr != first + width)
    fail(ErrorKind::validation, "bad digits in timestamp: " + std::string(text));
  return value;
}

void expect(std::string_view text, std::size_t pos, char c)
{
  if (pos >= text.size() || text[pos] != c)
    fail(ErrorKind::validation, "malformed timestamp: " + std::string(text));
}

Date read_date(std::string_view text)
{
  int y = read_fixed(text, 0, 4);
  expect(text, 4, '-');
  int m = read_fixed(text, 5, 2);
  expect(text, 7, '-');
  int d = read_fixed(text, 8, 2);
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok())
    fail(ErrorKind::validation, "invalid calendar date: " + std::string(text));
  return sys_days{ymd};
}

} // namespace

Date parse_date(std::string_view text)
{
  if (text.size() != 10)
    fail(ErrorKind::validation, "expected YYYY-MM-DD, got: " + std::string(text));
  return read_date(text);
}

Instant parse_instant(std::string_view text)
{
  if (text.size() == 10)
    return Instant{parse_date(text)};
  Date d = read_date(text);
  if (text.size() < 19 || (text[10] != 'T' && text[10] != 't' && text[10] != ' '))
    fail(ErrorKind::validation, "malformed timestamp: " + std::string(text));
  int hh = read_fixed(text, 11, 2);
  expect(text, 13, ':');
  int mm = read_fixed(text, 14, 2);
  expect(text, 16, ':');
  int ss = read_fixed(text, 17, 2);
  if (hh > 23 || mm > 59 || ss > 60)
    fail(ErrorKind::validation, "time of day out of range: " + std::string(text));

  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9')
      ++pos;
  }
  seconds offset{0};
  if (pos == text.size()) {
    // no zone designator: treated as UTC
  } else if (text[pos] == 'Z' || text[pos] == 'z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    int sign = text[pos] == '+' ? 1 : -1;
    int oh = read_fixed(text, pos + 1, 2);
    expect(text, pos + 3, ':');
    int om = read_fixed(text, pos + 4, 2);
    offset = seconds{sign * (oh * 3600 + om * 60)};
    pos += 6;
  }
  if (pos != text.size())
    fail(ErrorKind::validation, "trailing characters in timestamp: " + std::string(text));

  return Instant{d} + hours{hh} + minutes{mm} + seconds{ss} - offset;
}

std::string format_instant(Instant t)
{
  Date d = floor<days>(t);
  year_month_day ymd{d};
  hh_mm_ss<seconds> tod{t - Instant{d}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()));
  return buf;
}

std::string format_date(Date d)
{
  year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date date_of(Instant t)
{
  return floor<days>(t);
}

double days_between(Instant earlier, Instant later)
{
  return static_cast<double>((later - earlier).count()) / 86400.0;
}

Date today_utc()
{
  return floor<days>(system_clock::now());
}

} // namespace adoptfit
