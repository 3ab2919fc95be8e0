#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace adoptfit {

// All instants are UTC with whole-second resolution.
using Instant = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

//! Accepts "YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM)" and a bare "YYYY-MM-DD".
Instant parse_instant(std::string_view text);
//! Always emits "YYYY-MM-DDTHH:MM:SSZ".
std::string format_instant(Instant t);

Date parse_date(std::string_view text);
std::string format_date(Date d);

Date date_of(Instant t);

//! Signed difference (later - earlier) in fractional days.
double days_between(Instant earlier, Instant later);

Date today_utc();

} // namespace adoptfit
