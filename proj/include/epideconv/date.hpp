#pragma once
// Calendar dates only exist at the I/O boundary; internally series are
// indexed by day offset from their first date.

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace epideconv {

using Date = std::chrono::sys_days;

/// Strict ISO-8601 calendar date "YYYY-MM-DD".
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

inline Date add_days(Date d, long n) { return d + std::chrono::days{n}; }
inline long days_between(Date from, Date to) { return (to - from).count(); }

}  // namespace epideconv
