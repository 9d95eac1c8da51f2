#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace segraph {

// Day indices are 1-based: day 1 is the epoch date.
using Day = int;

inline constexpr int kDefaultHorizon = 1448;

struct Calendar {
  std::chrono::year_month_day epoch{std::chrono::year{1999}, std::chrono::month{1},
                                    std::chrono::day{1}};
  int horizon = kDefaultHorizon;

  // Parses "YYYY-MM-DD" and returns the (possibly out-of-range) day index.
  // Throws DataError on malformed text.
  Day day_of(std::string_view iso_date) const;
  Day day_of(std::chrono::year_month_day date) const;
  std::chrono::year_month_day date_of(Day day) const;
  std::string iso(Day day) const;

  bool contains(Day day) const { return day >= 1 && day <= horizon; }
};

std::chrono::year_month_day parse_iso_date(std::string_view text);
std::string format_iso_date(std::chrono::year_month_day date);

}  // namespace segraph
