#include "segraph/calendar.hpp"

#include <charconv>

#include <fmt/format.h>

#include "segraph/error.hpp"

namespace segraph {

namespace {

int parse_field(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DataError(fmt::format("malformed date '{}'", whole));
  }
  return value;
}

}  // namespace

std::chrono::year_month_day parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError(fmt::format("malformed date '{}' (expected YYYY-MM-DD)", text));
  }
  const int y = parse_field(text.substr(0, 4), text);
  const int m = parse_field(text.substr(5, 2), text);
  const int d = parse_field(text.substr(8, 2), text);
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError(fmt::format("invalid calendar date '{}'", text));
  return ymd;
}

std::string format_iso_date(std::chrono::year_month_day date) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()),
                     static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
}

Day Calendar::day_of(std::chrono::year_month_day date) const {
  const auto delta = std::chrono::sys_days{date} - std::chrono::sys_days{epoch};
  return static_cast<Day>(delta.count()) + 1;
}

Day Calendar::day_of(std::string_view iso_date) const { return day_of(parse_iso_date(iso_date)); }

std::chrono::year_month_day Calendar::date_of(Day day) const {
  return std::chrono::year_month_day{std::chrono::sys_days{epoch} + std::chrono::days{day - 1}};
}

std::string Calendar::iso(Day day) const { return format_iso_date(date_of(day)); }

}  // namespace segraph
