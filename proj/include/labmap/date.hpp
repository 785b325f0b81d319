#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace labmap {

// Proleptic Gregorian calendar date.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  // Days since 1970-01-01.
  std::int64_t to_days() const;
  static Date from_days(std::int64_t days);

  // Strict YYYY-MM-DD. Throws FormatError with a short reason
  // ("invalid month", "invalid day", ...).
  static Date parse(std::string_view text);

  std::string to_string() const;       // YYYY-MM-DD
  std::string month_label() const;     // YYYY-MM
  int month_index() const { return year * 12 + (month - 1); }
};

int days_in_month(int year, int month);
bool is_leap_year(int year);

// Inclusive date range; used for the study window and query filters.
struct DateRange {
  Date first{2000, 1, 1};
  Date last{2011, 12, 31};
  bool contains(const Date& d) const { return first <= d && d <= last; }
};

}  // namespace labmap
