#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bayesviews {

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
/// Arithmetic is in calendar days, which is what the daily rebalancing
/// loop and the annualization formula both operate on.
class Date {
 public:
  Date() = default;
  explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}
  Date(int year, int month, int day);

  static Date parse_iso(const std::string& text);  // "YYYY-MM-DD"

  std::string to_iso() const;
  std::int32_t days_since_epoch() const { return days_; }

  Date operator+(int days) const { return Date(days_ + days); }
  Date operator-(int days) const { return Date(days_ - days); }
  int operator-(Date other) const { return days_ - other.days_; }
  Date& operator++() { ++days_; return *this; }

  auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

}  // namespace bayesviews
