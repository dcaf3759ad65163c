#include "epinomic/core.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>

namespace epinomic {

DataError::DataError(std::string file, long row, std::string invariant, const std::string& detail)
    : Error(fmt::format("{}{}: {} ({})", file, row >= 0 ? fmt::format(":{}", row) : std::string{},
                        invariant, detail)),
      file_(std::move(file)),
      row_(row),
      invariant_(std::move(invariant)) {}

Date make_date(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw Error(fmt::format("invalid date {}-{}-{}", y, m, d));
    return sys_days{ymd};
}

Date parse_date(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    auto bad = [&] { return Error(fmt::format("invalid date '{}', expected YYYY-MM-DD", s)); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
    if (std::from_chars(s.data(), s.data() + 4, y).ec != std::errc{}) throw bad();
    if (std::from_chars(s.data() + 5, s.data() + 7, m).ec != std::errc{}) throw bad();
    if (std::from_chars(s.data() + 8, s.data() + 10, d).ec != std::errc{}) throw bad();
    return make_date(y, m, d);
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", int(ymd.year()), unsigned(ymd.month()),
                       unsigned(ymd.day()));
}

int year_of(Date d) { return int(std::chrono::year_month_day{d}.year()); }

double day_of_year(Date d) {
    return double(days_between(make_date(year_of(d), 1, 1), d));
}

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace epinomic
