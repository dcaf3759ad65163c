#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace epinomic {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr int kAgeGroups = 17;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data validation failure carrying the offending file, row and invariant.
class DataError : public Error {
public:
    DataError(std::string file, long row, std::string invariant, const std::string& detail);
    const std::string& file() const { return file_; }
    long row() const { return row_; }
    const std::string& invariant() const { return invariant_; }

private:
    std::string file_;
    long row_;
    std::string invariant_;
};

/// Proleptic Gregorian day count.
using Date = std::chrono::sys_days;

Date parse_date(std::string_view iso);
std::string format_date(Date d);
Date make_date(int y, unsigned m, unsigned d);
int year_of(Date d);
/// Days elapsed since January 1 of the date's own year.
double day_of_year(Date d);
inline long days_between(Date a, Date b) { return (b - a).count(); }

/// Shortest round-trip decimal representation.
std::string format_number(double v);

} // namespace epinomic
