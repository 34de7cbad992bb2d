#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hydrocube {

/// Dense raster plane, row-major so each image row is contiguous in memory.
template <class Scalar>
using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PlaneF = Plane<float>;
using PlaneD = Plane<double>;

/// Binary water mask: 0 = land, 1 = water.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Calendar date (proleptic Gregorian). Ordering and day arithmetic only;
/// no timezone or time-of-day semantics.
struct Date {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    friend auto operator<=>(const Date&, const Date&) = default;

    bool valid() const;

    /// Days since 1970-01-01 (Howard Hinnant's civil-days algorithm).
    std::int64_t to_days() const;
    static Date from_days(std::int64_t days);

    /// Calendar advance; day-of-month clamped to the target month's length.
    Date add_months(int months) const;

    std::string to_iso() const;                 // "2016-07-15"
    static Date parse_iso(const std::string&);  // "YYYY-MM-DD"
    static Date parse_us(const std::string&);   // "MM/DD/YYYY"
};

inline std::int64_t days_between(const Date& a, const Date& b) {
    return b.to_days() - a.to_days();
}

}  // namespace hydrocube
