#include "hydrocube/types.hpp"

#include <array>
#include <cstdio>

namespace hydrocube {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> len = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return len[m - 1];
}

}  // namespace

bool Date::valid() const {
    return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

std::int64_t Date::to_days() const {
    // days_from_civil, see Hinnant's chrono-compatible date algorithms
    std::int64_t y = year;
    y -= month <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2u) / 5u + day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date Date::from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

Date Date::add_months(int months) const {
    int idx = year * 12 + (month - 1) + months;
    int y = idx / 12;
    int m = idx % 12;
    if (m < 0) {
        m += 12;
        y -= 1;
    }
    int d = std::min(day, days_in_month(y, m + 1));
    return Date{y, m + 1, d};
}

std::string Date::to_iso() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

Date Date::parse_iso(const std::string& s) {
    Date d;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3 || !d.valid())
        throw std::invalid_argument("bad ISO date: '" + s + "'");
    return d;
}

Date Date::parse_us(const std::string& s) {
    Date d;
    if (std::sscanf(s.c_str(), "%d/%d/%d", &d.month, &d.day, &d.year) != 3 || !d.valid())
        throw std::invalid_argument("bad MM/DD/YYYY date: '" + s + "'");
    return d;
}

}  // namespace hydrocube
