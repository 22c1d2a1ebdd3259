#include "eprcam/units.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "eprcam/error.hpp"

namespace eprcam::units {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

double factor_for(std::string_view unit, std::string_view original) {
    if (unit == "nm") return um_per_nm;
    if (unit == "um" || unit == "\xC2\xB5m" || unit == "\xCE\xBCm") return 1.0;  // um, micro sign, greek mu
    if (unit == "mm") return um_per_mm;
    if (unit == "m") return um_per_m;
    fail(ErrorKind::Schema, "length '" + std::string(original) +
                                "' needs a unit suffix (nm, um, mm or m)");
}

}  // namespace

double parse_length_um(std::string_view text) {
    const std::string_view s = trim(text);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || !std::isfinite(value)) {
        fail(ErrorKind::Schema, "cannot parse length '" + std::string(text) + "'");
    }
    const std::string_view unit = trim(s.substr(static_cast<std::size_t>(end - s.data())));
    return value * factor_for(unit, text);
}

std::string format_length(double value_um, std::string_view unit) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value_um / factor_for(unit, unit));
    std::string out(buf, res.ptr);
    out += ' ';
    out += unit;
    return out;
}

}  // namespace eprcam::units
