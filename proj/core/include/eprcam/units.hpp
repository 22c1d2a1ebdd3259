#pragma once

#include <string>
#include <string_view>

// Internal units: lengths in micrometres, momenta in hbar/um (hbar = 1),
// charge in electrons.
namespace eprcam::units {

inline constexpr double pi = 3.14159265358979323846;

inline constexpr double um_per_nm = 1e-3;
inline constexpr double um_per_mm = 1e3;
inline constexpr double um_per_m = 1e6;

/// Parses a length such as "355 nm", "0.66mm", "16 um" or "16 μm" into
/// micrometres. A bare number without a unit suffix is rejected.
double parse_length_um(std::string_view text);

/// Inverse of parse_length_um for the given unit ("nm", "um", "mm", "m").
std::string format_length(double value_um, std::string_view unit);

}  // namespace eprcam::units
