#pragma once

#include <limits>
#include <numbers>

// Unit conventions used throughout: frequencies and Hamiltonians in MHz (units of h),
// times in microseconds, fields in mT, angles in radians unless a name says _deg.
namespace spinguard::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Bohr magneton over Planck constant, MHz per mT (13.9962449 GHz/T).
inline constexpr double bohr_mhz_per_mt = 13.9962449;

inline constexpr double infinity = std::numeric_limits<double>::infinity();

constexpr double deg_to_rad(double deg) { return deg * pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / pi; }

} // namespace spinguard::units
