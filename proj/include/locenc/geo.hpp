#pragma once

#include <Eigen/Core>

namespace locenc {

/// Mean Earth radius in kilometers, fixed for every distance in the library.
inline constexpr double kEarthRadiusKm = 6371.0;

/// A geographic point, longitude/latitude in degrees.
/// lon in [-180, 180], lat in [-90, 90]; exact +-180 is legal and handled
/// periodically, never normalized away.
struct LocationDeg {
    double lon = 0.0;
    double lat = 0.0;
};

using Vec3 = Eigen::Vector3d;

/// Validates ranges and finiteness. Out-of-range input is rejected, never
/// silently wrapped.
/// Throws RangeError, NonFiniteError.
LocationDeg validate_location(double lon, double lat);

/// sin/cos of an angle given in degrees, with exact range reduction so that
/// multiples of 90 degrees map to exact {0, +-1}. This makes latlon_to_xyz
/// exactly periodic at lon = +-180, which multi-scale encoders rely on.
double sind(double deg);
double cosd(double deg);

/// Great-circle central angle in [0, pi].
double great_circle_angle_rad(const LocationDeg& a, const LocationDeg& b);

/// Great-circle distance with R = 6371.0 km. Symmetric, >= 0, and equal to
/// great_circle_angle_rad * R by construction.
double haversine_km(const LocationDeg& a, const LocationDeg& b);

/// Unit vector (cos lat cos lon, cos lat sin lon, sin lat).
Vec3 latlon_to_xyz(const LocationDeg& a);

} // namespace locenc
