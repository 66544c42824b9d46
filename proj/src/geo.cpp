#include "locenc/geo.hpp"

#include <algorithm>
#include <cmath>

#include "locenc/errors.hpp"

namespace locenc {

LocationDeg validate_location(double lon, double lat) {
    if (!std::isfinite(lon) || !std::isfinite(lat)) {
        throw NonFiniteError("location must be finite, got lon=" + std::to_string(lon) +
                             " lat=" + std::to_string(lat));
    }
    if (lon < -180.0 || lon > 180.0) {
        throw RangeError("longitude " + std::to_string(lon) + " outside [-180, 180]");
    }
    if (lat < -90.0 || lat > 90.0) {
        throw RangeError("latitude " + std::to_string(lat) + " outside [-90, 90]");
    }
    return LocationDeg{lon, lat};
}

namespace {

// Reduce to [-180, 180] exactly (degrees are representable; fmod is exact).
double reduce_deg(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r > 180.0) r -= 360.0;
    if (r < -180.0) r += 360.0;
    return r;
}

constexpr double kDegToRad = M_PI / 180.0;

} // namespace

double sind(double deg) {
    const double r = reduce_deg(deg);
    // Fold into [-90, 90] where sin is evaluated directly; the fold uses
    // exact degree arithmetic so sind(180) == 0 and sind(90) == 1 exactly.
    if (r > 90.0) return std::sin((180.0 - r) * kDegToRad);
    if (r < -90.0) return std::sin((-180.0 - r) * kDegToRad);
    return std::sin(r * kDegToRad);
}

double cosd(double deg) {
    // cos(x) = sin(90 - x); the shift is exact in degrees.
    return sind(90.0 - reduce_deg(deg));
}

double great_circle_angle_rad(const LocationDeg& a, const LocationDeg& b) {
    // Haversine form: well-conditioned for both small and near-antipodal
    // separations, and periodic in longitude.
    const double s_dlat = sind((b.lat - a.lat) * 0.5);
    const double s_dlon = sind((b.lon - a.lon) * 0.5);
    const double h = s_dlat * s_dlat + cosd(a.lat) * cosd(b.lat) * s_dlon * s_dlon;
    return 2.0 * std::asin(std::min(1.0, std::sqrt(std::max(0.0, h))));
}

double haversine_km(const LocationDeg& a, const LocationDeg& b) {
    return kEarthRadiusKm * great_circle_angle_rad(a, b);
}

Vec3 latlon_to_xyz(const LocationDeg& a) {
    const double cl = cosd(a.lat);
    return Vec3(cl * cosd(a.lon), cl * sind(a.lon), sind(a.lat));
}

} // namespace locenc
