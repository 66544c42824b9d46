#include <doctest.h>

#include <cmath>

#include "locenc/errors.hpp"
#include "locenc/geo.hpp"
#include "test_util.hpp"

using namespace locenc;

TEST_CASE("validate_location accepts in-range and rejects out-of-range") {
    const LocationDeg ok = validate_location(0, 0);
    CHECK(ok.lon == 0.0);
    CHECK(ok.lat == 0.0);
    const LocationDeg corner = validate_location(-180, -90);
    CHECK(corner.lon == -180.0);
    CHECK(corner.lat == -90.0);
    CHECK_THROWS_AS(validate_location(181, 0), RangeError);
    CHECK_THROWS_AS(validate_location(0, 95), RangeError);
    CHECK_THROWS_AS(validate_location(std::nan(""), 0), NonFiniteError);
    CHECK_THROWS_AS(validate_location(0, std::numeric_limits<double>::infinity()),
                    NonFiniteError);
}

TEST_CASE("haversine closed forms") {
    const LocationDeg origin{0, 0};
    CHECK(haversine_km(origin, origin) == 0.0);
    // Antipodal: pi * R; quarter turn: pi * R / 2.
    CHECK(std::abs(haversine_km(origin, {180, 0}) - M_PI * 6371.0) < 1e-9);
    CHECK(std::abs(haversine_km(origin, {180, 0}) - 20015.087) < 1e-3);
    CHECK(std::abs(haversine_km(origin, {90, 0}) - 10007.543) < 1e-3);
}

TEST_CASE("latlon_to_xyz axis cases") {
    CHECK(latlon_to_xyz({0, 0}).isApprox(Vec3(1, 0, 0), 1e-15));
    CHECK(latlon_to_xyz({0, 90}).isApprox(Vec3(0, 0, 1), 1e-15));
    CHECK(latlon_to_xyz({90, 0}).isApprox(Vec3(0, 1, 0), 1e-15));
    // Exact values at the axes, not just approximate.
    CHECK(latlon_to_xyz({0, 90}).x() == 0.0);
    CHECK(latlon_to_xyz({90, 0}).x() == 0.0);
    CHECK(latlon_to_xyz({180, 10}).y() == 0.0);
}

TEST_CASE("great_circle_angle_rad basics") {
    CHECK(great_circle_angle_rad({0, 0}, {0, 0}) == 0.0);
    CHECK(great_circle_angle_rad({0, 0}, {180, 0}) == doctest::Approx(M_PI).epsilon(1e-12));
    CHECK(great_circle_angle_rad({0, 0}, {90, 0}) == doctest::Approx(M_PI / 2).epsilon(1e-12));
}

TEST_CASE("haversine_km is symmetric and consistent with the central angle") {
    auto locs = testutil::random_locations(200, 41);
    for (std::size_t i = 0; i + 1 < locs.size(); i += 2) {
        const auto& a = locs[i];
        const auto& b = locs[i + 1];
        CHECK(haversine_km(a, b) == haversine_km(b, a));
        CHECK(haversine_km(a, b) >= 0.0);
        CHECK(std::abs(haversine_km(a, b) / 6371.0 - great_circle_angle_rad(a, b)) < 1e-12);
    }
}

TEST_CASE("triangle inequality on 1000 random triples") {
    std::mt19937_64 eng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = testutil::random_location(eng);
        const auto b = testutil::random_location(eng);
        const auto c = testutil::random_location(eng);
        CHECK(haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-9);
    }
}

TEST_CASE("xyz conversion preserves central angles") {
    std::mt19937_64 eng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = testutil::random_location(eng);
        const auto b = testutil::random_location(eng);
        const double dot = std::clamp(latlon_to_xyz(a).dot(latlon_to_xyz(b)), -1.0, 1.0);
        CHECK(std::abs(std::acos(dot) - great_circle_angle_rad(a, b)) < 1e-9);
    }
}

TEST_CASE("unit norm of converted vectors") {
    std::mt19937_64 eng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = testutil::random_location(eng);
        CHECK(std::abs(latlon_to_xyz(a).squaredNorm() - 1.0) < 1e-12);
    }
}

TEST_CASE("antimeridian is periodic, not normalized") {
    // +180 and -180 are the same point for distances.
    CHECK(haversine_km({180, 30}, {-180, 30}) < 1e-9);
    CHECK(latlon_to_xyz({180, 30}).isApprox(latlon_to_xyz({-180, 30}), 0));
}
