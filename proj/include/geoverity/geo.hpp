#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace geoverity::geo {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Geographic coordinate. lon is normalized to (-180, 180].
struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    GeoPoint() = default;
    GeoPoint(double lat_deg, double lon_deg) : lat(lat_deg), lon(lon_deg) {
        if (lat < -90.0 || lat > 90.0)
            throw std::invalid_argument("GeoPoint: latitude out of [-90, 90]");
        // canonical longitude range (-180, 180]
        lon = std::fmod(lon, 360.0);
        if (lon <= -180.0) lon += 360.0;
        if (lon > 180.0) lon -= 360.0;
    }

    bool operator==(const GeoPoint& o) const { return lat == o.lat && lon == o.lon; }
};

/// Great-circle distance on a spherical Earth (haversine).
inline double great_circle_km(const GeoPoint& p, const GeoPoint& q) {
    const double phi1 = deg2rad(p.lat), phi2 = deg2rad(q.lat);
    const double dphi = phi2 - phi1;
    const double dlam = deg2rad(q.lon - p.lon);
    const double sp = std::sin(dphi / 2.0), sl = std::sin(dlam / 2.0);
    const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

namespace detail {

struct Vec3 {
    double x, y, z;
};

inline Vec3 to_unit_vec(const GeoPoint& p) {
    const double phi = deg2rad(p.lat), lam = deg2rad(p.lon);
    return {std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam), std::sin(phi)};
}

}  // namespace detail

/// Gnomonic projection of q onto the tangent plane at center. Great circles
/// map to straight lines, so planar containment tests stay exact.
/// Throws if q is on or beyond the horizon hemisphere boundary.
inline std::array<double, 2> gnomonic_project(const GeoPoint& center, const GeoPoint& q) {
    using namespace detail;
    const Vec3 c = to_unit_vec(center), v = to_unit_vec(q);
    const double cos_c = c.x * v.x + c.y * v.y + c.z * v.z;
    if (cos_c <= 1e-12)
        throw std::domain_error("gnomonic_project: point beyond projection hemisphere");
    // local east/north basis at center
    const double phi = deg2rad(center.lat), lam = deg2rad(center.lon);
    const Vec3 east{-std::sin(lam), std::cos(lam), 0.0};
    const Vec3 north{-std::sin(phi) * std::cos(lam), -std::sin(phi) * std::sin(lam), std::cos(phi)};
    const double x = (v.x * east.x + v.y * east.y + v.z * east.z) / cos_c;
    const double y = (v.x * north.x + v.y * north.y + v.z * north.z) / cos_c;
    return {x * kEarthRadiusKm, y * kEarthRadiusKm};
}

/// Signed double-area of a planar triangle (positive if counterclockwise).
inline double cross2(const std::array<double, 2>& a, const std::array<double, 2>& b,
                     const std::array<double, 2>& c) {
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

/// True iff p lies inside (or on the boundary of) the spherical triangle abc.
/// Projects gnomonically around p, reducing to a planar origin-in-triangle test.
inline bool point_in_spherical_triangle(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b,
                                        const GeoPoint& c) {
    std::array<double, 2> pa, pb, pc;
    try {
        pa = gnomonic_project(p, a);
        pb = gnomonic_project(p, b);
        pc = gnomonic_project(p, c);
    } catch (const std::domain_error&) {
        return false;  // vertex on the far hemisphere: p cannot be inside
    }
    const std::array<double, 2> origin{0.0, 0.0};
    const double d1 = cross2(pa, pb, origin);
    const double d2 = cross2(pb, pc, origin);
    const double d3 = cross2(pc, pa, origin);
    const bool has_neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
    const bool has_pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
    return !(has_neg && has_pos);
}

/// Spherical triangle area via L'Huilier's theorem, in km^2.
inline double spherical_triangle_area_km2(const GeoPoint& a, const GeoPoint& b, const GeoPoint& c) {
    const double ar = great_circle_km(b, c) / kEarthRadiusKm;
    const double br = great_circle_km(a, c) / kEarthRadiusKm;
    const double cr = great_circle_km(a, b) / kEarthRadiusKm;
    const double s = (ar + br + cr) / 2.0;
    const double t = std::tan(s / 2.0) * std::tan((s - ar) / 2.0) * std::tan((s - br) / 2.0) *
                     std::tan((s - cr) / 2.0);
    if (t <= 0.0) return 0.0;
    const double excess = 4.0 * std::atan(std::sqrt(t));
    return excess * kEarthRadiusKm * kEarthRadiusKm;
}

/// Destination point given start, initial bearing (degrees clockwise from
/// north) and great-circle distance.
inline GeoPoint destination(const GeoPoint& start, double bearing_deg, double distance_km) {
    const double delta = distance_km / kEarthRadiusKm;
    const double theta = deg2rad(bearing_deg);
    const double phi1 = deg2rad(start.lat), lam1 = deg2rad(start.lon);
    const double sin_phi2 =
        std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
    const double phi2 = std::asin(std::max(-1.0, std::min(1.0, sin_phi2)));
    const double y = std::sin(theta) * std::sin(delta) * std::cos(phi1);
    const double x = std::cos(delta) - std::sin(phi1) * sin_phi2;
    const double lam2 = lam1 + std::atan2(y, x);
    return GeoPoint(rad2deg(phi2), rad2deg(lam2));
}

}  // namespace geoverity::geo
