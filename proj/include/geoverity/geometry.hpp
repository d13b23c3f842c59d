#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "geoverity/geo.hpp"

namespace geoverity::geometry {

inline constexpr double kAreaTolerance = 1e-9;  // ms^2, absolute

/// Verification triangle: three verifier positions plus the smaller one-way
/// delays measured directly between each verifier pair (x = A<->B, y = B<->C,
/// z = A<->C), in milliseconds.
struct TriangleSpec {
    std::array<geo::GeoPoint, 3> vertices;
    std::array<double, 3> baseline_ms;  // x, y, z

    TriangleSpec(const std::array<geo::GeoPoint, 3>& verts, const std::array<double, 3>& baseline)
        : vertices(verts), baseline_ms(baseline) {
        for (double d : baseline_ms)
            if (!(d > 0.0)) throw std::invalid_argument("TriangleSpec: baseline must be positive");
        if (geo::spherical_triangle_area_km2(verts[0], verts[1], verts[2]) <= 0.0)
            throw std::invalid_argument("TriangleSpec: vertices are collinear");
    }
};

/// Heron's formula on three side lengths. nullopt marks a triangle-inequality
/// violation (strictly, the longest side exceeding the sum of the others);
/// the boundary case is a legitimate zero-area triangle.
inline std::optional<double> heron_area(double s1, double s2, double s3) {
    if (s1 < 0.0 || s2 < 0.0 || s3 < 0.0)
        throw std::invalid_argument("heron_area: negative side length");
    // sort so the result is bit-identical under permutation of the sides
    std::array<double, 3> sv{s1, s2, s3};
    std::sort(sv.begin(), sv.end());
    if (sv[2] > sv[0] + sv[1] + kAreaTolerance) return std::nullopt;
    const double s = (sv[0] + sv[1] + sv[2]) / 2.0;
    const double prod = s * (s - sv[0]) * (s - sv[1]) * (s - sv[2]);
    return std::sqrt(std::max(0.0, prod));
}

enum class ConditionOutcome { PASS, FAIL, INVALID };

enum class EpsilonMode {
    PER_SIDE_SLACK,  // epsilon interpreted as per-side ms slack, converted to an area margin
    RAW_AREA,        // epsilon compared directly in ms^2
};

/// Smaller-OWD estimate between the client and each verifier, from the MP solver.
struct OwdEstimate {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    bool valid = false;
};

/// Area margin corresponding to per-side delay slack epsilon on triangle (x,y,z):
/// the area gained by inflating each side by epsilon/2.
inline double epsilon_area_margin(double x, double y, double z, double epsilon_ms) {
    const auto base = heron_area(x, y, z);
    const auto inflated =
        heron_area(x + epsilon_ms / 2.0, y + epsilon_ms / 2.0, z + epsilon_ms / 2.0);
    if (!base || !inflated) return 0.0;
    return *inflated - *base;
}

/// CPV containment condition: sum of the three client sub-triangle areas must
/// not exceed the verifier triangle's area plus the epsilon margin.
///
/// Degenerate sub-triangles never silently favor acceptance:
///  - baseline side longer than the two client delays: the client delays are
///    implausibly short (attacker-favorable), so the iteration is INVALID
///    and excluded from the vote;
///  - client delay longer than baseline + partner delay by more than the
///    per-side slack: the client is demonstrably far, the iteration FAILs;
///  - client-side violation within the slack: jitter on a near-flat
///    configuration, scored as the flat-limit sub-area 0.
/// The slack bound keeps the zero-area reading from being steerable: an
/// attacker inflating one delay to flatten a sub-triangle overshoots the
/// slack and fails, while small violations cannot shrink the sum by more
/// than the margin epsilon already concedes.
inline ConditionOutcome cpv_condition(const OwdEstimate& est, const std::array<double, 3>& baseline,
                                      double epsilon_ms,
                                      EpsilonMode mode = EpsilonMode::PER_SIDE_SLACK) {
    const double x = baseline[0], y = baseline[1], z = baseline[2];
    if (!est.valid) return ConditionOutcome::INVALID;

    const auto outer = heron_area(x, y, z);
    if (!outer) return ConditionOutcome::INVALID;

    const double a = est.a, b = est.b, c = est.c;
    struct Sub {
        double base, c1, c2;
    };
    const std::array<Sub, 3> subs{{{x, a, b}, {y, b, c}, {z, c, a}}};

    double sub_sum = 0.0;
    for (const auto& t : subs) {
        const auto area = heron_area(t.base, t.c1, t.c2);
        if (area) {
            sub_sum += *area;
            continue;
        }
        if (t.base > t.c1 + t.c2) return ConditionOutcome::INVALID;
        const double exceedance = std::max(t.c1, t.c2) - (t.base + std::min(t.c1, t.c2));
        const double slack = (mode == EpsilonMode::PER_SIDE_SLACK) ? epsilon_ms : 0.0;
        if (exceedance > slack) return ConditionOutcome::FAIL;
        // within slack: flat-limit sub-triangle, contributes area 0
    }

    const double margin = (mode == EpsilonMode::PER_SIDE_SLACK)
                              ? epsilon_area_margin(x, y, z, epsilon_ms)
                              : epsilon_ms;
    return sub_sum <= *outer + margin + kAreaTolerance ? ConditionOutcome::PASS
                                                       : ConditionOutcome::FAIL;
}

enum class CircleRule {
    RIGHT_ANGLE,  // d1^2 + d2^2 <= (d12 + eps)^2  (Thales)
    SUM_FORM,     // d1 + d2 <= sqrt(2)*d12 + eps
};

/// SLV pairwise circle test in delay space: is the server inside the circle
/// whose diameter spans the verifier pair? Thales: the angle subtended at an
/// interior point is obtuse, i.e. d1^2 + d2^2 <= d12^2.
inline bool circle_contains(double owd_v1s, double owd_v2s, double owd_v1v2, double epsilon_slv_ms,
                            CircleRule rule = CircleRule::RIGHT_ANGLE) {
    if (rule == CircleRule::RIGHT_ANGLE) {
        const double slack = owd_v1v2 + epsilon_slv_ms;
        return owd_v1s * owd_v1s + owd_v2s * owd_v2s <= slack * slack + kAreaTolerance;
    }
    return owd_v1s + owd_v2s <= std::sqrt(2.0) * owd_v1v2 + epsilon_slv_ms + kAreaTolerance;
}

}  // namespace geoverity::geometry
