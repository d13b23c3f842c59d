#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geoverity/cpv.hpp"
#include "geoverity/geo.hpp"
#include "geoverity/geometry.hpp"
#include "geoverity/slv.hpp"

namespace geoverity::manager {

enum class Health { OK, DEGRADED, DOWN };

struct VerifierEntry {
    std::string id;
    geo::GeoPoint location;
    std::string wire_address;  // host:port in real mode
    Health health = Health::OK;
};

struct VerifierRegistry {
    std::vector<VerifierEntry> verifiers;

    const VerifierEntry& by_id(const std::string& id) const {
        for (const auto& v : verifiers)
            if (v.id == id) return v;
        throw std::out_of_range("unknown verifier: " + id);
    }
};

struct NoCoverage : std::runtime_error {
    std::array<std::string, 3> nearest_triple;
    explicit NoCoverage(const std::array<std::string, 3>& nearest)
        : std::runtime_error("no verifier triple covers the asserted location (nearest: " +
                             nearest[0] + "," + nearest[1] + "," + nearest[2] + ")"),
          nearest_triple(nearest) {}
};

struct TripleSelection {
    std::array<std::string, 3> ids;
    std::array<geo::GeoPoint, 3> positions;
    double area_km2 = 0.0;
};

/// Choose, among OK verifiers whose geographic triangle contains the asserted
/// point, the triple with the smallest area (the triangle is the verification
/// granularity). Ties break lexicographically by id triple.
inline TripleSelection select_triangle(const geo::GeoPoint& asserted,
                                       const VerifierRegistry& registry) {
    std::vector<const VerifierEntry*> ok;
    for (const auto& v : registry.verifiers)
        if (v.health == Health::OK) ok.push_back(&v);
    if (ok.size() < 3) throw std::runtime_error("fewer than 3 OK verifiers registered");
    std::sort(ok.begin(), ok.end(),
              [](const VerifierEntry* a, const VerifierEntry* b) { return a->id < b->id; });

    std::optional<TripleSelection> best;
    double nearest_dist = 0.0;
    std::array<const VerifierEntry*, 3> nearest_triple{};
    bool have_nearest = false;

    for (std::size_t i = 0; i < ok.size(); ++i) {
        for (std::size_t j = i + 1; j < ok.size(); ++j) {
            for (std::size_t k = j + 1; k < ok.size(); ++k) {
                const std::array<const VerifierEntry*, 3> triple{ok[i], ok[j], ok[k]};
                const double centroid_dist =
                    geo::great_circle_km(triple[0]->location, asserted) +
                    geo::great_circle_km(triple[1]->location, asserted) +
                    geo::great_circle_km(triple[2]->location, asserted);
                if (!have_nearest || centroid_dist < nearest_dist) {
                    nearest_dist = centroid_dist;
                    nearest_triple = triple;
                    have_nearest = true;
                }
                if (!geo::point_in_spherical_triangle(asserted, triple[0]->location,
                                                      triple[1]->location, triple[2]->location))
                    continue;
                const double area = geo::spherical_triangle_area_km2(
                    triple[0]->location, triple[1]->location, triple[2]->location);
                if (!best || area < best->area_km2) {
                    best = TripleSelection{{triple[0]->id, triple[1]->id, triple[2]->id},
                                           {triple[0]->location, triple[1]->location,
                                            triple[2]->location},
                                           area};
                }
            }
        }
    }
    if (!best) {
        std::array<std::string, 3> near_ids{"", "", ""};
        if (have_nearest)
            near_ids = {nearest_triple[0]->id, nearest_triple[1]->id, nearest_triple[2]->id};
        throw NoCoverage(near_ids);
    }
    return *best;
}

/// Append-only results log: one line per terminal request outcome.
class ResultsLog {
public:
    ResultsLog() = default;
    explicit ResultsLog(const std::string& path) : path_(path) {}

    void record(const std::string& line) {
        lines_.push_back(line);
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::app);
        out << line << '\n';
    }

    const std::vector<std::string>& lines() const { return lines_; }

private:
    std::string path_;
    std::vector<std::string> lines_;
};

}  // namespace geoverity::manager
