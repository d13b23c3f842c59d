#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geoverity/geo.hpp"
#include "geoverity/geometry.hpp"

namespace geoverity::slv {

enum class ProbeLayer { TCP_HANDSHAKE, HTTP_REQUEST_RESPONSE };

struct ProbeSample {
    ProbeLayer layer = ProbeLayer::TCP_HANDSHAKE;
    double rtt_ms = 0.0;
    int verifier = 0;
    double timestamp_ms = 0.0;
};

/// Verification is keyed by IP address; the domain exists only for pinning.
struct SlvRequest {
    std::string server_ip;
    geo::GeoPoint asserted_location;
    std::string domain;  // optional, pinning only
};

struct ProbeFailed : std::runtime_error {
    explicit ProbeFailed(const std::string& what) : std::runtime_error(what) {}
};

/// Per-verifier RTT estimate: minimum across all samples and layers.
inline double min_rtt_estimate(const std::vector<ProbeSample>& samples) {
    if (samples.empty()) throw ProbeFailed("no probe samples");
    double best = samples.front().rtt_ms;
    for (const auto& s : samples) {
        if (s.rtt_ms <= 0.0) throw std::invalid_argument("ProbeSample rtt must be positive");
        best = std::min(best, s.rtt_ms);
    }
    return best;
}

struct PairResult {
    int v1 = 0;
    int v2 = 0;
    bool covers_assertion = false;  // circle contains the asserted location
    bool contains_server = false;   // delay-space test outcome
};

struct SlvDecision {
    bool indeterminate = false;
    bool verification_passed = false;
    std::vector<PairResult> pairs;
};

/// Pairwise circle verification: the server must test inside every circle
/// (diameter = verifier pair) that covers the asserted location. Pairs whose
/// circle misses the assertion are vacuous. OWD proxy per leg is half the
/// min-filtered RTT.
///
/// verifier_rtts: per-verifier min RTT to the server (ms), nullopt = probe
/// failed; verifier_owds: smaller OWD between each verifier pair (pair (i,j)
/// with i<j); positions: verifier locations for coverage checks.
inline SlvDecision slv_verify(const geo::GeoPoint& asserted,
                              const std::array<geo::GeoPoint, 3>& positions,
                              const std::array<std::optional<double>, 3>& verifier_rtts,
                              const std::array<double, 3>& pair_owds,  // (0,1), (0,2), (1,2)
                              double epsilon_slv_ms,
                              geometry::CircleRule rule = geometry::CircleRule::RIGHT_ANGLE) {
    SlvDecision decision;
    int usable = 0;
    for (const auto& r : verifier_rtts)
        if (r) ++usable;
    if (usable < 3) {
        decision.indeterminate = true;
        return decision;
    }

    constexpr std::array<std::array<int, 2>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
    bool any_covering = false;
    bool all_pass = true;
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
        const int i = pairs[pi][0], j = pairs[pi][1];
        PairResult pr;
        pr.v1 = i;
        pr.v2 = j;
        // geographic coverage: assertion inside the circle on diameter ViVj
        const double d_i = geo::great_circle_km(positions[static_cast<std::size_t>(i)], asserted);
        const double d_j = geo::great_circle_km(positions[static_cast<std::size_t>(j)], asserted);
        const double d_ij = geo::great_circle_km(positions[static_cast<std::size_t>(i)],
                                                 positions[static_cast<std::size_t>(j)]);
        pr.covers_assertion = d_i * d_i + d_j * d_j <= d_ij * d_ij + 1e-9;
        pr.contains_server =
            geometry::circle_contains(*verifier_rtts[static_cast<std::size_t>(i)] / 2.0,
                                      *verifier_rtts[static_cast<std::size_t>(j)] / 2.0,
                                      pair_owds[pi], epsilon_slv_ms, rule);
        if (pr.covers_assertion) {
            any_covering = true;
            all_pass = all_pass && pr.contains_server;
        }
        decision.pairs.push_back(pr);
    }
    decision.verification_passed = any_covering && all_pass;
    return decision;
}

enum class VerdictOutcome { CRITICAL, SUSPICIOUS, UNSUSPICIOUS, VERIFIED_PINNED };

struct SlvVerdict {
    VerdictOutcome outcome = VerdictOutcome::SUSPICIOUS;
    bool verification_passed = false;
    bool was_pinned = false;
};

inline const char* to_string(VerdictOutcome v) {
    switch (v) {
        case VerdictOutcome::CRITICAL: return "CRITICAL";
        case VerdictOutcome::SUSPICIOUS: return "SUSPICIOUS";
        case VerdictOutcome::UNSUSPICIOUS: return "UNSUSPICIOUS";
        default: return "VERIFIED_PINNED";
    }
}

struct PinRecord {
    std::string domain;
    double cell_lat = 0.0;  // quantized cell corner, degrees
    double cell_lon = 0.0;
    std::uint64_t first_verified_ms = 0;
    std::uint64_t last_verified_ms = 0;
};

/// Locations are pinned at cell granularity (~50 km by default); SLV cannot
/// distinguish finer than circle size.
inline std::pair<double, double> quantize_cell(const geo::GeoPoint& p, double cell_deg = 0.5) {
    return {std::floor(p.lat / cell_deg) * cell_deg, std::floor(p.lon / cell_deg) * cell_deg};
}

struct CorruptStore : std::runtime_error {
    explicit CorruptStore(const std::string& what) : std::runtime_error(what) {}
};

/// TOFU pin store: append-only line log plus snapshot-on-expire. Line format,
/// space-separated:  domain cell_lat cell_lon first_verified_ms last_verified_ms
class PinStore {
public:
    PinStore() = default;  // in-memory only

    explicit PinStore(const std::filesystem::path& path, bool repair = false) : path_(path) {
        if (!std::filesystem::exists(path)) return;
        std::ifstream in(path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            PinRecord rec;
            std::istringstream ls(line);
            if (!(ls >> rec.domain >> rec.cell_lat >> rec.cell_lon >> rec.first_verified_ms >>
                  rec.last_verified_ms)) {
                if (repair) continue;
                throw CorruptStore("pin store line " + std::to_string(lineno) +
                                   " unreadable; rerun with repair to drop it");
            }
            records_[key(rec.domain, rec.cell_lat, rec.cell_lon)] = rec;
        }
    }

    std::optional<PinRecord> lookup(const std::string& domain) const {
        std::optional<PinRecord> found;
        for (const auto& [k, rec] : records_) {
            if (rec.domain != domain) continue;
            if (!found || rec.last_verified_ms > found->last_verified_ms) found = rec;
        }
        return found;
    }

    /// Idempotent on (domain, cell): an existing record only refreshes
    /// last_verified.
    void put(const PinRecord& rec) {
        auto it = records_.find(key(rec.domain, rec.cell_lat, rec.cell_lon));
        PinRecord stored = rec;
        if (it != records_.end()) {
            stored.first_verified_ms = it->second.first_verified_ms;
            stored.last_verified_ms = std::max(it->second.last_verified_ms, rec.last_verified_ms);
        }
        records_[key(rec.domain, rec.cell_lat, rec.cell_lon)] = stored;
        append(stored);
    }

    /// Drop records older than max_age by last_verified and snapshot the rest.
    void expire(std::uint64_t max_age_ms, std::uint64_t now_ms) {
        for (auto it = records_.begin(); it != records_.end();) {
            if (now_ms - it->second.last_verified_ms > max_age_ms ||
                (max_age_ms == 0 && now_ms >= it->second.last_verified_ms))
                it = records_.erase(it);
            else
                ++it;
        }
        snapshot();
    }

    std::size_t size() const { return records_.size(); }

private:
    static std::string key(const std::string& domain, double lat, double lon) {
        std::ostringstream os;
        os << domain << '|' << lat << '|' << lon;
        return os.str();
    }

    void append(const PinRecord& rec) {
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::app);
        write_line(out, rec);
    }

    void snapshot() {
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::trunc);
        for (const auto& [k, rec] : records_) write_line(out, rec);
    }

    static void write_line(std::ofstream& out, const PinRecord& rec) {
        out << rec.domain << ' ' << rec.cell_lat << ' ' << rec.cell_lon << ' '
            << rec.first_verified_ms << ' ' << rec.last_verified_ms << '\n';
    }

    std::filesystem::path path_;
    std::map<std::string, PinRecord> records_;
};

/// The threefold outcome, plus VERIFIED_PINNED for a pass matching an
/// existing pin. TOFU: only a positive verification ever writes a pin.
inline SlvVerdict classify_verdict(const std::string& domain, const geo::GeoPoint& location,
                                   bool verification_passed, PinStore& pins,
                                   std::uint64_t now_ms, double cell_deg = 0.5) {
    const auto [cell_lat, cell_lon] = quantize_cell(location, cell_deg);
    const auto existing = pins.lookup(domain);
    const bool was_pinned = existing.has_value();

    SlvVerdict verdict;
    verdict.verification_passed = verification_passed;
    verdict.was_pinned = was_pinned;
    if (!verification_passed) {
        verdict.outcome = was_pinned ? VerdictOutcome::CRITICAL : VerdictOutcome::SUSPICIOUS;
        return verdict;
    }
    if (!was_pinned) {
        verdict.outcome = VerdictOutcome::UNSUSPICIOUS;
        pins.put({domain, cell_lat, cell_lon, now_ms, now_ms});
        return verdict;
    }
    verdict.outcome = VerdictOutcome::VERIFIED_PINNED;
    pins.put({domain, existing->cell_lat, existing->cell_lon, existing->first_verified_ms, now_ms});
    return verdict;
}

}  // namespace geoverity::slv
