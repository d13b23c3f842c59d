#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "geoverity/geo.hpp"

namespace geoverity::netsim {

inline constexpr double kLightSpeedKmPerMs = 300.0;  // 3e5 km/s

enum class AccessType { WIRED, WIFI };

struct SimNode {
    std::string id;
    geo::GeoPoint location;
    AccessType access = AccessType::WIRED;
};

struct JitterNone {};
struct JitterExponential {
    double mean_ms = 2.0;
};
struct JitterLognormal {
    double mu = 0.0;
    double sigma = 0.5;
};
using JitterDist = std::variant<JitterNone, JitterExponential, JitterLognormal>;

/// 802.11 slotted-contention parameters; defaults match the wired-vs-WiFi
/// stress test setup.
struct Wifi80211Params {
    double slot_us = 20.0;
    double gateway_prop_us = 1.0;
    int competing_stations = 4;
    int min_contention_window = 16;  // slots; doubles per collision
    int max_retries = 7;
};

struct DelayModelParams {
    double speed_factor = 2.0 / 3.0;  // fraction of c, fiber approximation
    JitterDist jitter = JitterExponential{2.0};
    double asymmetry_min = 1.0;  // multiplicative skew, applied to one direction per pair
    double asymmetry_max = 1.3;
    double circuitous_min = 1.0;  // path-stretch multiplier per pair
    double circuitous_max = 1.5;
    Wifi80211Params wifi;

    static DelayModelParams noiseless() {
        DelayModelParams p;
        p.jitter = JitterNone{};
        p.asymmetry_min = p.asymmetry_max = 1.0;
        p.circuitous_min = p.circuitous_max = 1.0;
        return p;
    }
};

struct SimTopology {
    std::vector<SimNode> nodes;
    DelayModelParams params;
    std::uint64_t seed = 1;

    const SimNode& node(const std::string& id) const {
        for (const auto& n : nodes)
            if (n.id == id) return n;
        throw std::out_of_range("unknown node: " + id);
    }
    bool has_node(const std::string& id) const {
        for (const auto& n : nodes)
            if (n.id == id) return true;
        return false;
    }
    void add_node(SimNode n) {
        if (has_node(n.id)) throw std::invalid_argument("duplicate node id: " + n.id);
        nodes.push_back(std::move(n));
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, const std::string& s) {
    std::uint64_t h = seed;
    for (unsigned char c : s) h = splitmix64(h ^ c);
    return h;
}

}  // namespace detail

/// One sampled 802.11 access delay: uniform backoff over a contention window
/// that doubles per collision; a collision happens when any competing station
/// picks the same slot. Capped at max_retries.
template <typename Rng>
double wifi_access_delay(const Wifi80211Params& p, Rng& rng) {
    int window = p.min_contention_window;
    double slots_waited = 0.0;
    for (int attempt = 0; attempt <= p.max_retries; ++attempt) {
        std::uniform_int_distribution<int> pick(0, window - 1);
        const int my_slot = pick(rng);
        slots_waited += my_slot;
        bool collided = false;
        for (int s = 0; s < p.competing_stations; ++s) {
            if (pick(rng) == my_slot) {
                collided = true;
                break;
            }
        }
        if (!collided || attempt == p.max_retries) break;
        window *= 2;
    }
    return (slots_waited * p.slot_us + p.gateway_prop_us) / 1000.0;
}

/// Deterministic per-pair link properties: circuitous stretch shared by both
/// directions, asymmetry factor applied to the lexicographically-forward
/// direction or its reverse (chosen per pair).
struct PairLink {
    double circuitous = 1.0;
    double asymmetry = 1.0;      // >= 1
    bool skew_forward = false;   // which direction carries the skew
};

inline PairLink pair_link(const SimTopology& topo, const std::string& a, const std::string& b) {
    const std::string& lo = a < b ? a : b;
    const std::string& hi = a < b ? b : a;
    std::uint64_t h = detail::mix(detail::mix(detail::splitmix64(topo.seed ^ 0x70a1), lo), hi);
    std::mt19937_64 rng(h);
    const auto& p = topo.params;
    PairLink link;
    link.circuitous =
        std::uniform_real_distribution<double>(p.circuitous_min, p.circuitous_max)(rng);
    link.asymmetry = std::uniform_real_distribution<double>(p.asymmetry_min, p.asymmetry_max)(rng);
    link.skew_forward = (rng() & 1) != 0;
    return link;
}

/// One-way delay sample from -> to for message msg_index. Fully determined by
/// (topology seed, endpoints, msg_index). Propagation floor plus jitter plus
/// 802.11 access delay per WIFI endpoint.
inline double sample_owd(const SimTopology& topo, const std::string& from, const std::string& to,
                         std::uint64_t msg_index) {
    const SimNode& nf = topo.node(from);
    const SimNode& nt = topo.node(to);
    const auto& p = topo.params;

    const PairLink link = pair_link(topo, from, to);
    const bool is_forward = from < to;
    const double skew = (is_forward == link.skew_forward) ? link.asymmetry : 1.0;
    const double dist = geo::great_circle_km(nf.location, nt.location);
    double owd = skew * link.circuitous * dist / (p.speed_factor * kLightSpeedKmPerMs);

    std::uint64_t h = detail::mix(detail::mix(detail::splitmix64(topo.seed), from), to);
    std::mt19937_64 rng(detail::splitmix64(h ^ msg_index));
    if (std::holds_alternative<JitterExponential>(p.jitter)) {
        owd += std::exponential_distribution<double>(
            1.0 / std::get<JitterExponential>(p.jitter).mean_ms)(rng);
    } else if (std::holds_alternative<JitterLognormal>(p.jitter)) {
        const auto& ln = std::get<JitterLognormal>(p.jitter);
        owd += std::lognormal_distribution<double>(ln.mu, ln.sigma)(rng);
    }
    if (nf.access == AccessType::WIFI) owd += wifi_access_delay(p.wifi, rng);
    if (nt.access == AccessType::WIFI) owd += wifi_access_delay(p.wifi, rng);
    return owd;
}

/// Noiseless propagation floor for the pair (no jitter, no access delay, no
/// asymmetry skew); used for ground-truth baselines and oracles.
inline double propagation_floor_ms(const SimTopology& topo, const std::string& a,
                                   const std::string& b) {
    const PairLink link = pair_link(topo, a, b);
    const double dist = geo::great_circle_km(topo.node(a).location, topo.node(b).location);
    return link.circuitous * dist / (topo.params.speed_factor * kLightSpeedKmPerMs);
}

struct AdversaryNone {};
struct AdversaryDelayInflate {
    // leg selector: origin/destination id pairs to inflate
    std::vector<std::pair<std::string, std::string>> target_legs;
    double added_ms = 0.0;
};
enum class PuzzleStrategy { SOLVE_LOCALLY, FORWARD_TO_CLIENT };
struct AdversaryMiddleboxRelay {
    std::string middlebox_node;
    std::string client_true_node;
    PuzzleStrategy strategy = PuzzleStrategy::SOLVE_LOCALLY;
    int concurrent_clients = 1;
    int cores = 1;
    double core_hash_rate = 1000.0;  // hash attempts per ms
};
using AdversaryConfig = std::variant<AdversaryNone, AdversaryDelayInflate, AdversaryMiddleboxRelay>;

}  // namespace geoverity::netsim
