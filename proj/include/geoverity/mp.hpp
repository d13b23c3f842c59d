#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <stdexcept>

#include "geoverity/geometry.hpp"

namespace geoverity::mp {

using geometry::OwdEstimate;

enum class VerifierId : std::uint16_t { A = 0, B = 1, C = 2 };

inline VerifierId verifier_from_index(int i) {
    if (i < 0 || i > 2) throw std::out_of_range("verifier index");
    return static_cast<VerifierId>(i);
}

/// One relayed timestamp as seen by the observing verifier.
struct RelayObservation {
    VerifierId origin;
    VerifierId observer;
    double send_ts_ms = 0.0;
    double recv_ts_ms = 0.0;
    double clock_offset_correction_ms = 0.0;
    std::uint32_t seq = 0;

    double corrected_delay_ms() const {
        return recv_ts_ms - send_ts_ms + clock_offset_correction_ms;
    }
    bool valid() const { return origin != observer && corrected_delay_ms() >= 0.0; }
};

/// The six relayed delays of one MP round: origin -> client -> observer.
struct PairwiseDelaySet {
    double AtB = 0.0;
    double AtC = 0.0;
    double BtA = 0.0;
    double BtC = 0.0;
    double CtA = 0.0;
    double CtB = 0.0;
};

struct PairSums {
    double ab = 0.0;  // a + b = min(AtB, BtA)
    double ac = 0.0;  // a + c = min(AtC, CtA)
    double bc = 0.0;  // b + c = min(BtC, CtB)
};

/// Discard the larger relay direction of each verifier pair.
inline PairSums min_pairs(const PairwiseDelaySet& set) {
    return {std::min(set.AtB, set.BtA), std::min(set.AtC, set.CtA), std::min(set.BtC, set.CtB)};
}

/// Solve the three pair-sum equations for the per-leg smaller OWDs. A negative
/// component marks the estimate invalid; clamping would fabricate a shorter
/// delay, which favors an attacker.
inline OwdEstimate solve_owd(const PairSums& sums) {
    OwdEstimate est;
    est.a = (sums.ab + sums.ac - sums.bc) / 2.0;
    est.b = (sums.ab + sums.bc - sums.ac) / 2.0;
    est.c = (sums.ac + sums.bc - sums.ab) / 2.0;
    est.valid = est.a >= 0.0 && est.b >= 0.0 && est.c >= 0.0;
    return est;
}

enum class RoundStatus { OK, INCOMPLETE, TAMPERED };

struct RoundResult {
    RoundStatus status = RoundStatus::INCOMPLETE;
    PairwiseDelaySet delays;  // meaningful only when status == OK
};

/// What a round needs from the transport: deliver origin's timestamp through
/// the client to one observer and report the corrected relay delay.
/// nullopt = lost or late (timeout). A transport detecting an integrity
/// failure throws TamperedError.
struct TamperedError : std::runtime_error {
    TamperedError() : std::runtime_error("relayed message failed integrity check") {}
};

using RelayFn =
    std::function<std::optional<double>(VerifierId origin, VerifierId observer, std::uint32_t seq)>;

/// Drive one MP round in fixed A -> B -> C turn order. Each origin's
/// timestamp is relayed to both non-origin verifiers. Any lost relay makes
/// the round INCOMPLETE; any integrity failure aborts it as TAMPERED.
inline RoundResult run_mp_round(const RelayFn& relay, std::uint32_t iteration_index) {
    RoundResult result;
    std::array<double*, 6> slots{&result.delays.AtB, &result.delays.AtC, &result.delays.BtA,
                                 &result.delays.BtC, &result.delays.CtA, &result.delays.CtB};
    constexpr std::array<std::pair<VerifierId, VerifierId>, 6> legs{{
        {VerifierId::A, VerifierId::B},
        {VerifierId::A, VerifierId::C},
        {VerifierId::B, VerifierId::A},
        {VerifierId::B, VerifierId::C},
        {VerifierId::C, VerifierId::A},
        {VerifierId::C, VerifierId::B},
    }};
    for (std::size_t i = 0; i < legs.size(); ++i) {
        std::optional<double> delay;
        try {
            delay = relay(legs[i].first, legs[i].second, iteration_index);
        } catch (const TamperedError&) {
            result.status = RoundStatus::TAMPERED;
            return result;
        }
        if (!delay || *delay < 0.0) {
            result.status = RoundStatus::INCOMPLETE;
            return result;
        }
        *slots[i] = *delay;
    }
    result.status = RoundStatus::OK;
    return result;
}

/// Convenience: full round -> estimate pipeline. nullopt when the round did
/// not complete.
inline std::optional<OwdEstimate> estimate_from_round(const RoundResult& round) {
    if (round.status != RoundStatus::OK) return std::nullopt;
    return solve_owd(min_pairs(round.delays));
}

}  // namespace geoverity::mp
