#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geoverity/geometry.hpp"
#include "geoverity/mp.hpp"

namespace geoverity::cpv {

using geometry::ConditionOutcome;
using geometry::EpsilonMode;
using geometry::OwdEstimate;

/// The three calibrated decision parameters.
struct CalibrationParams {
    double epsilon_ms = 10.0;  // live-demo default
    int n = 8;                 // iterations per verification, live-demo default
    double tau = 0.7;          // fraction of valid iterations that must pass

    CalibrationParams() = default;
    CalibrationParams(double eps, int n_, double tau_) : epsilon_ms(eps), n(n_), tau(tau_) {
        if (n < 1) throw std::invalid_argument("CalibrationParams: n >= 1");
        if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("CalibrationParams: tau in (0,1]");
        if (epsilon_ms < 0.0) throw std::invalid_argument("CalibrationParams: epsilon >= 0");
    }
};

enum class Decision { ACCEPTED, REJECTED, INDETERMINATE };

struct IterationRecord {
    OwdEstimate estimate;
    ConditionOutcome outcome = ConditionOutcome::INVALID;
};

struct VerificationResult {
    Decision decision = Decision::INDETERMINATE;
    int iterations_total = 0;
    int iterations_valid = 0;
    int iterations_passed = 0;
    std::vector<IterationRecord> per_iteration;
};

/// Fold per-iteration outcomes into the tau-majority decision. The vote
/// denominator is valid iterations; fewer than ceil(n/2) valid iterations is
/// INDETERMINATE (network failure, not location fraud), so dropped rounds can
/// never push toward acceptance.
inline VerificationResult tally(const std::vector<IterationRecord>& records,
                                const CalibrationParams& params) {
    VerificationResult result;
    result.per_iteration = records;
    result.iterations_total = static_cast<int>(records.size());
    for (const auto& rec : records) {
        if (rec.outcome == ConditionOutcome::INVALID) continue;
        ++result.iterations_valid;
        if (rec.outcome == ConditionOutcome::PASS) ++result.iterations_passed;
    }
    const int validity_floor = (params.n + 1) / 2;
    if (result.iterations_valid < validity_floor) {
        result.decision = Decision::INDETERMINATE;
        return result;
    }
    const double fraction =
        static_cast<double>(result.iterations_passed) / static_cast<double>(result.iterations_valid);
    result.decision = fraction >= params.tau ? Decision::ACCEPTED : Decision::REJECTED;
    return result;
}

/// One MP round as supplied by the session layer: the solved estimate, or
/// nullopt when the round was incomplete or tampered.
using RoundProvider = std::function<std::optional<OwdEstimate>(int iteration_index)>;

/// Run n iterations against the triangle's baseline delays and vote.
/// Inter-round spacing is the session layer's concern (simulated or real);
/// this engine only sequences and decides.
inline VerificationResult verify_presence(const RoundProvider& next_round,
                                          const geometry::TriangleSpec& triangle,
                                          const CalibrationParams& params,
                                          EpsilonMode mode = EpsilonMode::PER_SIDE_SLACK) {
    std::vector<IterationRecord> records;
    records.reserve(static_cast<std::size_t>(params.n));
    for (int i = 0; i < params.n; ++i) {
        IterationRecord rec;
        auto est = next_round(i);
        if (est) {
            rec.estimate = *est;
            rec.outcome = geometry::cpv_condition(*est, triangle.baseline_ms, params.epsilon_ms, mode);
        } else {
            rec.outcome = ConditionOutcome::INVALID;
        }
        records.push_back(rec);
    }
    return tally(records, params);
}

/// Recorded MP rounds for one ground-truth node, with the baselines in effect
/// when they were taken.
struct GroundTruthTrace {
    std::string node_id;
    bool inside = false;
    std::array<double, 3> baseline_ms{};
    std::vector<std::optional<OwdEstimate>> rounds;
};

struct CalibrationGrid {
    std::vector<double> epsilons;  // default 0..30 ms step 1
    std::vector<double> taus;      // default 0.5..0.9 step 0.1
    std::vector<int> ns;           // default {10, 20, 50, 100}

    static CalibrationGrid defaults() {
        CalibrationGrid g;
        for (int e = 0; e <= 30; ++e) g.epsilons.push_back(e);
        for (int t = 5; t <= 9; ++t) g.taus.push_back(t / 10.0);
        g.ns = {10, 20, 50, 100};
        return g;
    }
};

struct CalibrationFailed : std::runtime_error {
    int best_false_rejects;
    int best_false_accepts;
    CalibrationFailed(int fr, int fa)
        : std::runtime_error("calibration: no parameter combination separates ground truth (best FR=" +
                             std::to_string(fr) + ", FA=" + std::to_string(fa) + ")"),
          best_false_rejects(fr),
          best_false_accepts(fa) {}
};

namespace detail {

inline Decision replay(const GroundTruthTrace& trace, const CalibrationParams& params,
                       EpsilonMode mode) {
    std::vector<IterationRecord> records;
    const int limit = std::min<int>(params.n, static_cast<int>(trace.rounds.size()));
    for (int i = 0; i < limit; ++i) {
        IterationRecord rec;
        if (trace.rounds[static_cast<std::size_t>(i)]) {
            rec.estimate = *trace.rounds[static_cast<std::size_t>(i)];
            rec.outcome =
                geometry::cpv_condition(rec.estimate, trace.baseline_ms, params.epsilon_ms, mode);
        }
        records.push_back(rec);
    }
    return tally(records, params).decision;
}

}  // namespace detail

/// Grid search over (epsilon, n, tau): pick the combination with zero false
/// rejects on inside ground-truth nodes (and zero false accepts on outside
/// nodes, when supplied). Ties break toward smaller epsilon, then larger tau,
/// then smaller n.
inline CalibrationParams calibrate(const std::vector<GroundTruthTrace>& traces,
                                   const CalibrationGrid& grid = CalibrationGrid::defaults(),
                                   EpsilonMode mode = EpsilonMode::PER_SIDE_SLACK) {
    bool has_inside = false;
    for (const auto& t : traces) has_inside |= t.inside;
    if (!has_inside)
        throw std::invalid_argument("calibrate: at least one inside ground-truth node required");

    std::optional<CalibrationParams> best;
    int best_fr = std::numeric_limits<int>::max();
    int best_fa = std::numeric_limits<int>::max();
    for (double eps : grid.epsilons) {
        for (int n : grid.ns) {
            for (double tau : grid.taus) {
                CalibrationParams candidate(eps, n, tau);
                int fr = 0, fa = 0;
                for (const auto& trace : traces) {
                    const Decision d = detail::replay(trace, candidate, mode);
                    // INDETERMINATE replays are measurement failures, not
                    // location errors; they count toward neither rate.
                    if (trace.inside && d == Decision::REJECTED) ++fr;
                    if (!trace.inside && d == Decision::ACCEPTED) ++fa;
                }
                if (fr + fa < best_fr + best_fa) {
                    best_fr = fr;
                    best_fa = fa;
                }
                if (fr != 0 || fa != 0) continue;
                if (!best || eps < best->epsilon_ms ||
                    (eps == best->epsilon_ms && tau > best->tau) ||
                    (eps == best->epsilon_ms && tau == best->tau && n < best->n)) {
                    best = candidate;
                }
            }
        }
    }
    if (!best) throw CalibrationFailed(best_fr, best_fa);
    return *best;
}

struct ExperimentOutcome {
    bool true_inside = false;
    Decision decision = Decision::INDETERMINATE;
};

struct FaFrRates {
    std::optional<double> false_accept_rate;  // undefined when no outside nodes
    std::optional<double> false_reject_rate;  // undefined when no inside nodes
    int indeterminate = 0;
};

/// FA = accepted-but-outside / outside decided; FR = rejected-but-inside /
/// inside decided. INDETERMINATE outcomes are excluded from both denominators
/// and reported separately.
inline FaFrRates evaluate_fa_fr(const std::vector<ExperimentOutcome>& outcomes) {
    int inside_total = 0, outside_total = 0, fr = 0, fa = 0, indet = 0;
    for (const auto& o : outcomes) {
        if (o.decision == Decision::INDETERMINATE) {
            ++indet;
            continue;
        }
        if (o.true_inside) {
            ++inside_total;
            if (o.decision == Decision::REJECTED) ++fr;
        } else {
            ++outside_total;
            if (o.decision == Decision::ACCEPTED) ++fa;
        }
    }
    FaFrRates rates;
    rates.indeterminate = indet;
    if (outside_total > 0) rates.false_accept_rate = static_cast<double>(fa) / outside_total;
    if (inside_total > 0) rates.false_reject_rate = static_cast<double>(fr) / inside_total;
    return rates;
}

inline const char* to_string(Decision d) {
    switch (d) {
        case Decision::ACCEPTED: return "ACCEPTED";
        case Decision::REJECTED: return "REJECTED";
        default: return "INDETERMINATE";
    }
}

}  // namespace geoverity::cpv
