#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <queue>
#include <random>
#include <stdexcept>
#include <vector>

#include "geoverity/crypto.hpp"

namespace geoverity::puzzle {

inline constexpr int kMaxDifficulty = 40;

/// Proof-of-work challenge bound to one timestamp message.
struct PuzzleSpec {
    std::array<std::uint8_t, 16> nonce{};
    int difficulty = 0;  // required leading zero bits
    crypto::Digest binding{};  // digest of the accompanying timestamp message
};

struct PuzzleSolution {
    std::vector<std::uint8_t> bytes;
};

namespace detail {

inline crypto::Digest evaluate(const PuzzleSpec& spec, const PuzzleSolution& sol) {
    std::vector<std::uint8_t> buf;
    buf.reserve(spec.nonce.size() + spec.binding.size() + sol.bytes.size());
    buf.insert(buf.end(), spec.nonce.begin(), spec.nonce.end());
    buf.insert(buf.end(), spec.binding.begin(), spec.binding.end());
    buf.insert(buf.end(), sol.bytes.begin(), sol.bytes.end());
    return crypto::sha256(buf);
}

}  // namespace detail

/// Fresh challenge for a message digest. Nonce randomness comes from the
/// caller's RNG so simulated runs stay reproducible.
template <typename Rng>
PuzzleSpec puzzle_generate(const crypto::Digest& message_digest, int difficulty, Rng& rng) {
    if (difficulty < 0 || difficulty > kMaxDifficulty)
        throw std::invalid_argument("puzzle difficulty out of [0, 40]");
    PuzzleSpec spec;
    spec.difficulty = difficulty;
    spec.binding = message_digest;
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : spec.nonce) b = static_cast<std::uint8_t>(byte(rng));
    return spec;
}

inline bool puzzle_verify(const PuzzleSpec& spec, const PuzzleSolution& sol,
                          const crypto::Digest& message_digest) {
    if (spec.binding != message_digest) return false;
    return crypto::leading_zero_bits(detail::evaluate(spec, sol)) >= spec.difficulty;
}

struct SolveResult {
    PuzzleSolution solution;
    std::uint64_t attempts = 0;
};

/// Brute-force search over an 8-byte little-endian counter. The attempt cap
/// 2^(k+8) makes a miss astronomically unlikely; hitting it signals
/// misconfiguration.
inline SolveResult puzzle_solve(const PuzzleSpec& spec) {
    const std::uint64_t cap = 1ull << std::min(62, spec.difficulty + 8);
    PuzzleSolution sol;
    sol.bytes.resize(8);
    for (std::uint64_t counter = 0; counter < cap; ++counter) {
        for (int i = 0; i < 8; ++i)
            sol.bytes[static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>((counter >> (8 * i)) & 0xff);
        if (crypto::leading_zero_bits(detail::evaluate(spec, sol)) >= spec.difficulty)
            return {sol, counter + 1};
    }
    throw std::runtime_error("puzzle_solve: attempt cap exceeded (misconfigured difficulty?)");
}

struct MiddleboxParams {
    int clients = 1;
    int difficulty = 8;
    int cores = 1;
    double core_hash_rate = 1000.0;  // hash attempts per ms
    int rounds = 8;
    double inter_round_ms = 300.0;
    std::uint64_t seed = 1;
};

struct QueueDelayRecord {
    int round = 0;
    int client_id = 0;
    int turn = 0;                 // verifier turn within the round (0..2)
    double added_delay_ms = 0.0;  // queueing wait + puzzle service time
};

/// Multi-server FCFS queue of puzzle solves at a relaying middlebox. Each
/// round every client hands the middlebox three puzzles (one per verifier
/// turn); service time per puzzle is geometric with mean 2^k attempts.
/// One record per relayed message, in arrival order.
inline std::vector<QueueDelayRecord> simulate_middlebox(const MiddleboxParams& p) {
    if (p.clients < 1 || p.cores < 1 || p.rounds < 1 || p.core_hash_rate <= 0.0 ||
        p.inter_round_ms <= 0.0 || p.difficulty < 0)
        throw std::invalid_argument("simulate_middlebox: parameters must be positive");

    std::mt19937_64 rng(p.seed);
    const double success_p = std::pow(0.5, p.difficulty);
    std::geometric_distribution<std::uint64_t> attempts_minus_one(success_p);

    // core free-times, min-heap
    std::priority_queue<double, std::vector<double>, std::greater<>> cores;
    for (int i = 0; i < p.cores; ++i) cores.push(0.0);

    std::vector<QueueDelayRecord> out;
    out.reserve(static_cast<std::size_t>(p.clients) * p.rounds * 3);
    const double turn_spacing = p.inter_round_ms / 3.0;
    for (int round = 0; round < p.rounds; ++round) {
        for (int turn = 0; turn < 3; ++turn) {
            const double arrival = round * p.inter_round_ms + turn * turn_spacing;
            for (int client = 0; client < p.clients; ++client) {
                const double service =
                    static_cast<double>(attempts_minus_one(rng) + 1) / p.core_hash_rate;
                double start = cores.top();
                cores.pop();
                start = std::max(start, arrival);
                const double done = start + service;
                cores.push(done);
                out.push_back({round, client, turn, done - arrival});
            }
        }
    }
    return out;
}

}  // namespace geoverity::puzzle
