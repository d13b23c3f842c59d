#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "geoverity/puzzle.hpp"

using namespace geoverity;

namespace {

crypto::Digest digest_of(const std::string& s) { return crypto::sha256(s); }

}  // namespace

TEST_CASE("puzzle round-trip at several difficulties") {
    std::mt19937_64 rng(1);
    const auto msg = digest_of("timestamp message");
    for (int k : {0, 1, 4, 8, 12}) {
        const auto spec = puzzle::puzzle_generate(msg, k, rng);
        const auto solved = puzzle::puzzle_solve(spec);
        CHECK(puzzle::puzzle_verify(spec, solved.solution, msg));
        if (k == 0) CHECK(solved.attempts == 1);  // zero-bit target: first try
    }
}

TEST_CASE("puzzle_generate freshness and validation") {
    std::mt19937_64 rng(2);
    const auto msg = digest_of("m");
    const auto s1 = puzzle::puzzle_generate(msg, 4, rng);
    const auto s2 = puzzle::puzzle_generate(msg, 4, rng);
    CHECK(s1.nonce != s2.nonce);
    CHECK(s1.binding == s2.binding);
    CHECK_THROWS_AS(puzzle::puzzle_generate(msg, -1, rng), std::invalid_argument);
    CHECK_THROWS_AS(puzzle::puzzle_generate(msg, 41, rng), std::invalid_argument);
}

TEST_CASE("puzzle_verify rejects binding mismatch and bit flips") {
    std::mt19937_64 rng(3);
    const auto msg = digest_of("original message");
    const auto other = digest_of("different message");
    int flip_accepts = 0;
    const int trials = 200;
    for (int i = 0; i < trials; ++i) {
        const auto spec = puzzle::puzzle_generate(msg, 8, rng);
        auto solved = puzzle::puzzle_solve(spec);
        REQUIRE(puzzle::puzzle_verify(spec, solved.solution, msg));
        // solution presented with a different message binding
        CHECK_FALSE(puzzle::puzzle_verify(spec, solved.solution, other));
        // flipped solution bit: acceptance probability ~2^-8 per trial
        auto flipped = solved.solution;
        flipped.bytes[static_cast<std::size_t>(i) % flipped.bytes.size()] ^= 0x01;
        if (puzzle::puzzle_verify(spec, flipped, msg)) ++flip_accepts;
    }
    CHECK(flip_accepts <= 5);  // expectation ~0.8 of 200; 5 is > 4 sigma
}

TEST_CASE("mean solve attempts track 2^k within 20%") {
    std::mt19937_64 rng(4);
    double prev_mean = 0.0;
    for (int k : {4, 6, 8}) {
        double total = 0.0;
        const int trials = k >= 8 ? 400 : 1200;
        for (int i = 0; i < trials; ++i) {
            const auto msg = digest_of("m" + std::to_string(k) + "/" + std::to_string(i));
            const auto spec = puzzle::puzzle_generate(msg, k, rng);
            total += static_cast<double>(puzzle::puzzle_solve(spec).attempts);
        }
        const double mean = total / trials;
        const double expected = std::pow(2.0, k);
        CHECK(mean > 0.8 * expected);
        CHECK(mean < 1.2 * expected);
        if (prev_mean > 0.0) {
            // doubling per unit difficulty: slope on the log scale, +-20%
            const double slope = std::log2(mean / prev_mean) / 2.0;  // steps of 2 bits
            CHECK(slope > 0.8);
            CHECK(slope < 1.2);
        }
        prev_mean = mean;
    }
}

TEST_CASE("middlebox queue stays stable under low load") {
    puzzle::MiddleboxParams p;
    p.clients = 1;
    p.difficulty = 8;             // ~256 attempts
    p.core_hash_rate = 10000.0;   // ~0.0256 ms service
    p.rounds = 50;
    p.seed = 9;
    const auto trace = puzzle::simulate_middlebox(p);
    REQUIRE(trace.size() == static_cast<std::size_t>(p.rounds) * 3);
    // arrival rate far below service rate: added delay is service time only
    const double mean_service = 256.0 / p.core_hash_rate;
    for (const auto& rec : trace) CHECK(rec.added_delay_ms < 50.0 * mean_service);
}

TEST_CASE("middlebox queue grows without bound when overloaded") {
    puzzle::MiddleboxParams p;
    p.clients = 40;
    p.difficulty = 12;          // ~4096 attempts
    p.core_hash_rate = 1000.0;  // ~4.1 ms service per puzzle
    p.cores = 1;
    p.rounds = 30;
    p.inter_round_ms = 300.0;
    p.seed = 10;
    // offered load: 40 clients * 3 puzzles / 300 ms = 0.4 puzzles/ms
    // capacity: 1 core / 4.1 ms = 0.244 puzzles/ms -> unstable
    const auto trace = puzzle::simulate_middlebox(p);
    double first_third = 0.0, last_third = 0.0;
    int nf = 0, nl = 0;
    for (const auto& rec : trace) {
        if (rec.round < p.rounds / 3) {
            first_third += rec.added_delay_ms;
            ++nf;
        } else if (rec.round >= 2 * p.rounds / 3) {
            last_third += rec.added_delay_ms;
            ++nl;
        }
    }
    CHECK(last_third / nl > 3.0 * (first_third / nf));
}

TEST_CASE("middlebox queue at load 0.5 stays finite") {
    puzzle::MiddleboxParams p;
    p.clients = 10;
    p.difficulty = 10;          // ~1024 attempts
    p.core_hash_rate = 1000.0;  // ~1.02 ms per puzzle
    p.cores = 1;
    p.rounds = 100;
    // offered load ~0.5: 30 puzzles * 1.024 ms of work per 61.5 ms round
    p.inter_round_ms = 61.5;
    p.seed = 11;
    const auto trace = puzzle::simulate_middlebox(p);
    double first_third = 0.0, last_third = 0.0;
    int nf = 0, nl = 0;
    for (const auto& rec : trace) {
        if (rec.round < p.rounds / 3) {
            first_third += rec.added_delay_ms;
            ++nf;
        } else if (rec.round >= 2 * p.rounds / 3) {
            last_third += rec.added_delay_ms;
            ++nl;
        }
    }
    // stable queue: no unbounded growth across the horizon
    CHECK(last_third / nl < 2.0 * (first_third / nf) + 5.0);
}

TEST_CASE("simulate_middlebox validates parameters and is deterministic") {
    puzzle::MiddleboxParams p;
    p.clients = 0;
    CHECK_THROWS_AS(puzzle::simulate_middlebox(p), std::invalid_argument);
    p.clients = 3;
    p.rounds = 5;
    const auto t1 = puzzle::simulate_middlebox(p);
    const auto t2 = puzzle::simulate_middlebox(p);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i)
        CHECK(t1[i].added_delay_ms == t2[i].added_delay_ms);
}
