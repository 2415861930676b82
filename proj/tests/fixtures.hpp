#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sentinel/ids.hpp"
#include "sentinel/trace.hpp"

namespace sentinel::fixtures {

// Templated synthetic activity against one mock application contract:
// regular transfer/swap shapes over small pools of addresses, selectors,
// and amounts. Structure and vocabulary are intentionally repetitive so a
// small language model can learn them quickly.
struct SynthConfig {
    std::uint64_t seed = 1;
    int benign_count = 200;
    bool with_structural_anomaly = false; // adversarial deep-call variant
    bool with_length_anomaly = false;     // adversarial 10x-long variant
};

std::string router_address();

std::vector<RawTrace> synthetic_corpus(const SynthConfig& config);

// A single structurally mangled trace built from the same token pools.
RawTrace structural_anomaly(std::uint64_t seed);

// A benign-shaped trace with its call body repeated ~10 times.
RawTrace length_anomaly(std::uint64_t seed);

// Synthetic per-contract score sheets shaped like a large evaluation run:
// 124 contracts spread over the four dataset-size buckets with a few
// adversarial transactions planted at assorted ranks.
std::vector<ScoredTx> evaluation_fixture(std::uint64_t seed);

}  // namespace sentinel::fixtures
