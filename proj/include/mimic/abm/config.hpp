#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mimic::abm {

enum class Archetype : uint8_t {
    market_maker,
    market_taker,
    fundamentalist,
    chartist_momentum,
    chartist_reversion,
    noise,
};

const char* archetype_name(Archetype a);
Archetype archetype_from_name(const std::string& name);

/// Categorical distribution over integer values (sizes, offsets, ...).
struct Categorical {
    std::vector<int64_t> values;
    std::vector<double> probs;
};

struct AgentGroupSpec {
    int group_id = 0;
    Archetype archetype = Archetype::noise;
    int count = 0;
    double wake_rate = 0.0; // Poisson intensity, events per second per agent
    std::array<double, 3> action_probs{0, 0, 0}; // limit, market, cancel
    Categorical size_dist;
    double offset_geom_p = 0.5; // limit price offset ~ Geometric(p) on {0,1,...}

    // archetype-specific knobs (unused ones stay zero)
    int window = 0;               // chartist: lookback in recorded messages
    double threshold = 0.0;       // fundamentalist: act when |mid - F| exceeds
    int64_t half_spread = 0;      // market maker: quote distance from mid, ticks
    int64_t requote_tolerance = 0; // market maker: allowed drift before re-quote
    double switch_prob = 0.0;     // market taker: probability the sign flips
};

struct SeedQuote {
    bool is_bid = true;
    int64_t price = 0;
    int64_t size = 0;
};

struct SimConfig {
    uint64_t seed = 42;
    int days = 1;
    int64_t day_length_s = 23'400;
    int M = 10; // book snapshot depth per side
    int64_t initial_price = 10'000;
    double fundamental_step_std = 0.2; // ticks per sqrt(second)
    std::vector<SeedQuote> initial_book;
    std::vector<AgentGroupSpec> groups;

    int total_agents() const;
    /// Throws std::invalid_argument with a description when malformed.
    void validate() const;

    std::string to_json() const;
    static SimConfig from_json(const std::string& text);
    static SimConfig from_file(const std::string& path);
    static SimConfig defaults();

    /// Hash of the canonical JSON form; stamps output directories.
    uint64_t hash() const;
};

} // namespace mimic::abm
