#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mimic/abm/config.hpp"

namespace mimic::abm {

struct DayStats {
    int day = 0;
    int64_t messages = 0;
    std::array<int64_t, 3> by_type{0, 0, 0}; // limit, market, cancel
    std::vector<int64_t> by_group;
    int64_t skipped_wakes = 0; // wakes that produced no recorded message
    int64_t trades = 0;
    int64_t traded_volume = 0;
    int64_t min_mid2 = 0;
    int64_t max_mid2 = 0;
    int64_t final_mid2 = 0;
};

struct SimResult {
    std::vector<DayStats> days;
};

/// Runs the configured simulation, writing per-day message/book CSV pairs,
/// a config echo (config.json) and run statistics (summary.json) to out_dir.
SimResult run_simulation(const SimConfig& cfg, const std::string& out_dir);

/// Re-applies a stored day's message file through a fresh book and checks the
/// regenerated book rows against the stored book file byte-for-byte.
/// On mismatch returns false and, when `error` is non-null, describes the
/// first differing row.
bool replay_day(const std::string& data_dir, int day, std::string* error = nullptr);

} // namespace mimic::abm
