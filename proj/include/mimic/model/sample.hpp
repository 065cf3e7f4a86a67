#pragma once

#include <cstdint>
#include <vector>

#include "mimic/codec/dataset.hpp"
#include "mimic/util/rng.hpp"

namespace mimic::model {

// Whose actions a model imitates: every action by the group (the training
// regime used throughout) or by one specific agent.
struct TargetSpec {
    enum Kind { Group, Agent } kind = Group;
    uint16_t id = 0;
};

// One training/evaluation sample: a window of `lm` consecutive same-day
// messages whose final message is an action by the imitated party. Tokens
// are copied (the target-flag token is stamped per message, and masking
// mutates them); book rows stay pointers into the dataset.
struct Sample {
    std::vector<uint16_t> tokens;   // [lm * 23]
    const int16_t* books = nullptr; // lm contiguous dataset rows
    uint32_t target_index = 0;      // dataset index of the final message
    std::size_t mask_pos = 0;       // flattened; set by masking
    uint16_t label = 0;             // true id at mask_pos; set by masking
};

// Dataset indices of qualifying final messages on days in [day_begin,
// day_end): attributed to the target and preceded by at least lm-1 same-day
// messages. Returned in dataset order.
std::vector<uint32_t> list_targets(const codec::Dataset& ds, TargetSpec target,
                                   std::size_t lm, uint32_t day_begin,
                                   uint32_t day_end);

// Deterministic even-stride subsample down to at most `cap` entries.
std::vector<uint32_t> subsample_evenly(const std::vector<uint32_t>& in,
                                       std::size_t cap);

void materialize_sample(const codec::Dataset& ds, uint32_t target_index,
                        std::size_t lm, TargetSpec target, Sample& out);

// Masks one uniformly chosen maskable position of the final message and
// hides every later position in the flattened sequence.
void mask_sample(Sample& s, std::size_t lm, util::Rng& rng);

// Masks a specific final-message position (0..22); evaluation entry point.
void mask_sample_at(Sample& s, std::size_t lm, int message_pos);

// Overwrites a final-message token in place (evaluation-time conditioning).
void set_final_token(Sample& s, std::size_t lm, int message_pos, uint16_t id);

} // namespace mimic::model
