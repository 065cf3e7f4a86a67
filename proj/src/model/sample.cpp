#include "mimic/model/sample.hpp"

#include <algorithm>
#include <cstring>

#include "mimic/codec/vocab.hpp"

namespace mimic::model {

namespace {

bool is_target(const codec::DatasetMeta& m, TargetSpec t) {
    return t.kind == TargetSpec::Group
               ? m.group_id == t.id
               : m.agent_id == static_cast<int32_t>(t.id);
}

} // namespace

std::vector<uint32_t> list_targets(const codec::Dataset& ds, TargetSpec target,
                                   std::size_t lm, uint32_t day_begin,
                                   uint32_t day_end) {
    std::vector<uint32_t> out;
    for (const auto& d : ds.days()) {
        if (d.day < static_cast<int>(day_begin) || d.day >= static_cast<int>(day_end))
            continue;
        // need lm-1 same-day predecessors
        for (int64_t i = d.begin + static_cast<int64_t>(lm) - 1; i < d.end; ++i)
            if (is_target(ds.meta(i), target)) out.push_back(static_cast<uint32_t>(i));
    }
    return out;
}

std::vector<uint32_t> subsample_evenly(const std::vector<uint32_t>& in,
                                       std::size_t cap) {
    if (in.size() <= cap || cap == 0) return in;
    std::vector<uint32_t> out;
    out.reserve(cap);
    // pick floor(k * n / cap) for k = 0..cap-1: even coverage, no repeats
    for (std::size_t k = 0; k < cap; ++k) out.push_back(in[k * in.size() / cap]);
    return out;
}

void materialize_sample(const codec::Dataset& ds, uint32_t target_index,
                        std::size_t lm, TargetSpec target, Sample& out) {
    constexpr int TPM = codec::pos::TOKENS_PER_MESSAGE;
    const int64_t first = static_cast<int64_t>(target_index) - static_cast<int64_t>(lm) + 1;
    out.tokens.resize(lm * TPM);
    std::memcpy(out.tokens.data(), ds.tokens(first),
                lm * TPM * sizeof(uint16_t));
    for (std::size_t m = 0; m < lm; ++m)
        out.tokens[m * TPM + codec::pos::TARGET] =
            is_target(ds.meta(first + static_cast<int64_t>(m)), target)
                ? codec::vocab::TARGET_SELF
                : codec::vocab::TARGET_OTHER;
    out.books = ds.book(first);
    out.target_index = target_index;
    out.mask_pos = 0;
    out.label = 0;
}

void mask_sample_at(Sample& s, std::size_t lm, int message_pos) {
    constexpr int TPM = codec::pos::TOKENS_PER_MESSAGE;
    const std::size_t flat = (lm - 1) * TPM + static_cast<std::size_t>(message_pos);
    s.mask_pos = flat;
    s.label = s.tokens[flat];
    s.tokens[flat] = codec::vocab::MASK;
    std::fill(s.tokens.begin() + flat + 1, s.tokens.end(), codec::vocab::PAD_HIDDEN);
}

void mask_sample(Sample& s, std::size_t lm, util::Rng& rng) {
    const int pick = static_cast<int>(rng.uniform_int(codec::pos::MASKABLE_COUNT));
    mask_sample_at(s, lm, codec::pos::MASKABLE[pick]);
}

void set_final_token(Sample& s, std::size_t lm, int message_pos, uint16_t id) {
    s.tokens[(lm - 1) * codec::pos::TOKENS_PER_MESSAGE +
             static_cast<std::size_t>(message_pos)] = id;
}

} // namespace mimic::model
