#pragma once

#include <cstdint>
#include <string>

#include "mimic/util/hash.hpp"

namespace mimic::codec {

/// Fixed token vocabulary: disjoint contiguous ID blocks, 3012 ids total.
/// All time-like fields share one base-1000 digit block.
namespace vocab {

inline constexpr uint16_t PAD_HIDDEN = 0;
inline constexpr uint16_t MASK = 1;
inline constexpr uint16_t NA = 2;

inline constexpr uint16_t TYPE_BASE = 3;       // limit, market, cancel
inline constexpr uint16_t TYPE_COUNT = 3;
inline constexpr uint16_t DIR_BASE = 6;        // buy, sell
inline constexpr uint16_t DIR_COUNT = 2;
inline constexpr uint16_t SIGN_BASE = 8;       // negative, non-negative
inline constexpr uint16_t SIGN_COUNT = 2;
inline constexpr uint16_t PRICE_MAG_BASE = 10; // 0..999 ticks from mid
inline constexpr uint16_t PRICE_MAG_COUNT = 1000;
inline constexpr uint16_t SIZE_BASE = 1010;    // 0..999 shares
inline constexpr uint16_t SIZE_COUNT = 1000;
inline constexpr uint16_t DIGIT_BASE = 2010;   // base-1000 digit, 0..999
inline constexpr uint16_t DIGIT_COUNT = 1000;
inline constexpr uint16_t TARGET_BASE = 3010;  // self, other
inline constexpr uint16_t TARGET_COUNT = 2;

inline constexpr uint16_t V = 3012;

inline constexpr uint16_t TARGET_SELF = TARGET_BASE;
inline constexpr uint16_t TARGET_OTHER = TARGET_BASE + 1;

inline constexpr bool in_block(uint16_t id, uint16_t base, uint16_t count) {
    return id >= base && id < base + count;
}

/// Stable identity of the block table; stored in dataset manifests and
/// checkpoints so mismatched artifacts refuse to combine.
std::string table_csv();
uint64_t table_hash();

} // namespace vocab

/// Canonical token positions within one 23-token message.
namespace pos {
inline constexpr int TYPE = 0;
inline constexpr int DIRECTION = 1;
inline constexpr int PRICE_SIGN = 2;
inline constexpr int PRICE_MAG = 3;
inline constexpr int SIZE = 4;
inline constexpr int DT_S = 5;
inline constexpr int DT_NS = 6;       // 3 digits, most significant first
inline constexpr int T_S = 9;         // 2 digits
inline constexpr int T_NS = 11;       // 3 digits
inline constexpr int REF_PRICE_SIGN = 14;
inline constexpr int REF_PRICE_MAG = 15;
inline constexpr int REF_SIZE = 16;
inline constexpr int REF_T_S = 17;    // 2 digits
inline constexpr int REF_T_NS = 19;   // 3 digits
inline constexpr int TARGET = 22;
inline constexpr int TOKENS_PER_MESSAGE = 23;

/// Positions eligible for training-time masking: everything except the
/// time-like tokens and the target flag.
inline constexpr int MASKABLE[] = {TYPE, DIRECTION, PRICE_SIGN, PRICE_MAG,
                                   SIZE, REF_PRICE_SIGN, REF_PRICE_MAG, REF_SIZE};
inline constexpr int MASKABLE_COUNT = 8;
} // namespace pos

} // namespace mimic::codec
