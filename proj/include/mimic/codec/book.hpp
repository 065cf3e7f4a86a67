#pragma once

#include <cstdint>
#include <vector>

#include "mimic/lob/book.hpp"

namespace mimic::codec {

/// Dense per-message book features: M best bid volumes (negative, best first),
/// M best ask volumes (positive, best first), then the clipped mid change.
/// Volumes saturate at +-999 like every other magnitude the model sees.
std::vector<int16_t> encode_book(const lob::BookSnapshot& snap, int M);

inline int16_t clip999(int64_t v) {
    if (v > 999) return 999;
    if (v < -999) return -999;
    return static_cast<int16_t>(v);
}

} // namespace mimic::codec
