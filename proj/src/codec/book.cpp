#include "mimic/codec/book.hpp"

namespace mimic::codec {

std::vector<int16_t> encode_book(const lob::BookSnapshot& snap, int M) {
    std::vector<int16_t> out(2 * static_cast<size_t>(M) + 1, 0);
    int bid_rank = 0, ask_rank = 0;
    for (const auto& lvl : snap.levels) {
        if (lvl.volume < 0) {
            if (bid_rank < M) out[static_cast<size_t>(bid_rank++)] = clip999(lvl.volume);
        } else if (lvl.volume > 0) {
            if (ask_rank < M) out[static_cast<size_t>(M + ask_rank++)] = clip999(lvl.volume);
        }
    }
    out.back() = clip999(snap.mid_change);
    return out;
}

} // namespace mimic::codec
