#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "mimic/codec/vocab.hpp"

namespace mimic::codec {

enum class MsgType : uint8_t { limit = 0, market = 1, cancel = 2 };
enum class Dir : uint8_t { buy = 0, sell = 1 };

/// One recorded action.  Cancellations carry reference fields describing the
/// original order (as submitted); everything else leaves them NA.  The
/// bookkeeping ids live in the files but are never tokenized.
struct MessageRecord {
    MsgType type = MsgType::limit;
    Dir direction = Dir::buy;
    bool has_price = true; // false for market orders (price is NA)
    int64_t price = 0;     // ticks
    int64_t size = 0;
    int64_t time_s = 0;
    int64_t time_ns = 0;
    int64_t dt_s = 0; // since previous recorded message
    int64_t dt_ns = 0;
    bool has_ref = false;
    int64_t ref_price = 0;
    int64_t ref_size = 0;
    int64_t ref_time_s = 0;
    int64_t ref_time_ns = 0;
    bool target_self = false;

    uint64_t order_id = 0;
    int32_t agent_id = -1;
    int32_t group_id = -1;

    bool operator==(const MessageRecord&) const = default;
};

using TokenArray = std::array<uint16_t, pos::TOKENS_PER_MESSAGE>;

class CodecError : public std::runtime_error {
public:
    CodecError(int position, const std::string& what)
        : std::runtime_error("token position " + std::to_string(position) + ": " + what),
          position_(position) {}
    int position() const { return position_; }

private:
    int position_;
};

struct ClipCounts {
    uint64_t price = 0;
    uint64_t size = 0;
    uint64_t ref_price = 0;
    uint64_t ref_size = 0;
    uint64_t dt = 0;
    uint64_t messages = 0; // messages with at least one price/size clip

    ClipCounts& operator+=(const ClipCounts& o) {
        price += o.price;
        size += o.size;
        ref_price += o.ref_price;
        ref_size += o.ref_size;
        dt += o.dt;
        messages += o.messages;
        return *this;
    }
};

/// Tokenize one message against the paired pre-message 2x-mid.  Out-of-range
/// prices and sizes saturate at 999 and are tallied in `clips` when provided.
TokenArray encode_message(const MessageRecord& msg, int64_t mid2, ClipCounts* clips = nullptr);

/// Inverse of encode_message up to clipping: decode(encode(m)) == clip(m).
/// Bookkeeping ids are not recoverable from tokens and stay at defaults.
MessageRecord decode_message(const TokenArray& tokens, int64_t mid2);

/// clip(m) as the codec applies it; used by round-trip property tests.
MessageRecord clip_message(const MessageRecord& msg, int64_t mid2);

} // namespace mimic::codec
