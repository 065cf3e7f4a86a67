#include "mimic/codec/message.hpp"

#include <cstdlib>

namespace mimic::codec {

namespace {

using namespace vocab;

struct PriceTokens {
    uint16_t sign;
    uint16_t mag;
    bool clipped;
};

// Price differences are kept in 2x units (2*price - mid2) so odd spreads stay
// integral; the magnitude token is the tick distance rounded half away from mid.
PriceTokens price_tokens(int64_t price, int64_t mid2) {
    const int64_t d2 = 2 * price - mid2;
    const int64_t a = std::abs(d2);
    int64_t mag = (a + 1) / 2;
    const bool clipped = mag > 999;
    if (clipped) mag = 999;
    return {static_cast<uint16_t>(d2 < 0 ? SIGN_BASE : SIGN_BASE + 1),
            static_cast<uint16_t>(PRICE_MAG_BASE + mag), clipped};
}

int64_t price_from_tokens(uint16_t sign_tok, uint16_t mag_tok, int64_t mid2) {
    const int64_t mag = mag_tok - PRICE_MAG_BASE;
    const int64_t parity = mid2 & 1;
    const int64_t a = std::max<int64_t>(0, 2 * mag - parity);
    const int64_t d2 = sign_tok == SIGN_BASE ? -a : a;
    return (mid2 + d2) / 2;
}

void write_digits(TokenArray& t, int at, int64_t value, int digits) {
    for (int i = digits - 1; i >= 0; --i) {
        t[static_cast<size_t>(at + i)] = static_cast<uint16_t>(DIGIT_BASE + value % 1000);
        value /= 1000;
    }
}

int64_t read_digits(const TokenArray& t, int at, int digits) {
    int64_t v = 0;
    for (int i = 0; i < digits; ++i) {
        const uint16_t tok = t[static_cast<size_t>(at + i)];
        if (!in_block(tok, DIGIT_BASE, DIGIT_COUNT))
            throw CodecError(at + i, "expected time digit");
        v = v * 1000 + (tok - DIGIT_BASE);
    }
    return v;
}

uint16_t size_token(int64_t size, bool& clipped) {
    clipped = size > 999;
    return static_cast<uint16_t>(SIZE_BASE + (clipped ? 999 : size));
}

void check_time(int64_t s, int64_t ns, const char* what) {
    if (s < 0 || ns < 0 || ns > 999'999'999 || s > 999'999)
        throw std::invalid_argument(std::string(what) + " out of range");
}

} // namespace

TokenArray encode_message(const MessageRecord& msg, int64_t mid2, ClipCounts* clips) {
    if (msg.size < 1) throw std::invalid_argument("message size must be >= 1");
    check_time(msg.time_s, msg.time_ns, "time");
    if (msg.dt_s < 0 || msg.dt_ns < 0 || msg.dt_ns > 999'999'999)
        throw std::invalid_argument("dt out of range");
    if (msg.type == MsgType::market && msg.has_price)
        throw std::invalid_argument("market orders carry no price");
    if ((msg.type != MsgType::market) && !msg.has_price)
        throw std::invalid_argument("limit/cancel messages need a price");
    if (msg.has_ref != (msg.type == MsgType::cancel))
        throw std::invalid_argument("reference fields belong to cancellations only");

    ClipCounts local;
    TokenArray t{};
    t[pos::TYPE] = static_cast<uint16_t>(TYPE_BASE + static_cast<int>(msg.type));
    t[pos::DIRECTION] = static_cast<uint16_t>(DIR_BASE + static_cast<int>(msg.direction));

    if (msg.has_price) {
        const PriceTokens p = price_tokens(msg.price, mid2);
        t[pos::PRICE_SIGN] = p.sign;
        t[pos::PRICE_MAG] = p.mag;
        if (p.clipped) ++local.price;
    } else {
        t[pos::PRICE_SIGN] = NA;
        t[pos::PRICE_MAG] = NA;
    }

    bool sclip = false;
    t[pos::SIZE] = size_token(msg.size, sclip);
    if (sclip) ++local.size;

    int64_t dt_s = msg.dt_s;
    if (dt_s > 999) {
        dt_s = 999;
        ++local.dt;
    }
    t[pos::DT_S] = static_cast<uint16_t>(DIGIT_BASE + dt_s);
    write_digits(t, pos::DT_NS, msg.dt_ns, 3);
    write_digits(t, pos::T_S, msg.time_s, 2);
    write_digits(t, pos::T_NS, msg.time_ns, 3);

    if (msg.has_ref) {
        if (msg.ref_size < 1) throw std::invalid_argument("ref size must be >= 1");
        check_time(msg.ref_time_s, msg.ref_time_ns, "ref time");
        const PriceTokens rp = price_tokens(msg.ref_price, mid2);
        t[pos::REF_PRICE_SIGN] = rp.sign;
        t[pos::REF_PRICE_MAG] = rp.mag;
        if (rp.clipped) ++local.ref_price;
        bool rsclip = false;
        t[pos::REF_SIZE] = size_token(msg.ref_size, rsclip);
        if (rsclip) ++local.ref_size;
        write_digits(t, pos::REF_T_S, msg.ref_time_s, 2);
        write_digits(t, pos::REF_T_NS, msg.ref_time_ns, 3);
    } else {
        for (int i = pos::REF_PRICE_SIGN; i < pos::TARGET; ++i)
            t[static_cast<size_t>(i)] = NA;
    }

    t[pos::TARGET] = msg.target_self ? TARGET_SELF : TARGET_OTHER;

    if (clips) {
        if (local.price + local.size + local.ref_price + local.ref_size > 0) local.messages = 1;
        *clips += local;
    }
    return t;
}

MessageRecord decode_message(const TokenArray& t, int64_t mid2) {
    using namespace vocab;
    MessageRecord m;

    if (!in_block(t[pos::TYPE], TYPE_BASE, TYPE_COUNT))
        throw CodecError(pos::TYPE, "expected type token");
    m.type = static_cast<MsgType>(t[pos::TYPE] - TYPE_BASE);

    if (!in_block(t[pos::DIRECTION], DIR_BASE, DIR_COUNT))
        throw CodecError(pos::DIRECTION, "expected direction token");
    m.direction = static_cast<Dir>(t[pos::DIRECTION] - DIR_BASE);

    const bool price_na = t[pos::PRICE_SIGN] == NA && t[pos::PRICE_MAG] == NA;
    if (m.type == MsgType::market) {
        if (!price_na) throw CodecError(pos::PRICE_SIGN, "market price must be NA");
        m.has_price = false;
    } else {
        if (!in_block(t[pos::PRICE_SIGN], SIGN_BASE, SIGN_COUNT))
            throw CodecError(pos::PRICE_SIGN, "expected price sign token");
        if (!in_block(t[pos::PRICE_MAG], PRICE_MAG_BASE, PRICE_MAG_COUNT))
            throw CodecError(pos::PRICE_MAG, "expected price magnitude token");
        m.has_price = true;
        m.price = price_from_tokens(t[pos::PRICE_SIGN], t[pos::PRICE_MAG], mid2);
    }

    if (!in_block(t[pos::SIZE], SIZE_BASE, SIZE_COUNT))
        throw CodecError(pos::SIZE, "expected size token");
    m.size = t[pos::SIZE] - SIZE_BASE;

    m.dt_s = read_digits(t, pos::DT_S, 1);
    m.dt_ns = read_digits(t, pos::DT_NS, 3);
    m.time_s = read_digits(t, pos::T_S, 2);
    m.time_ns = read_digits(t, pos::T_NS, 3);

    if (m.type == MsgType::cancel) {
        if (!in_block(t[pos::REF_PRICE_SIGN], SIGN_BASE, SIGN_COUNT))
            throw CodecError(pos::REF_PRICE_SIGN, "expected ref price sign token");
        if (!in_block(t[pos::REF_PRICE_MAG], PRICE_MAG_BASE, PRICE_MAG_COUNT))
            throw CodecError(pos::REF_PRICE_MAG, "expected ref price magnitude token");
        if (!in_block(t[pos::REF_SIZE], SIZE_BASE, SIZE_COUNT))
            throw CodecError(pos::REF_SIZE, "expected ref size token");
        m.has_ref = true;
        m.ref_price = price_from_tokens(t[pos::REF_PRICE_SIGN], t[pos::REF_PRICE_MAG], mid2);
        m.ref_size = t[pos::REF_SIZE] - SIZE_BASE;
        m.ref_time_s = read_digits(t, pos::REF_T_S, 2);
        m.ref_time_ns = read_digits(t, pos::REF_T_NS, 3);
    } else {
        for (int i = pos::REF_PRICE_SIGN; i < pos::TARGET; ++i)
            if (t[static_cast<size_t>(i)] != NA)
                throw CodecError(i, "expected NA reference token");
    }

    if (!in_block(t[pos::TARGET], TARGET_BASE, TARGET_COUNT))
        throw CodecError(pos::TARGET, "expected target token");
    m.target_self = t[pos::TARGET] == TARGET_SELF;
    return m;
}

MessageRecord clip_message(const MessageRecord& msg, int64_t mid2) {
    MessageRecord m = msg;
    m.order_id = 0;
    m.agent_id = -1;
    m.group_id = -1;
    if (m.has_price) {
        const PriceTokens p = price_tokens(m.price, mid2);
        m.price = price_from_tokens(p.sign, p.mag, mid2);
    } else {
        m.price = 0;
    }
    m.size = std::min<int64_t>(m.size, 999);
    m.dt_s = std::min<int64_t>(m.dt_s, 999);
    if (m.has_ref) {
        const PriceTokens rp = price_tokens(m.ref_price, mid2);
        m.ref_price = price_from_tokens(rp.sign, rp.mag, mid2);
        m.ref_size = std::min<int64_t>(m.ref_size, 999);
    }
    return m;
}

} // namespace mimic::codec
