#include "mimic/cli/selftest.hpp"

#include <cstdint>
#include <functional>
#include <string>

#include "mimic/codec/message.hpp"
#include "mimic/codec/vocab.hpp"
#include "mimic/lob/book.hpp"
#include "mimic/util/rng.hpp"

namespace mimic::cli {

namespace {

bool codec_round_trip() {
    using namespace codec;
    util::Rng rng(7);
    for (int i = 0; i < 2'000; ++i) {
        int64_t mid2 = 19'000 + static_cast<int64_t>(rng.uniform_int(2'001));
        MessageRecord m;
        m.type = static_cast<MsgType>(rng.uniform_int(3));
        m.direction = rng.bernoulli(0.5) ? Dir::buy : Dir::sell;
        m.has_price = m.type != MsgType::market;
        if (m.has_price)
            m.price = mid2 / 2 - 500 + static_cast<int64_t>(rng.uniform_int(1'001));
        m.size = 1 + static_cast<int64_t>(rng.uniform_int(999));
        m.time_s = static_cast<int64_t>(rng.uniform_int(86'400));
        m.time_ns = static_cast<int64_t>(rng.uniform_int(1'000'000'000));
        m.dt_s = static_cast<int64_t>(rng.uniform_int(900));
        m.dt_ns = static_cast<int64_t>(rng.uniform_int(1'000'000'000));
        if (m.type == MsgType::cancel) {
            m.has_ref = true;
            m.ref_price = m.price;
            m.ref_size = m.size;
            m.ref_time_s = m.time_s;
            m.ref_time_ns = m.time_ns;
        }
        MessageRecord back = decode_message(encode_message(m, mid2), mid2);
        MessageRecord expect = clip_message(m, mid2);
        if (!(back == expect)) return false;
    }
    return true;
}

bool engine_basics() {
    lob::OrderBook book(10'000);
    book.submit_limit(1, lob::Side::ask, 10'005, 50);
    auto fills = book.submit_limit(2, lob::Side::bid, 10'005, 80);
    if (fills.size() != 1 || fills[0].size != 50) return false;
    if (!book.best_bid() || *book.best_bid() != 10'005) return false;
    if (book.side_volume(lob::Side::bid) != 30) return false;
    auto none = book.submit_market(lob::Side::bid, 5);
    if (none.has_value()) return false; // ask side is empty now
    return true;
}

bool rng_determinism() {
    util::Rng a(123), b(123);
    for (int i = 0; i < 1'000; ++i)
        if (a.next_u64() != b.next_u64()) return false;
    util::Rng c(124);
    return c.next_u64() != util::Rng(123).next_u64();
}

bool vocab_no_overlap() {
    using namespace codec::vocab;
    return TYPE_BASE == 3 && DIR_BASE == TYPE_BASE + TYPE_COUNT &&
           SIGN_BASE == DIR_BASE + DIR_COUNT &&
           PRICE_MAG_BASE == SIGN_BASE + SIGN_COUNT &&
           SIZE_BASE == PRICE_MAG_BASE + PRICE_MAG_COUNT &&
           DIGIT_BASE == SIZE_BASE + SIZE_COUNT &&
           TARGET_BASE == DIGIT_BASE + DIGIT_COUNT && V == TARGET_BASE + TARGET_COUNT;
}

} // namespace

int run_selftest(std::ostream& out) {
    struct Check {
        const char* name;
        std::function<bool()> fn;
    };
    const Check checks[] = {
        {"vocabulary layout", vocab_no_overlap},
        {"codec round trip", codec_round_trip},
        {"matching engine basics", engine_basics},
        {"rng determinism", rng_determinism},
    };
    int failures = 0;
    for (const auto& c : checks) {
        bool ok = false;
        try {
            ok = c.fn();
        } catch (...) {
            ok = false;
        }
        out << (ok ? "[ok]   " : "[FAIL] ") << c.name << '\n';
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

} // namespace mimic::cli
