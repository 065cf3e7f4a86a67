#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

namespace mimic::lob {

enum class Side : uint8_t { bid, ask };

inline Side opposite(Side s) { return s == Side::bid ? Side::ask : Side::bid; }

/// One execution against a resting order.  Price is always the maker's price.
struct Fill {
    uint64_t maker_id;
    int64_t price;
    int64_t size;
    bool maker_done; // resting order fully consumed and removed
};

struct CancelledOrder {
    Side side;
    int64_t price;
    int64_t remaining; // size still resting at cancel time
};

struct SnapshotLevel {
    int64_t offset; // 2*price - mid2, so half-tick mids stay exact
    int64_t volume; // signed: bids negative, asks positive
};

/// Depth-limited view of the book taken just before a message is applied.
struct BookSnapshot {
    int64_t mid2 = 0;       // best_bid + best_ask (or 2*last trade price)
    int64_t mid_change = 0; // mid2 minus the previous snapshot's mid2
    std::vector<SnapshotLevel> levels; // bids best-first, then asks best-first
};

struct LevelView {
    int64_t price;
    int64_t volume;
};

/// Price-time priority matching engine on an integer tick grid.
///
/// Orders within a price level fill strictly first-in-first-out.  Aggressive
/// limit orders trade at the resting side's price; whatever cannot be matched
/// rests at the submitted limit.  Market orders never rest: once the opposite
/// side is empty the remainder is discarded.
class OrderBook {
public:
    explicit OrderBook(int64_t initial_reference_price);

    /// Throws std::invalid_argument on duplicate id or non-positive price/size.
    std::vector<Fill> submit_limit(uint64_t id, Side side, int64_t price, int64_t size);

    /// nullopt when the opposite side is empty (order is a no-op).
    std::optional<std::vector<Fill>> submit_market(Side side, int64_t size);

    /// nullopt when the id is not resting (already filled or never existed).
    std::optional<CancelledOrder> cancel(uint64_t id);

    std::optional<int64_t> best_bid() const;
    std::optional<int64_t> best_ask() const;

    /// Twice the mid price; falls back to 2*last_trade_price when a side is
    /// missing so one-sided books still produce a usable reference.
    int64_t mid2() const;

    int64_t last_trade_price() const { return last_trade_price_; }

    BookSnapshot snapshot(int depth, int64_t prev_mid2) const;

    bool has_order(uint64_t id) const { return index_.count(id) != 0; }
    /// Remaining resting size, 0 when the id is not in the book.
    int64_t order_size(uint64_t id) const;
    size_t order_count() const { return index_.size(); }
    int64_t side_volume(Side side) const;
    std::vector<LevelView> levels(Side side, size_t max_levels) const;

private:
    struct Resting {
        uint64_t id;
        int64_t size;
    };
    struct Level {
        std::deque<Resting> queue;
        int64_t volume = 0;
    };
    struct OrderRef {
        Side side;
        int64_t price;
    };

    using BidMap = std::map<int64_t, Level, std::greater<int64_t>>;
    using AskMap = std::map<int64_t, Level, std::less<int64_t>>;

    template <class Book>
    void match(Book& opposite_book, Side resting_side, int64_t limit, int64_t& size,
               std::vector<Fill>& fills);
    void rest(uint64_t id, Side side, int64_t price, int64_t size);

    BidMap bids_;
    AskMap asks_;
    std::unordered_map<uint64_t, OrderRef> index_;
    int64_t last_trade_price_;
};

} // namespace mimic::lob
