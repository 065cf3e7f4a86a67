#pragma once

// Deliberately naive price-time matcher used as a reference oracle. Orders
// live in one flat vector in arrival order; every operation rescans it. No
// shared code or data structures with the real engine.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "mimic/lob/book.hpp"

namespace mimic::testing {

class BruteBook {
public:
    explicit BruteBook(int64_t reference_price) : last_trade_(reference_price) {}

    std::vector<lob::Fill> submit_limit(uint64_t id, bool is_bid, int64_t price,
                                        int64_t size) {
        std::vector<lob::Fill> fills;
        match(is_bid, price, size, fills);
        if (size > 0) orders_.push_back({id, is_bid, price, size, seq_++});
        return fills;
    }

    std::optional<std::vector<lob::Fill>> submit_market(bool is_bid, int64_t size) {
        bool any_opposite = false;
        for (const auto& o : orders_)
            if (o.is_bid != is_bid) any_opposite = true;
        if (!any_opposite) return std::nullopt;
        std::vector<lob::Fill> fills;
        match(is_bid, is_bid ? INT64_MAX : 1, size, fills);
        return fills;
    }

    std::optional<lob::CancelledOrder> cancel(uint64_t id) {
        for (size_t i = 0; i < orders_.size(); ++i) {
            if (orders_[i].id == id) {
                lob::CancelledOrder out{orders_[i].is_bid ? lob::Side::bid : lob::Side::ask,
                                        orders_[i].price, orders_[i].size};
                orders_.erase(orders_.begin() + static_cast<ptrdiff_t>(i));
                return out;
            }
        }
        return std::nullopt;
    }

    std::optional<int64_t> best_bid() const { return best(true); }
    std::optional<int64_t> best_ask() const { return best(false); }

    int64_t mid2() const {
        auto b = best_bid();
        auto a = best_ask();
        if (b && a) return *b + *a;
        return 2 * last_trade_;
    }

    size_t order_count() const { return orders_.size(); }

    int64_t side_volume(bool is_bid) const {
        int64_t total = 0;
        for (const auto& o : orders_)
            if (o.is_bid == is_bid) total += o.size;
        return total;
    }

    /// (price, volume) best-first, aggregated per price.
    std::vector<lob::LevelView> levels(bool is_bid) const {
        std::vector<int64_t> prices;
        for (const auto& o : orders_)
            if (o.is_bid == is_bid) prices.push_back(o.price);
        std::sort(prices.begin(), prices.end());
        prices.erase(std::unique(prices.begin(), prices.end()), prices.end());
        if (is_bid) std::reverse(prices.begin(), prices.end());
        std::vector<lob::LevelView> out;
        for (int64_t p : prices) {
            int64_t vol = 0;
            for (const auto& o : orders_)
                if (o.is_bid == is_bid && o.price == p) vol += o.size;
            out.push_back({p, vol});
        }
        return out;
    }

private:
    struct Order {
        uint64_t id;
        bool is_bid;
        int64_t price;
        int64_t size;
        uint64_t seq;
    };

    std::optional<int64_t> best(bool is_bid) const {
        std::optional<int64_t> out;
        for (const auto& o : orders_) {
            if (o.is_bid != is_bid) continue;
            if (!out || (is_bid ? o.price > *out : o.price < *out)) out = o.price;
        }
        return out;
    }

    // Consumes from `size`; incoming side is_bid hits the opposite side while
    // the best opposite price still satisfies `limit`.
    void match(bool is_bid, int64_t limit, int64_t& size, std::vector<lob::Fill>& fills) {
        while (size > 0) {
            size_t best_idx = orders_.size();
            for (size_t i = 0; i < orders_.size(); ++i) {
                const auto& o = orders_[i];
                if (o.is_bid == is_bid) continue;
                if (is_bid ? o.price > limit : o.price < limit) continue;
                if (best_idx == orders_.size()) { best_idx = i; continue; }
                const auto& b = orders_[best_idx];
                bool better = is_bid ? o.price < b.price : o.price > b.price;
                if (better || (o.price == b.price && o.seq < b.seq)) best_idx = i;
            }
            if (best_idx == orders_.size()) break;
            Order& maker = orders_[best_idx];
            int64_t traded = std::min(size, maker.size);
            maker.size -= traded;
            size -= traded;
            last_trade_ = maker.price;
            bool done = maker.size == 0;
            fills.push_back({maker.id, maker.price, traded, done});
            if (done) orders_.erase(orders_.begin() + static_cast<ptrdiff_t>(best_idx));
        }
    }

    std::vector<Order> orders_;
    uint64_t seq_ = 0;
    int64_t last_trade_;
};

} // namespace mimic::testing
