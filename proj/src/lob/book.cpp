#include "mimic/lob/book.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mimic::lob {

OrderBook::OrderBook(int64_t initial_reference_price)
    : last_trade_price_(initial_reference_price) {
    if (initial_reference_price <= 0)
        throw std::invalid_argument("reference price must be positive");
}

template <class Book>
void OrderBook::match(Book& opposite_book, Side resting_side, int64_t limit, int64_t& size,
                      std::vector<Fill>& fills) {
    // `limit` is already translated so that "crosses" means best*sign <= limit*sign;
    // callers pass +price for asks being hit and -price for bids being hit.
    const int64_t sign = resting_side == Side::ask ? 1 : -1;
    while (size > 0 && !opposite_book.empty()) {
        auto best_it = opposite_book.begin();
        if (sign * best_it->first > limit) break;
        Level& level = best_it->second;
        while (size > 0 && !level.queue.empty()) {
            Resting& maker = level.queue.front();
            const int64_t traded = std::min(size, maker.size);
            maker.size -= traded;
            size -= traded;
            level.volume -= traded;
            const bool done = maker.size == 0;
            fills.push_back({maker.id, best_it->first, traded, done});
            last_trade_price_ = best_it->first;
            if (done) {
                index_.erase(maker.id);
                level.queue.pop_front();
            }
        }
        if (level.queue.empty()) opposite_book.erase(best_it);
    }
}

void OrderBook::rest(uint64_t id, Side side, int64_t price, int64_t size) {
    Level& level = side == Side::bid ? bids_[price] : asks_[price];
    level.queue.push_back({id, size});
    level.volume += size;
    index_.emplace(id, OrderRef{side, price});
}

std::vector<Fill> OrderBook::submit_limit(uint64_t id, Side side, int64_t price, int64_t size) {
    if (price <= 0) throw std::invalid_argument("limit price must be positive");
    if (size <= 0) throw std::invalid_argument("order size must be positive");
    if (index_.count(id)) throw std::invalid_argument("duplicate order id");

    std::vector<Fill> fills;
    if (side == Side::bid) {
        match(asks_, Side::ask, price, size, fills);
    } else {
        match(bids_, Side::bid, -price, size, fills);
    }
    if (size > 0) rest(id, side, price, size);
    return fills;
}

std::optional<std::vector<Fill>> OrderBook::submit_market(Side side, int64_t size) {
    if (size <= 0) throw std::invalid_argument("order size must be positive");
    if (side == Side::bid ? asks_.empty() : bids_.empty()) return std::nullopt;

    std::vector<Fill> fills;
    if (side == Side::bid) {
        match(asks_, Side::ask, std::numeric_limits<int64_t>::max(), size, fills);
    } else {
        match(bids_, Side::bid, std::numeric_limits<int64_t>::max(), size, fills);
    }
    // whatever is left when the book runs dry is discarded
    return fills;
}

std::optional<CancelledOrder> OrderBook::cancel(uint64_t id) {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    const OrderRef ref = it->second;
    Level* level = nullptr;
    if (ref.side == Side::bid) {
        level = &bids_.at(ref.price);
    } else {
        level = &asks_.at(ref.price);
    }
    auto pos = std::find_if(level->queue.begin(), level->queue.end(),
                            [&](const Resting& r) { return r.id == id; });
    const int64_t remaining = pos->size;
    level->volume -= remaining;
    level->queue.erase(pos);
    if (level->queue.empty()) {
        if (ref.side == Side::bid) bids_.erase(ref.price);
        else asks_.erase(ref.price);
    }
    index_.erase(it);
    return CancelledOrder{ref.side, ref.price, remaining};
}

std::optional<int64_t> OrderBook::best_bid() const {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first;
}

std::optional<int64_t> OrderBook::best_ask() const {
    if (asks_.empty()) return std::nullopt;
    return asks_.begin()->first;
}

int64_t OrderBook::mid2() const {
    if (!bids_.empty() && !asks_.empty())
        return bids_.begin()->first + asks_.begin()->first;
    return 2 * last_trade_price_;
}

BookSnapshot OrderBook::snapshot(int depth, int64_t prev_mid2) const {
    BookSnapshot snap;
    snap.mid2 = mid2();
    snap.mid_change = snap.mid2 - prev_mid2;
    snap.levels.reserve(2 * static_cast<size_t>(depth));
    int n = 0;
    for (auto it = bids_.begin(); it != bids_.end() && n < depth; ++it, ++n)
        snap.levels.push_back({2 * it->first - snap.mid2, -it->second.volume});
    n = 0;
    for (auto it = asks_.begin(); it != asks_.end() && n < depth; ++it, ++n)
        snap.levels.push_back({2 * it->first - snap.mid2, it->second.volume});
    return snap;
}

int64_t OrderBook::order_size(uint64_t id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return 0;
    const Level& level =
        it->second.side == Side::bid ? bids_.at(it->second.price) : asks_.at(it->second.price);
    for (const auto& r : level.queue)
        if (r.id == id) return r.size;
    return 0;
}

int64_t OrderBook::side_volume(Side side) const {
    int64_t total = 0;
    if (side == Side::bid) {
        for (const auto& [price, level] : bids_) total += level.volume;
    } else {
        for (const auto& [price, level] : asks_) total += level.volume;
    }
    return total;
}

std::vector<LevelView> OrderBook::levels(Side side, size_t max_levels) const {
    std::vector<LevelView> out;
    if (side == Side::bid) {
        for (const auto& [price, level] : bids_) {
            if (out.size() == max_levels) break;
            out.push_back({price, level.volume});
        }
    } else {
        for (const auto& [price, level] : asks_) {
            if (out.size() == max_levels) break;
            out.push_back({price, level.volume});
        }
    }
    return out;
}

} // namespace mimic::lob
