#include "mimic/abm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mimic/abm/lobster_io.hpp"
#include "mimic/codec/message.hpp"
#include "mimic/lob/book.hpp"
#include "mimic/util/hash.hpp"
#include "mimic/util/rng.hpp"

namespace mimic::abm {

using codec::Dir;
using codec::MessageRecord;
using codec::MsgType;
using lob::OrderBook;
using lob::Side;
using util::Rng;

namespace {

constexpr int64_t kNsPerSec = 1'000'000'000;

uint64_t to_ns(double seconds) {
    double ns = seconds * 1e9;
    if (ns < 1.0) return 1;
    if (ns > 9e18) return static_cast<uint64_t>(9e18);
    return static_cast<uint64_t>(std::llround(ns));
}

int pick3(Rng& rng, const std::array<double, 3>& p) {
    double u = rng.uniform();
    if (u < p[0]) return 0;
    if (u < p[0] + p[1]) return 1;
    return 2;
}

class Simulator {
public:
    Simulator(const SimConfig& cfg, std::string out_dir)
        : cfg_(cfg), out_dir_(std::move(out_dir)) {}

    SimResult run() {
        cfg_.validate();
        namespace fs = std::filesystem;
        fs::create_directories(out_dir_);
        {
            std::ofstream cf(out_dir_ + "/config.json", std::ios::binary);
            cf << cfg_.to_json();
        }
        SimResult result;
        for (int day = 0; day < cfg_.days; ++day) {
            result.days.push_back(run_day(day));
        }
        write_summary(result);
        return result;
    }

private:
    struct LiveOrder {
        uint64_t id = 0;
        int64_t price = 0;
        int64_t size = 0; // as submitted; the book tracks the remainder
        Dir dir = Dir::buy;
        int64_t time_s = 0;
        int64_t time_ns = 0;
    };

    struct Agent {
        int32_t id = 0;
        const AgentGroupSpec* spec = nullptr;
        Rng rng;
        std::vector<LiveOrder> live;
        int taker_sign = 0;
        uint64_t quote_bid = 0;
        uint64_t quote_ask = 0;
    };

    // ---- per-day plumbing ----------------------------------------------

    DayStats run_day(int day) {
        DayStats stats;
        stats.day = day;
        stats.by_group.assign(cfg_.groups.size(), 0);
        stats.min_mid2 = stats.max_mid2 = 2 * cfg_.initial_price;

        book_ = std::make_unique<OrderBook>(cfg_.initial_price);
        prev_mid2_ = 2 * cfg_.initial_price;
        last_rec_ns_ = -1;
        next_order_id_ = 1;
        mid_hist_.clear();
        owner_.clear();
        fund_value_ = static_cast<double>(cfg_.initial_price);
        fund_t_ns_ = 0;
        fund_rng_ = Rng(util::derive_seed(cfg_.seed, static_cast<uint64_t>(day), 0));

        agents_.clear();
        agents_.reserve(static_cast<size_t>(cfg_.total_agents()));
        int32_t next_id = 0;
        for (const auto& g : cfg_.groups) {
            for (int k = 0; k < g.count; ++k) {
                Agent a;
                a.id = next_id++;
                a.spec = &g;
                a.rng = Rng(util::derive_seed(cfg_.seed, static_cast<uint64_t>(day),
                                              2 + static_cast<uint64_t>(a.id)));
                agents_.push_back(std::move(a));
            }
        }

        std::ofstream msg_file(out_dir_ + "/" + message_file_name(day), std::ios::binary);
        std::ofstream book_file(out_dir_ + "/" + book_file_name(day), std::ios::binary);
        if (!msg_file || !book_file)
            throw std::runtime_error("cannot create output files in " + out_dir_);
        msg_file << kMessageHeader << '\n';
        book_file << kBookHeader << '\n';
        msg_out_ = &msg_file;
        book_out_ = &book_file;
        stats_ = &stats;

        for (const auto& q : cfg_.initial_book) {
            Dir dir = q.is_bid ? Dir::buy : Dir::sell;
            record_limit(nullptr, dir, q.price, q.size, 0);
        }

        // Wake queue keyed by (time, agent) so ties resolve deterministically.
        using Event = std::pair<uint64_t, int32_t>;
        std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
        const uint64_t day_end_ns =
            static_cast<uint64_t>(cfg_.day_length_s) * kNsPerSec;
        int mm_index = 0;
        for (auto& a : agents_) {
            uint64_t first;
            if (a.spec->archetype == Archetype::market_maker) {
                // Stagger the makers across the first second so the book has
                // two-sided quotes before anyone else wakes up.
                first = 1'000'000 + static_cast<uint64_t>(mm_index++) * 50'000'000;
            } else {
                first = to_ns(a.rng.exponential(a.spec->wake_rate));
            }
            if (first < day_end_ns) queue.emplace(first, a.id);
        }

        while (!queue.empty()) {
            auto [t_ns, agent_id] = queue.top();
            queue.pop();
            Agent& a = agents_[static_cast<size_t>(agent_id)];
            bool acted = decide(a, t_ns);
            if (!acted) ++stats.skipped_wakes;
            uint64_t next = t_ns + to_ns(a.rng.exponential(a.spec->wake_rate));
            if (next < day_end_ns) queue.emplace(next, agent_id);
        }

        stats.final_mid2 = book_->mid2();
        msg_out_ = nullptr;
        book_out_ = nullptr;
        stats_ = nullptr;
        return stats;
    }

    // ---- recording ------------------------------------------------------

    // Stamps times (strictly increasing across the day), takes the
    // pre-message snapshot and writes both rows. Call before touching the
    // book for this message.
    void commit(MessageRecord& msg, uint64_t event_ns) {
        int64_t t_rec = std::max<int64_t>(static_cast<int64_t>(event_ns),
                                          last_rec_ns_ + 1);
        int64_t prev = last_rec_ns_ >= 0 ? last_rec_ns_ : 0;
        last_rec_ns_ = t_rec;
        msg.time_s = t_rec / kNsPerSec;
        msg.time_ns = t_rec % kNsPerSec;
        int64_t dt = t_rec - prev;
        msg.dt_s = dt / kNsPerSec;
        msg.dt_ns = dt % kNsPerSec;

        lob::BookSnapshot snap = book_->snapshot(cfg_.M, prev_mid2_);
        *msg_out_ << format_message_row(msg) << '\n';
        *book_out_ << format_book_row(snap) << '\n';
        prev_mid2_ = snap.mid2;
        mid_hist_.push_back(snap.mid2);

        ++stats_->messages;
        ++stats_->by_type[static_cast<size_t>(msg.type)];
        if (msg.group_id >= 0) ++stats_->by_group[static_cast<size_t>(msg.group_id)];
        stats_->min_mid2 = std::min(stats_->min_mid2, snap.mid2);
        stats_->max_mid2 = std::max(stats_->max_mid2, snap.mid2);
    }

    void handle_fills(const std::vector<lob::Fill>& fills) {
        for (const auto& f : fills) {
            ++stats_->trades;
            stats_->traded_volume += f.size;
            if (f.maker_done) forget_order(f.maker_id);
        }
    }

    void forget_order(uint64_t id) {
        auto it = owner_.find(id);
        if (it == owner_.end()) return; // seed orders have no owner
        Agent& a = agents_[static_cast<size_t>(it->second)];
        owner_.erase(it);
        if (a.quote_bid == id) a.quote_bid = 0;
        if (a.quote_ask == id) a.quote_ask = 0;
        auto pos = std::find_if(a.live.begin(), a.live.end(),
                                [&](const LiveOrder& o) { return o.id == id; });
        if (pos != a.live.end()) a.live.erase(pos);
    }

    // Returns the order id when (part of) the order rested, 0 otherwise.
    uint64_t record_limit(Agent* a, Dir dir, int64_t price, int64_t size,
                          uint64_t event_ns) {
        MessageRecord msg;
        msg.type = MsgType::limit;
        msg.direction = dir;
        msg.has_price = true;
        msg.price = price;
        msg.size = size;
        msg.order_id = next_order_id_;
        msg.agent_id = a ? a->id : -1;
        msg.group_id = a ? a->spec->group_id : -1;
        uint64_t id = next_order_id_++;
        commit(msg, event_ns);
        Side side = dir == Dir::buy ? Side::bid : Side::ask;
        handle_fills(book_->submit_limit(id, side, price, size));
        if (!book_->has_order(id)) return 0;
        if (a) {
            owner_[id] = a->id;
            a->live.push_back({id, price, size, dir, msg.time_s, msg.time_ns});
        }
        return id;
    }

    bool record_market(Agent& a, Dir dir, int64_t size, uint64_t event_ns) {
        Side opp = dir == Dir::buy ? Side::ask : Side::bid;
        bool has_liquidity =
            opp == Side::ask ? book_->best_ask().has_value() : book_->best_bid().has_value();
        if (!has_liquidity) return false;
        MessageRecord msg;
        msg.type = MsgType::market;
        msg.direction = dir;
        msg.has_price = false;
        msg.size = size;
        msg.order_id = next_order_id_++;
        msg.agent_id = a.id;
        msg.group_id = a.spec->group_id;
        commit(msg, event_ns);
        auto fills = book_->submit_market(dir == Dir::buy ? Side::bid : Side::ask, size);
        if (fills) handle_fills(*fills);
        return true;
    }

    bool record_cancel_at(Agent& a, size_t live_idx, uint64_t event_ns) {
        LiveOrder order = a.live[live_idx];
        // The row carries the remaining size, read before the book mutates.
        int64_t remaining = book_->order_size(order.id);
        MessageRecord msg;
        msg.type = MsgType::cancel;
        msg.direction = order.dir;
        msg.has_price = true;
        msg.price = order.price;
        msg.size = remaining;
        msg.order_id = order.id;
        msg.agent_id = a.id;
        msg.group_id = a.spec->group_id;
        msg.has_ref = true;
        msg.ref_price = order.price;
        msg.ref_size = order.size;
        msg.ref_time_s = order.time_s;
        msg.ref_time_ns = order.time_ns;
        commit(msg, event_ns);
        book_->cancel(order.id);
        forget_order(order.id);
        return true;
    }

    // ---- agent behaviour -------------------------------------------------

    bool decide(Agent& a, uint64_t t_ns) {
        switch (a.spec->archetype) {
            case Archetype::noise: return decide_flow(a, t_ns, 0);
            case Archetype::chartist_momentum: return decide_flow(a, t_ns, +1);
            case Archetype::chartist_reversion: return decide_flow(a, t_ns, -1);
            case Archetype::market_taker: return decide_taker(a, t_ns);
            case Archetype::fundamentalist: return decide_fundamentalist(a, t_ns);
            case Archetype::market_maker: return decide_maker(a, t_ns);
        }
        return false;
    }

    Dir trend_direction(Agent& a, int mode) {
        if (mode != 0 && mid_hist_.size() >= static_cast<size_t>(a.spec->window)) {
            int64_t now = book_->mid2();
            int64_t past = mid_hist_[mid_hist_.size() - static_cast<size_t>(a.spec->window)];
            int64_t ret = now - past;
            if (ret != 0) {
                bool up = ret > 0;
                bool buy = mode > 0 ? up : !up;
                return buy ? Dir::buy : Dir::sell;
            }
        }
        return a.rng.bernoulli(0.5) ? Dir::buy : Dir::sell;
    }

    int64_t passive_anchor(Dir dir) {
        if (dir == Dir::buy) {
            if (auto b = book_->best_bid()) return *b;
            return book_->mid2() / 2;
        }
        if (auto s = book_->best_ask()) return *s;
        return (book_->mid2() + 1) / 2;
    }

    // Noise traders and chartists share the limit/market/cancel action mix;
    // chartists pin the direction to their signal.
    bool decide_flow(Agent& a, uint64_t t_ns, int mode) {
        int action = pick3(a.rng, a.spec->action_probs);
        if (action == 2) { // cancel
            if (a.live.empty()) return false;
            size_t idx = static_cast<size_t>(a.rng.uniform_int(a.live.size()));
            return record_cancel_at(a, idx, t_ns);
        }
        Dir dir = trend_direction(a, mode);
        int64_t size = draw_size(a);
        if (action == 1) return record_market(a, dir, size, t_ns);
        int64_t offset = a.rng.geometric(a.spec->offset_geom_p);
        int64_t anchor = passive_anchor(dir);
        int64_t price = dir == Dir::buy ? anchor - offset : anchor + offset;
        price = std::max<int64_t>(price, 1);
        record_limit(&a, dir, price, size, t_ns);
        return true;
    }

    bool decide_taker(Agent& a, uint64_t t_ns) {
        if (a.taker_sign == 0) {
            a.taker_sign = a.rng.bernoulli(0.5) ? 1 : -1;
        } else if (a.rng.bernoulli(a.spec->switch_prob)) {
            a.taker_sign = -a.taker_sign;
        }
        Dir dir = a.taker_sign > 0 ? Dir::buy : Dir::sell;
        return record_market(a, dir, draw_size(a), t_ns);
    }

    bool decide_fundamentalist(Agent& a, uint64_t t_ns) {
        double fair = fundamental_at(t_ns);
        double mid = static_cast<double>(book_->mid2()) / 2.0;
        Dir dir;
        if (mid - fair > a.spec->threshold) dir = Dir::sell;
        else if (fair - mid > a.spec->threshold) dir = Dir::buy;
        else return false;
        return record_market(a, dir, draw_size(a), t_ns);
    }

    bool decide_maker(Agent& a, uint64_t t_ns) {
        int64_t mid2 = book_->mid2();
        int64_t hs2 = 2 * a.spec->half_spread;
        int64_t bid_target = (mid2 - hs2) / 2;
        int64_t ask_target = (mid2 + hs2 + 1) / 2;
        bid_target = std::max<int64_t>(bid_target, 1);
        if (ask_target <= bid_target) ask_target = bid_target + 1;

        if (a.quote_bid == 0 && a.quote_ask == 0) {
            uint64_t first = record_limit(&a, Dir::buy, bid_target, draw_size(a), t_ns);
            uint64_t second = record_limit(&a, Dir::sell, ask_target, draw_size(a), t_ns);
            a.quote_bid = first;
            a.quote_ask = second;
            return true;
        }
        if (a.quote_bid == 0) {
            a.quote_bid = record_limit(&a, Dir::buy, bid_target, draw_size(a), t_ns);
            return true;
        }
        if (a.quote_ask == 0) {
            a.quote_ask = record_limit(&a, Dir::sell, ask_target, draw_size(a), t_ns);
            return true;
        }
        // Both quotes live: re-quote the side that drifted furthest.
        int64_t drift_bid = std::abs(quote_price(a, a.quote_bid) - bid_target);
        int64_t drift_ask = std::abs(quote_price(a, a.quote_ask) - ask_target);
        int64_t tol = a.spec->requote_tolerance;
        if (drift_bid <= tol && drift_ask <= tol) return false;
        uint64_t victim = drift_bid >= drift_ask ? a.quote_bid : a.quote_ask;
        auto pos = std::find_if(a.live.begin(), a.live.end(),
                                [&](const LiveOrder& o) { return o.id == victim; });
        return record_cancel_at(a, static_cast<size_t>(pos - a.live.begin()), t_ns);
    }

    int64_t quote_price(const Agent& a, uint64_t id) const {
        for (const auto& o : a.live)
            if (o.id == id) return o.price;
        return 0;
    }

    int64_t draw_size(Agent& a) {
        size_t idx = a.rng.categorical(a.spec->size_dist.probs);
        return a.spec->size_dist.values[idx];
    }

    double fundamental_at(uint64_t t_ns) {
        if (t_ns > fund_t_ns_) {
            double dt = static_cast<double>(t_ns - fund_t_ns_) * 1e-9;
            fund_value_ += fund_rng_.normal() * cfg_.fundamental_step_std * std::sqrt(dt);
            fund_t_ns_ = t_ns;
        }
        return fund_value_;
    }

    // ---- summary ----------------------------------------------------------

    void write_summary(const SimResult& result) const {
        nlohmann::json j;
        j["config"] = nlohmann::json::parse(cfg_.to_json());
        j["config_hash"] = util::hex64(cfg_.hash());
        nlohmann::json days = nlohmann::json::array();
        int64_t total = 0;
        for (const auto& d : result.days) {
            nlohmann::json dj;
            dj["day"] = d.day;
            dj["messages"] = d.messages;
            dj["by_type"] = {{"limit", d.by_type[0]},
                             {"market", d.by_type[1]},
                             {"cancel", d.by_type[2]}};
            dj["by_group"] = d.by_group;
            dj["skipped_wakes"] = d.skipped_wakes;
            dj["trades"] = d.trades;
            dj["traded_volume"] = d.traded_volume;
            dj["mid2"] = {{"min", d.min_mid2}, {"max", d.max_mid2}, {"final", d.final_mid2}};
            days.push_back(dj);
            total += d.messages;
        }
        j["days"] = days;
        j["total_messages"] = total;
        std::ofstream out(out_dir_ + "/summary.json", std::ios::binary);
        out << j.dump(2) << '\n';
    }

    SimConfig cfg_;
    std::string out_dir_;

    std::unique_ptr<OrderBook> book_;
    std::vector<Agent> agents_;
    std::unordered_map<uint64_t, int32_t> owner_;
    std::vector<int64_t> mid_hist_;
    int64_t prev_mid2_ = 0;
    int64_t last_rec_ns_ = -1;
    uint64_t next_order_id_ = 1;
    double fund_value_ = 0;
    uint64_t fund_t_ns_ = 0;
    Rng fund_rng_;

    std::ofstream* msg_out_ = nullptr;
    std::ofstream* book_out_ = nullptr;
    DayStats* stats_ = nullptr;
};

} // namespace

SimResult run_simulation(const SimConfig& cfg, const std::string& out_dir) {
    Simulator sim(cfg, out_dir);
    return sim.run();
}

bool replay_day(const std::string& data_dir, int day, std::string* error) {
    auto fail = [&](const std::string& why) {
        if (error) *error = why;
        return false;
    };
    SimConfig cfg;
    try {
        cfg = SimConfig::from_file(data_dir + "/config.json");
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    std::vector<MessageRecord> msgs;
    try {
        msgs = read_message_file(data_dir + "/" + message_file_name(day));
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    std::ifstream book_in(data_dir + "/" + book_file_name(day));
    if (!book_in) return fail("cannot open stored book file");
    std::string line;
    if (!std::getline(book_in, line) || line != kBookHeader)
        return fail("book file header mismatch");

    OrderBook book(cfg.initial_price);
    int64_t prev_mid2 = 2 * cfg.initial_price;
    for (size_t i = 0; i < msgs.size(); ++i) {
        const auto& m = msgs[i];
        lob::BookSnapshot snap = book.snapshot(cfg.M, prev_mid2);
        prev_mid2 = snap.mid2;
        if (!std::getline(book_in, line))
            return fail("book file ends early at row " + std::to_string(i));
        std::string regen = format_book_row(snap);
        if (line != regen)
            return fail("book row " + std::to_string(i) + " differs: stored '" + line +
                        "' vs replay '" + regen + "'");
        switch (m.type) {
            case MsgType::limit:
                book.submit_limit(m.order_id,
                                  m.direction == Dir::buy ? Side::bid : Side::ask,
                                  m.price, m.size);
                break;
            case MsgType::market:
                book.submit_market(m.direction == Dir::buy ? Side::bid : Side::ask, m.size);
                break;
            case MsgType::cancel:
                if (!book.cancel(m.order_id))
                    return fail("cancel of unknown order at row " + std::to_string(i));
                break;
        }
    }
    if (std::getline(book_in, line) && !line.empty())
        return fail("book file has extra rows");
    return true;
}

} // namespace mimic::abm
