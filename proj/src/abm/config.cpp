#include "mimic/abm/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mimic/util/hash.hpp"

namespace mimic::abm {

using nlohmann::json;

namespace {

const char* kArchetypeNames[] = {
    "market_maker", "market_taker", "fundamentalist",
    "chartist_momentum", "chartist_reversion", "noise",
};

json categorical_to_json(const Categorical& c) {
    json j = json::array();
    for (size_t i = 0; i < c.values.size(); ++i) {
        j.push_back(json::array({c.values[i], c.probs[i]}));
    }
    return j;
}

Categorical categorical_from_json(const json& j) {
    Categorical c;
    for (const auto& pair : j) {
        c.values.push_back(pair.at(0).get<int64_t>());
        c.probs.push_back(pair.at(1).get<double>());
    }
    return c;
}

} // namespace

const char* archetype_name(Archetype a) {
    return kArchetypeNames[static_cast<size_t>(a)];
}

Archetype archetype_from_name(const std::string& name) {
    for (size_t i = 0; i < std::size(kArchetypeNames); ++i) {
        if (name == kArchetypeNames[i]) return static_cast<Archetype>(i);
    }
    throw std::invalid_argument("unknown archetype: " + name);
}

int SimConfig::total_agents() const {
    int n = 0;
    for (const auto& g : groups) n += g.count;
    return n;
}

void SimConfig::validate() const {
    if (days < 1) throw std::invalid_argument("days must be >= 1");
    if (day_length_s < 1) throw std::invalid_argument("day_length_s must be >= 1");
    if (M < 1) throw std::invalid_argument("M must be >= 1");
    if (initial_price < 1) throw std::invalid_argument("initial_price must be >= 1");
    if (fundamental_step_std < 0) throw std::invalid_argument("fundamental_step_std must be >= 0");
    if (groups.empty()) throw std::invalid_argument("at least one agent group required");
    for (size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        std::string where = "group " + std::to_string(i) + ": ";
        if (g.group_id != static_cast<int>(i))
            throw std::invalid_argument(where + "group_id must equal its index");
        if (g.count < 1) throw std::invalid_argument(where + "count must be >= 1");
        if (g.wake_rate <= 0) throw std::invalid_argument(where + "wake_rate must be > 0");
        double ap = g.action_probs[0] + g.action_probs[1] + g.action_probs[2];
        if (g.archetype != Archetype::market_maker && g.archetype != Archetype::market_taker &&
            g.archetype != Archetype::fundamentalist) {
            if (std::abs(ap - 1.0) > 1e-9)
                throw std::invalid_argument(where + "action_probs must sum to 1");
        }
        if (g.size_dist.values.empty() || g.size_dist.values.size() != g.size_dist.probs.size())
            throw std::invalid_argument(where + "size_dist malformed");
        double sp = 0;
        for (size_t k = 0; k < g.size_dist.values.size(); ++k) {
            if (g.size_dist.values[k] < 1)
                throw std::invalid_argument(where + "sizes must be >= 1");
            if (g.size_dist.probs[k] < 0)
                throw std::invalid_argument(where + "size probs must be >= 0");
            sp += g.size_dist.probs[k];
        }
        if (std::abs(sp - 1.0) > 1e-9)
            throw std::invalid_argument(where + "size probs must sum to 1");
        if (g.offset_geom_p <= 0 || g.offset_geom_p >= 1) {
            if (g.archetype != Archetype::market_maker && g.archetype != Archetype::market_taker &&
                g.archetype != Archetype::fundamentalist)
                throw std::invalid_argument(where + "offset_geom_p must be in (0,1)");
        }
        switch (g.archetype) {
            case Archetype::market_maker:
                if (g.half_spread < 1) throw std::invalid_argument(where + "half_spread must be >= 1");
                if (g.requote_tolerance < 0)
                    throw std::invalid_argument(where + "requote_tolerance must be >= 0");
                break;
            case Archetype::market_taker:
                if (g.switch_prob < 0 || g.switch_prob > 1)
                    throw std::invalid_argument(where + "switch_prob must be in [0,1]");
                break;
            case Archetype::fundamentalist:
                if (g.threshold <= 0) throw std::invalid_argument(where + "threshold must be > 0");
                break;
            case Archetype::chartist_momentum:
            case Archetype::chartist_reversion:
                if (g.window < 1) throw std::invalid_argument(where + "window must be >= 1");
                break;
            case Archetype::noise:
                break;
        }
    }
    for (const auto& q : initial_book) {
        if (q.price < 1 || q.size < 1)
            throw std::invalid_argument("initial_book entries need positive price and size");
    }
}

std::string SimConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["days"] = days;
    j["day_length_s"] = day_length_s;
    j["book_depth"] = M;
    j["initial_price"] = initial_price;
    j["fundamental_step_std"] = fundamental_step_std;
    j["initial_book"] = json::array();
    for (const auto& q : initial_book) {
        j["initial_book"].push_back(
            {{"side", q.is_bid ? "bid" : "ask"}, {"price", q.price}, {"size", q.size}});
    }
    j["groups"] = json::array();
    for (const auto& g : groups) {
        json gj;
        gj["group_id"] = g.group_id;
        gj["archetype"] = archetype_name(g.archetype);
        gj["count"] = g.count;
        gj["wake_rate"] = g.wake_rate;
        gj["action_probs"] = g.action_probs;
        gj["size_dist"] = categorical_to_json(g.size_dist);
        gj["offset_geom_p"] = g.offset_geom_p;
        switch (g.archetype) {
            case Archetype::market_maker:
                gj["half_spread"] = g.half_spread;
                gj["requote_tolerance"] = g.requote_tolerance;
                break;
            case Archetype::market_taker:
                gj["switch_prob"] = g.switch_prob;
                break;
            case Archetype::fundamentalist:
                gj["threshold"] = g.threshold;
                break;
            case Archetype::chartist_momentum:
            case Archetype::chartist_reversion:
                gj["window"] = g.window;
                break;
            case Archetype::noise:
                break;
        }
        j["groups"].push_back(gj);
    }
    return j.dump(2) + "\n";
}

SimConfig SimConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    SimConfig c;
    c.seed = j.at("seed").get<uint64_t>();
    c.days = j.at("days").get<int>();
    c.day_length_s = j.at("day_length_s").get<int64_t>();
    c.M = j.at("book_depth").get<int>();
    c.initial_price = j.at("initial_price").get<int64_t>();
    c.fundamental_step_std = j.at("fundamental_step_std").get<double>();
    c.initial_book.clear();
    if (j.contains("initial_book")) {
        for (const auto& qj : j.at("initial_book")) {
            SeedQuote q;
            q.is_bid = qj.at("side").get<std::string>() == "bid";
            q.price = qj.at("price").get<int64_t>();
            q.size = qj.at("size").get<int64_t>();
            c.initial_book.push_back(q);
        }
    }
    for (const auto& gj : j.at("groups")) {
        AgentGroupSpec g;
        g.group_id = gj.at("group_id").get<int>();
        g.archetype = archetype_from_name(gj.at("archetype").get<std::string>());
        g.count = gj.at("count").get<int>();
        g.wake_rate = gj.at("wake_rate").get<double>();
        auto ap = gj.at("action_probs");
        for (int k = 0; k < 3; ++k) g.action_probs[k] = ap.at(k).get<double>();
        g.size_dist = categorical_from_json(gj.at("size_dist"));
        g.offset_geom_p = gj.value("offset_geom_p", 0.5);
        g.half_spread = gj.value("half_spread", int64_t{0});
        g.requote_tolerance = gj.value("requote_tolerance", int64_t{0});
        g.switch_prob = gj.value("switch_prob", 0.0);
        g.threshold = gj.value("threshold", 0.0);
        g.window = gj.value("window", 0);
        c.groups.push_back(g);
    }
    c.validate();
    return c;
}

SimConfig SimConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

uint64_t SimConfig::hash() const { return util::fnv1a64(to_json()); }

SimConfig SimConfig::defaults() {
    SimConfig c;
    c.seed = 42;
    c.days = 1;
    c.day_length_s = 23'400;
    c.M = 10;
    c.initial_price = 10'000;
    c.fundamental_step_std = 0.15;

    auto group = [&](Archetype a, int count, double rate,
                     std::array<double, 3> ap, Categorical sizes) {
        AgentGroupSpec g;
        g.group_id = static_cast<int>(c.groups.size());
        g.archetype = a;
        g.count = count;
        g.wake_rate = rate;
        g.action_probs = ap;
        g.size_dist = std::move(sizes);
        c.groups.push_back(g);
        return &c.groups.back();
    };

    // Market makers: tight/medium/wide quoters keeping the touch populated.
    // Quote sizes are kept on the same scale as taker orders so the touch
    // actually turns over and the mid can move.
    auto* g0 = group(Archetype::market_maker, 5, 0.20, {0, 0, 0},
                     {{10, 20, 30}, {0.4, 0.4, 0.2}});
    g0->half_spread = 1;
    g0->requote_tolerance = 1;
    auto* g1 = group(Archetype::market_maker, 5, 0.05, {0, 0, 0},
                     {{40, 80}, {0.6, 0.4}});
    g1->half_spread = 3;
    g1->requote_tolerance = 2;
    auto* g2 = group(Archetype::market_maker, 5, 0.02, {0, 0, 0},
                     {{60, 120}, {0.5, 0.5}});
    g2->half_spread = 6;
    g2->requote_tolerance = 3;

    // Market takers: persistent-direction liquidity consumers; switch_prob
    // sets how long a directional run lasts.
    auto* g3 = group(Archetype::market_taker, 5, 0.050, {0, 1, 0},
                     {{20, 50, 100, 200}, {0.30, 0.35, 0.25, 0.10}});
    g3->switch_prob = 0.05;
    auto* g4 = group(Archetype::market_taker, 5, 0.040, {0, 1, 0},
                     {{20, 50, 100}, {0.4, 0.4, 0.2}});
    g4->switch_prob = 0.10;
    auto* g5 = group(Archetype::market_taker, 5, 0.030, {0, 1, 0},
                     {{10, 20, 50}, {0.35, 0.40, 0.25}});
    g5->switch_prob = 0.20;

    // Fundamentalists: market orders against mispricings, tiered by how big
    // a gap they demand before trading. Their aggregate flow is what keeps
    // the traded price tracking the fundamental.
    auto* g6 = group(Archetype::fundamentalist, 5, 0.050, {0, 1, 0},
                     {{50, 100, 200}, {0.4, 0.4, 0.2}});
    g6->threshold = 3;
    auto* g7 = group(Archetype::fundamentalist, 5, 0.040, {0, 1, 0},
                     {{100, 200}, {0.6, 0.4}});
    g7->threshold = 6;
    auto* g8 = group(Archetype::fundamentalist, 5, 0.030, {0, 1, 0},
                     {{100, 200, 400}, {0.4, 0.4, 0.2}});
    g8->threshold = 10;
    auto* g9 = group(Archetype::fundamentalist, 5, 0.020, {0, 1, 0},
                     {{200, 400}, {0.5, 0.5}});
    g9->threshold = 15;

    // Chartists: momentum and reversion on short/long message windows.
    Categorical csizes{{5, 10, 20, 50}, {0.25, 0.35, 0.25, 0.15}};
    auto* g10 = group(Archetype::chartist_momentum, 10, 0.010,
                      {0.45, 0.10, 0.45}, csizes);
    g10->window = 60;
    g10->offset_geom_p = 0.5;
    auto* g11 = group(Archetype::chartist_momentum, 10, 0.006,
                      {0.45, 0.10, 0.45}, csizes);
    g11->window = 150;
    g11->offset_geom_p = 0.5;
    auto* g12 = group(Archetype::chartist_reversion, 10, 0.010,
                      {0.45, 0.10, 0.45}, csizes);
    g12->window = 60;
    g12->offset_geom_p = 0.5;
    auto* g13 = group(Archetype::chartist_reversion, 10, 0.006,
                      {0.45, 0.10, 0.45}, csizes);
    g13->window = 150;
    g13->offset_geom_p = 0.5;

    // Noise crowd: the bulk of message flow and the modelling target. Their
    // resting orders sit well behind the touch so the maker layers absorb
    // most aggressive flow; that keeps noise inventories populated and the
    // recorded action mix close to the configured probabilities.
    auto* g14 = group(Archetype::noise, 1500, 200.0 / 23'400.0,
                      {0.45, 0.10, 0.45},
                      {{1, 2, 5, 10, 20, 50, 100},
                       {0.30, 0.20, 0.15, 0.15, 0.10, 0.06, 0.04}});
    g14->offset_geom_p = 0.04;

    c.validate();
    return c;
}

} // namespace mimic::abm
