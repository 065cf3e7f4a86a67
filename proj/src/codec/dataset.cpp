#include "mimic/codec/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mimic/abm/config.hpp"
#include "mimic/abm/lobster_io.hpp"
#include "mimic/codec/book.hpp"
#include "mimic/codec/vocab.hpp"
#include "mimic/util/hash.hpp"

namespace mimic::codec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void write_raw(std::ofstream& out, const T* data, size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <class T>
std::vector<T> read_raw(const std::string& path, size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    in.seekg(0, std::ios::end);
    auto bytes = static_cast<size_t>(in.tellg());
    if (bytes != expected * sizeof(T))
        throw std::runtime_error(path + " has unexpected size");
    in.seekg(0);
    std::vector<T> data(expected);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("short read from " + path);
    return data;
}

} // namespace

EncodeStats encode_dataset(const std::string& sim_dir, const std::string& out_dir) {
    abm::SimConfig cfg = abm::SimConfig::from_file(sim_dir + "/config.json");
    const int M = cfg.M;

    fs::create_directories(out_dir);
    std::ofstream tokens_out(out_dir + "/tokens.bin", std::ios::binary);
    std::ofstream books_out(out_dir + "/books.bin", std::ios::binary);
    std::ofstream meta_out(out_dir + "/meta.bin", std::ios::binary);
    if (!tokens_out || !books_out || !meta_out)
        throw std::runtime_error("cannot create dataset files in " + out_dir);

    EncodeStats stats;
    json day_index = json::array();
    std::vector<int64_t> group_counts(cfg.groups.size(), 0);
    int64_t unattributed = 0;

    for (int day = 0; day < cfg.days; ++day) {
        std::string msg_path = sim_dir + "/" + abm::message_file_name(day);
        std::string book_path = sim_dir + "/" + abm::book_file_name(day);
        std::ifstream msg_in(msg_path);
        std::ifstream book_in(book_path);
        if (!msg_in) throw std::runtime_error("cannot open " + msg_path);
        if (!book_in) throw std::runtime_error("cannot open " + book_path);
        std::string mline, bline;
        if (!std::getline(msg_in, mline) || mline != abm::kMessageHeader)
            throw std::runtime_error("unexpected header in " + msg_path);
        if (!std::getline(book_in, bline) || bline != abm::kBookHeader)
            throw std::runtime_error("unexpected header in " + book_path);

        int64_t begin = stats.messages;
        while (std::getline(msg_in, mline)) {
            if (mline.empty()) continue;
            if (!std::getline(book_in, bline))
                throw std::runtime_error("book file ends before message file: " + book_path);
            MessageRecord msg = abm::parse_message_row(mline);
            lob::BookSnapshot snap = abm::parse_book_row(bline);

            TokenArray toks = encode_message(msg, snap.mid2, &stats.clips);
            write_raw(tokens_out, toks.data(), toks.size());

            std::vector<int16_t> feats = encode_book(snap, M);
            write_raw(books_out, feats.data(), feats.size());
            for (const auto& lvl : snap.levels)
                if (lvl.volume > 999 || lvl.volume < -999) ++stats.book_volume_clips;

            DatasetMeta meta;
            meta.agent_id = msg.agent_id;
            meta.group_id = msg.group_id < 0 ? 0xffff : static_cast<uint16_t>(msg.group_id);
            meta.day = static_cast<uint16_t>(day);
            meta.mid2 = snap.mid2;
            int64_t bb = 0, ba = 0;
            for (const auto& lvl : snap.levels) {
                if (lvl.volume < 0 && bb == 0) bb = (snap.mid2 + lvl.offset) / 2;
                if (lvl.volume > 0 && ba == 0) { ba = (snap.mid2 + lvl.offset) / 2; break; }
            }
            meta.best_bid = static_cast<int32_t>(bb);
            meta.best_ask = static_cast<int32_t>(ba);
            write_raw(meta_out, &meta, 1);

            if (msg.group_id >= 0 && msg.group_id < static_cast<int>(group_counts.size()))
                ++group_counts[static_cast<size_t>(msg.group_id)];
            else
                ++unattributed;
            ++stats.messages;
        }
        if (std::getline(book_in, bline) && !bline.empty())
            throw std::runtime_error("book file has extra rows: " + book_path);
        day_index.push_back({{"day", day}, {"begin", begin}, {"end", stats.messages}});
    }

    json manifest;
    manifest["format_version"] = 1;
    manifest["vocab_hash"] = util::hex64(vocab::table_hash());
    manifest["book_depth"] = M;
    manifest["tokens_per_message"] = pos::TOKENS_PER_MESSAGE;
    manifest["messages"] = stats.messages;
    manifest["days"] = day_index;
    manifest["group_messages"] = group_counts;
    manifest["unattributed_messages"] = unattributed;
    manifest["config_hash"] = util::hex64(cfg.hash());
    manifest["clips"] = {{"price", stats.clips.price},
                         {"size", stats.clips.size},
                         {"ref_price", stats.clips.ref_price},
                         {"ref_size", stats.clips.ref_size},
                         {"dt", stats.clips.dt},
                         {"messages", stats.clips.messages},
                         {"book_volume", stats.book_volume_clips}};
    std::ofstream mf(out_dir + "/manifest.json", std::ios::binary);
    mf << manifest.dump(2) << '\n';

    // Carry the agent configuration along so downstream consumers (training
    // manifests, evaluation ground truths) don't need the simulation dir.
    std::ofstream cf(out_dir + "/config.json", std::ios::binary);
    cf << cfg.to_json() << '\n';
    return stats;
}

Dataset Dataset::load(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw std::runtime_error("cannot open " + dir + "/manifest.json");
    json manifest = json::parse(mf);

    Dataset ds;
    ds.M_ = manifest.at("book_depth").get<int>();
    int64_t n = manifest.at("messages").get<int64_t>();
    std::string vh = manifest.at("vocab_hash").get<std::string>();
    if (vh != util::hex64(vocab::table_hash()))
        throw std::runtime_error("dataset was encoded with a different vocabulary");
    ds.vocab_hash_ = vocab::table_hash();
    if (manifest.at("tokens_per_message").get<int>() != pos::TOKENS_PER_MESSAGE)
        throw std::runtime_error("dataset token layout mismatch");

    auto un = static_cast<size_t>(n);
    ds.tokens_ = read_raw<uint16_t>(dir + "/tokens.bin",
                                    un * static_cast<size_t>(pos::TOKENS_PER_MESSAGE));
    ds.books_ = read_raw<int16_t>(dir + "/books.bin",
                                  un * static_cast<size_t>(2 * ds.M_ + 1));
    ds.meta_ = read_raw<DatasetMeta>(dir + "/meta.bin", un);
    for (const auto& dj : manifest.at("days")) {
        DayRange r;
        r.day = dj.at("day").get<int>();
        r.begin = dj.at("begin").get<int64_t>();
        r.end = dj.at("end").get<int64_t>();
        ds.days_.push_back(r);
    }
    return ds;
}

} // namespace mimic::codec
