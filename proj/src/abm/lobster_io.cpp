#include "mimic/abm/lobster_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mimic::abm {

using codec::Dir;
using codec::MessageRecord;
using codec::MsgType;

const char* kMessageHeader =
    "time_s,time_ns,type,order_id,size,price,direction,dt_s,dt_ns,"
    "ref_price,ref_size,ref_time_s,ref_time_ns,agent_id,group_id";
const char* kBookHeader = "mid2,mid_change,levels";

namespace {

const char* type_name(MsgType t) {
    switch (t) {
        case MsgType::limit: return "limit";
        case MsgType::market: return "market";
        case MsgType::cancel: return "cancel";
    }
    return "?";
}

void append_int(std::string& out, int64_t v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

class RowReader {
public:
    explicit RowReader(std::string_view row) : row_(row) {}

    std::string_view next() {
        if (pos_ > row_.size()) throw std::runtime_error("row has too few columns");
        size_t comma = row_.find(',', pos_);
        size_t end = comma == std::string_view::npos ? row_.size() : comma;
        std::string_view cell = row_.substr(pos_, end - pos_);
        pos_ = comma == std::string_view::npos ? row_.size() + 1 : comma + 1;
        return cell;
    }

    int64_t next_int(const char* what) {
        std::string_view cell = next();
        int64_t v = 0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size())
            throw std::runtime_error(std::string("bad integer in column ") + what);
        return v;
    }

    bool next_opt_int(const char* what, int64_t& v) {
        std::string_view cell = next();
        if (cell.empty()) return false;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size())
            throw std::runtime_error(std::string("bad integer in column ") + what);
        return true;
    }

    bool done() const { return pos_ > row_.size(); }

private:
    std::string_view row_;
    size_t pos_ = 0;
};

} // namespace

std::string format_message_row(const MessageRecord& msg) {
    std::string out;
    out.reserve(96);
    append_int(out, msg.time_s);
    out.push_back(',');
    append_int(out, msg.time_ns);
    out.push_back(',');
    out += type_name(msg.type);
    out.push_back(',');
    append_int(out, msg.order_id);
    out.push_back(',');
    append_int(out, msg.size);
    out.push_back(',');
    if (msg.has_price) append_int(out, msg.price);
    out.push_back(',');
    out += msg.direction == Dir::buy ? "buy" : "sell";
    out.push_back(',');
    append_int(out, msg.dt_s);
    out.push_back(',');
    append_int(out, msg.dt_ns);
    out.push_back(',');
    if (msg.has_ref) append_int(out, msg.ref_price);
    out.push_back(',');
    if (msg.has_ref) append_int(out, msg.ref_size);
    out.push_back(',');
    if (msg.has_ref) append_int(out, msg.ref_time_s);
    out.push_back(',');
    if (msg.has_ref) append_int(out, msg.ref_time_ns);
    out.push_back(',');
    append_int(out, msg.agent_id);
    out.push_back(',');
    append_int(out, msg.group_id);
    return out;
}

std::string format_book_row(const lob::BookSnapshot& snap) {
    std::string out;
    out.reserve(32 + snap.levels.size() * 12);
    append_int(out, snap.mid2);
    out.push_back(',');
    append_int(out, snap.mid_change);
    out.push_back(',');
    for (size_t i = 0; i < snap.levels.size(); ++i) {
        if (i) out.push_back(' ');
        append_int(out, snap.levels[i].offset);
        out.push_back(':');
        append_int(out, snap.levels[i].volume);
    }
    return out;
}

MessageRecord parse_message_row(std::string_view row) {
    RowReader r(row);
    MessageRecord m;
    m.time_s = r.next_int("time_s");
    m.time_ns = r.next_int("time_ns");
    std::string_view type = r.next();
    if (type == "limit") m.type = MsgType::limit;
    else if (type == "market") m.type = MsgType::market;
    else if (type == "cancel") m.type = MsgType::cancel;
    else throw std::runtime_error("unknown message type: " + std::string(type));
    m.order_id = r.next_int("order_id");
    m.size = r.next_int("size");
    int64_t price = 0;
    m.has_price = r.next_opt_int("price", price);
    m.price = price;
    std::string_view dir = r.next();
    if (dir == "buy") m.direction = Dir::buy;
    else if (dir == "sell") m.direction = Dir::sell;
    else throw std::runtime_error("unknown direction: " + std::string(dir));
    m.dt_s = r.next_int("dt_s");
    m.dt_ns = r.next_int("dt_ns");
    int64_t rp = 0, rs = 0, rts = 0, rtn = 0;
    bool h0 = r.next_opt_int("ref_price", rp);
    bool h1 = r.next_opt_int("ref_size", rs);
    bool h2 = r.next_opt_int("ref_time_s", rts);
    bool h3 = r.next_opt_int("ref_time_ns", rtn);
    if (h0 != h1 || h1 != h2 || h2 != h3)
        throw std::runtime_error("ref columns must all be set or all empty");
    m.has_ref = h0;
    m.ref_price = rp;
    m.ref_size = rs;
    m.ref_time_s = rts;
    m.ref_time_ns = rtn;
    m.agent_id = static_cast<int32_t>(r.next_int("agent_id"));
    m.group_id = static_cast<int32_t>(r.next_int("group_id"));
    if (!r.done()) throw std::runtime_error("row has too many columns");
    return m;
}

lob::BookSnapshot parse_book_row(std::string_view row) {
    lob::BookSnapshot snap;
    RowReader r(row);
    snap.mid2 = r.next_int("mid2");
    snap.mid_change = r.next_int("mid_change");
    std::string_view levels = r.next();
    if (!r.done()) throw std::runtime_error("book row has too many columns");
    size_t pos = 0;
    while (pos < levels.size()) {
        size_t space = levels.find(' ', pos);
        size_t end = space == std::string_view::npos ? levels.size() : space;
        std::string_view pair = levels.substr(pos, end - pos);
        size_t colon = pair.find(':');
        if (colon == std::string_view::npos)
            throw std::runtime_error("book level missing ':'");
        lob::SnapshotLevel lvl{};
        auto parse_i64 = [](std::string_view s, int64_t& v) {
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            return ec == std::errc{} && ptr == s.data() + s.size();
        };
        if (!parse_i64(pair.substr(0, colon), lvl.offset) ||
            !parse_i64(pair.substr(colon + 1), lvl.volume))
            throw std::runtime_error("bad book level: " + std::string(pair));
        snap.levels.push_back(lvl);
        pos = end + 1;
    }
    return snap;
}

std::vector<MessageRecord> read_message_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    if (line != kMessageHeader)
        throw std::runtime_error("unexpected header in " + path);
    std::vector<MessageRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(parse_message_row(line));
    }
    return out;
}

std::string message_file_name(int day) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "messages_%03d.csv", day);
    return buf;
}

std::string book_file_name(int day) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "books_%03d.csv", day);
    return buf;
}

} // namespace mimic::abm
