#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mimic/codec/message.hpp"

namespace mimic::codec {

/// Per-message sidecar used for sample selection and evaluation ground truth.
/// Written verbatim to meta.bin, so the layout is part of the on-disk format.
struct DatasetMeta {
    int32_t agent_id = -1;
    uint16_t group_id = 0xffff; // 0xffff = unattributed (book seeding)
    uint16_t day = 0;
    int64_t mid2 = 0;     // pre-message, from the paired snapshot
    int32_t best_bid = 0; // pre-message best quotes, 0 when that side is empty
    int32_t best_ask = 0;
};
static_assert(sizeof(DatasetMeta) == 24, "meta.bin record layout changed");

struct EncodeStats {
    int64_t messages = 0;
    ClipCounts clips;
    int64_t book_volume_clips = 0; // levels whose volume saturated at ±999
};

/// Converts a simulation output directory (message/book CSV pairs plus
/// config.json) into the binary training format: tokens.bin (uint16, 23 per
/// message), books.bin (int16, 2M+1 per message), meta.bin and manifest.json.
EncodeStats encode_dataset(const std::string& sim_dir, const std::string& out_dir);

/// Memory-resident view of an encoded dataset.
class Dataset {
public:
    static Dataset load(const std::string& dir);

    int64_t size() const { return static_cast<int64_t>(meta_.size()); }
    int M() const { return M_; }
    int book_width() const { return 2 * M_ + 1; }

    const uint16_t* tokens(int64_t i) const {
        return tokens_.data() + i * pos::TOKENS_PER_MESSAGE;
    }
    const int16_t* book(int64_t i) const { return books_.data() + i * book_width(); }
    const DatasetMeta& meta(int64_t i) const { return meta_[static_cast<size_t>(i)]; }

    struct DayRange {
        int day = 0;
        int64_t begin = 0;
        int64_t end = 0; // past-the-end message index
    };
    const std::vector<DayRange>& days() const { return days_; }

    uint64_t vocab_hash() const { return vocab_hash_; }

private:
    int M_ = 0;
    std::vector<uint16_t> tokens_;
    std::vector<int16_t> books_;
    std::vector<DatasetMeta> meta_;
    std::vector<DayRange> days_;
    uint64_t vocab_hash_ = 0;
};

} // namespace mimic::codec
