#include "mimic/codec/vocab.hpp"

namespace mimic::codec::vocab {

std::string table_csv() {
    std::string out = "block,base,count\n";
    auto row = [&](const char* name, uint16_t base, uint16_t count) {
        out += name;
        out += ',';
        out += std::to_string(base);
        out += ',';
        out += std::to_string(count);
        out += '\n';
    };
    row("pad_hidden", PAD_HIDDEN, 1);
    row("mask", MASK, 1);
    row("na", NA, 1);
    row("type", TYPE_BASE, TYPE_COUNT);
    row("direction", DIR_BASE, DIR_COUNT);
    row("price_sign", SIGN_BASE, SIGN_COUNT);
    row("price_magnitude", PRICE_MAG_BASE, PRICE_MAG_COUNT);
    row("size", SIZE_BASE, SIZE_COUNT);
    row("time_digit", DIGIT_BASE, DIGIT_COUNT);
    row("target", TARGET_BASE, TARGET_COUNT);
    return out;
}

uint64_t table_hash() { return util::fnv1a64(table_csv()); }

} // namespace mimic::codec::vocab
