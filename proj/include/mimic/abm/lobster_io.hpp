#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mimic/codec/message.hpp"
#include "mimic/lob/book.hpp"

namespace mimic::abm {

// Flat-file event stream, one message CSV plus one book CSV per day.
// NA fields are written as empty cells; everything is LF-terminated.

extern const char* kMessageHeader;
extern const char* kBookHeader;

std::string format_message_row(const codec::MessageRecord& msg);
std::string format_book_row(const lob::BookSnapshot& snap);

/// Parses a message CSV row (no trailing newline). Throws std::runtime_error
/// on malformed input.
codec::MessageRecord parse_message_row(std::string_view row);

/// Parses a book CSV row back into a snapshot. Throws on malformed input.
lob::BookSnapshot parse_book_row(std::string_view row);

/// Reads a whole message file (skipping the header). Throws on malformed rows.
std::vector<codec::MessageRecord> read_message_file(const std::string& path);

std::string message_file_name(int day);
std::string book_file_name(int day);

} // namespace mimic::abm
