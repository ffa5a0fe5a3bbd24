#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace mmdial::io {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Strips a leading UTF-8 byte-order mark, if present.
std::string_view strip_bom(std::string_view s);

std::string read_file(const std::filesystem::path& path);

// Calls `fn(record, line_number)` for every non-blank line of a JSONL file.
// Throws ParseError naming the line on malformed JSON.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn);

// Writes to a sibling temp file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace mmdial::io
