#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace proxsafe {

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Writes via a sibling temp file and rename so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, std::string_view content);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Calls `fn(object, line_number)` for every non-blank line. Parse failures are
/// format errors citing path and 1-based line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Shortest decimal that round-trips the float / double.
std::string format_float(float v);
std::string format_double(double v);

// Fixed-point with `decimals` digits; never prints "-0.00".
std::string format_fixed(double v, int decimals);

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view s);

}  // namespace proxsafe
