#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace energetext::io {

/// Reads a whole file. Throws MissingInput if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes a whole file, creating parent directories. Throws Io on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Hex SHA-256 of a byte string / of a file's contents.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// Little-endian float64 packing used by the model containers.
std::string pack_f64(std::span<const double> values);
std::vector<double> unpack_f64(std::string_view bytes);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> csv_split(std::string_view line);

/// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string> split_lines(std::string_view text);

std::string_view trim(std::string_view s);

}  // namespace energetext::io
