#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gfmlab {

// Locale-independent formatting of a double with 17 significant digits
// (round-trip exact), via std::to_chars.
std::string format_double(double v);
void append_double(std::string& out, double v);

// Shorter general formatting for plot labels.
std::string format_double_short(double v, int precision = 6);

// FNV-1a 64-bit hash, used as the deterministic config digest in artifact
// headers.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace gfmlab
