#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace grape {

inline constexpr const char* tool_name = "grape";
inline constexpr const char* tool_version = "0.1.0";

/// Whole-file read. Throws grape::Error when the file cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Little-endian binary fields for checkpoints and vocabularies. Readers
/// throw ValidationError on truncated input.
namespace bin {
void put_u64(std::ostream& out, std::uint64_t v);
void put_f64(std::ostream& out, double v);
void put_string(std::ostream& out, const std::string& s);
std::uint64_t get_u64(std::istream& in);
double get_f64(std::istream& in);
std::string get_string(std::istream& in);
void expect_magic(std::istream& in, const std::string& magic, const char* what);
} // namespace bin

} // namespace grape
