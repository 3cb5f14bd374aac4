#pragma once

#include <cstdint>
#include <string>

#include "liptok/common.hpp"

namespace liptok {

// Shortest round-trip decimal representation (std::to_chars). Locale-free and
// byte-deterministic, so artifacts containing numbers are reproducible.
std::string fmt_double(double v);
// Fixed-precision variant for human-facing tables.
std::string fmt_fixed(double v, int digits);

// Parses a double; entire string must be consumed.
double parse_double(const std::string& s);
std::int64_t parse_int(const std::string& s);

// Atomically replace `path` with `content` (write temp + rename).
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// FNV-1a over file bytes; used to fingerprint datasets in sweep reports.
std::uint64_t hash_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

}  // namespace liptok
