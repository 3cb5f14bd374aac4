#pragma once

#include <string>

#include "liptok/tokenizer.hpp"

namespace liptok {

// Binary checkpoint: magic "LTOK", u16 version, length-prefixed canonical
// config text, tensor directory (name, dtype tag, rank, u32 dims, raw
// little-endian data), trailing CRC32 of all prior bytes. Round trips are
// bit-exact on all learnable state plus the normalization tensors.
void save_checkpoint(ActionTokenizer& tokenizer, const std::string& path);
ActionTokenizer load_checkpoint(const std::string& path);

// CRC32 (IEEE reflected polynomial), exposed for tests.
std::uint32_t crc32(const void* data, std::size_t size);

}  // namespace liptok
