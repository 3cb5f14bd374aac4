#include "liptok/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>

#include "liptok/textio.hpp"

namespace liptok {

namespace {

constexpr char kMagic[4] = {'L', 'T', 'O', 'K'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::uint8_t kDtypeF32 = 2;

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
  public:
    Reader(const std::string& bytes, std::string path)
        : bytes_(bytes), path_(std::move(path)) {}

    const char* take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw IoError(path_ + ": truncated checkpoint");
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint16_t u16() {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(2));
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32() {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(4));
        return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(8));
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    std::size_t pos() const { return pos_; }

  private:
    const std::string& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

std::vector<NamedTensor> checkpoint_tensors(ActionTokenizer& tok) {
    std::vector<NamedTensor> out;
    for (const NamedParam& p : tok.params()) out.push_back({p.name, p.tensor});
    out.push_back({"norm.scale", tok.normalization_scale()});
    out.push_back({"norm.offset", tok.normalization_offset()});
    out.push_back({"meta.trained_steps",
                   Tensor::scalar(static_cast<Scalar>(tok.trained_steps))});
    return out;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t size) {
    static const auto table = make_crc_table();
    std::uint32_t c = 0xFFFFFFFFu;
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) c = table[(c ^ p[i]) & 0xff] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(ActionTokenizer& tokenizer, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    const std::string cfg = tokenizer.config().canonical_text();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;

    const auto tensors = checkpoint_tensors(tokenizer);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(sizeof(Scalar) == 8 ? kDtypeF64 : kDtypeF32));
        out.push_back(static_cast<char>(tensor.rank()));
        for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (Scalar v : tensor.values()) {
            if constexpr (sizeof(Scalar) == 8) {
                put_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
            } else {
                put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
            }
        }
    }
    put_u32(out, crc32(out.data(), out.size()));
    write_file_atomic(path, out);
}

ActionTokenizer load_checkpoint(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 10) throw IoError(path + ": truncated checkpoint");
    // Validate the trailing CRC over everything before it.
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t stored =
        static_cast<unsigned char>(bytes[body]) |
        (static_cast<unsigned char>(bytes[body + 1]) << 8) |
        (static_cast<unsigned char>(bytes[body + 2]) << 16) |
        (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[body + 3])) << 24);
    if (crc32(bytes.data(), body) != stored) {
        throw IoError(path + ": checksum mismatch");
    }

    Reader r(bytes, path);
    if (std::memcmp(r.take(4), kMagic, 4) != 0) throw IoError(path + ": bad magic");
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t cfg_len = r.u32();
    const std::string cfg_text(r.take(cfg_len), cfg_len);
    TokenizerConfig cfg = TokenizerConfig::from_text(cfg_text);

    Rng rng(0);
    ActionTokenizer tok(cfg, rng);

    const std::uint32_t count = r.u32();
    std::vector<NamedTensor> expected = checkpoint_tensors(tok);
    std::size_t matched = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16();
        const std::string name(r.take(name_len), name_len);
        const std::uint8_t dtype = static_cast<std::uint8_t>(*r.take(1));
        const std::uint8_t rank = static_cast<std::uint8_t>(*r.take(1));
        Shape shape;
        for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(r.u32());
        const std::size_t n = shape_numel(shape);
        std::vector<Scalar> data(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (dtype == kDtypeF64) {
                data[j] = static_cast<Scalar>(std::bit_cast<double>(r.u64()));
            } else if (dtype == kDtypeF32) {
                data[j] = static_cast<Scalar>(std::bit_cast<float>(r.u32()));
            } else {
                throw IoError(path + ": unknown dtype tag " + std::to_string(dtype));
            }
        }
        NamedTensor* slot = nullptr;
        for (auto& e : expected) {
            if (e.name == name) {
                slot = &e;
                break;
            }
        }
        if (!slot) throw IoError(path + ": unexpected tensor '" + name + "'");
        if (name == "meta.trained_steps") {
            tok.trained_steps = static_cast<std::int64_t>(data.at(0));
            ++matched;
            continue;
        }
        if (slot->tensor.shape() != shape) {
            throw IoError(path + ": tensor '" + name + "' has shape " + shape_to_string(shape) +
                          ", expected " + shape_to_string(slot->tensor.shape()));
        }
        std::copy(data.begin(), data.end(), slot->tensor.values().begin());
        ++matched;
    }
    if (matched != expected.size()) {
        throw IoError(path + ": checkpoint is missing tensors (" + std::to_string(matched) + "/" +
                      std::to_string(expected.size()) + ")");
    }
    return tok;
}

}  // namespace liptok
