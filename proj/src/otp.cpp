#include "mdiqkd/otp.hpp"

#include <fstream>
#include <sstream>

#include "mdiqkd/rng.hpp"

namespace mdiqkd {
namespace {

constexpr char kMagic[8] = {'O', 'T', 'P', 'K', 'E', 'Y', '0', '1'};

std::uint64_t packed_size(std::uint64_t bit_length) { return (bit_length + 7) / 8; }

void put_u64_be(std::ostream& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.put(static_cast<char>((v >> shift) & 0xff));
}

std::uint64_t get_u64_be(std::istream& in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        const int c = in.get();
        if (c == std::istream::traits_type::eof())
            throw std::runtime_error("key file truncated in header");
        v = (v << 8) | static_cast<std::uint64_t>(c & 0xff);
    }
    return v;
}

}  // namespace

InsufficientKeyError::InsufficientKeyError(std::uint64_t required_bits,
                                           std::uint64_t available_bits)
    : std::runtime_error([&] {
          std::ostringstream msg;
          msg << "insufficient key material: " << required_bits << " bits required, "
              << available_bits << " available";
          return msg.str();
      }()),
      required_(required_bits),
      available_(available_bits) {}

KeyMaterial KeyMaterial::from_bits(std::vector<std::uint8_t> packed, std::uint64_t bit_length,
                                   std::uint64_t consumed) {
    if (packed.size() != packed_size(bit_length))
        throw std::invalid_argument("key material: packed size does not match bit length");
    if (consumed > bit_length)
        throw std::invalid_argument("key material: consumed offset exceeds bit length");
    KeyMaterial key;
    key.packed_ = std::move(packed);
    key.bit_length_ = bit_length;
    key.consumed_ = consumed;
    return key;
}

KeyMaterial KeyMaterial::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open key file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || !std::equal(magic, magic + 8, kMagic))
        throw std::runtime_error("not a key file (bad magic): " + path);
    const std::uint64_t bit_length = get_u64_be(in);
    const std::uint64_t consumed = get_u64_be(in);
    std::vector<std::uint8_t> packed(packed_size(bit_length));
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != packed.size())
        throw std::runtime_error("key file truncated: " + path);
    return from_bits(std::move(packed), bit_length, consumed);
}

void KeyMaterial::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write key file: " + path);
    out.write(kMagic, 8);
    put_u64_be(out, bit_length_);
    put_u64_be(out, consumed_);
    out.write(reinterpret_cast<const char*>(packed_.data()),
              static_cast<std::streamsize>(packed_.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

bool KeyMaterial::bit(std::uint64_t position) const {
    if (position >= bit_length_) throw std::out_of_range("key bit index out of range");
    return (packed_[position / 8] >> (7 - position % 8)) & 1;
}

std::vector<std::uint8_t> otp_xor(const std::vector<std::uint8_t>& message, KeyMaterial& key) {
    const std::uint64_t required = 8 * static_cast<std::uint64_t>(message.size());
    if (required > key.remaining_bits())
        throw InsufficientKeyError(required, key.remaining_bits());

    std::vector<std::uint8_t> out(message.size());
    const std::uint64_t base = key.consumed_;
    for (std::size_t i = 0; i < message.size(); ++i) {
        const std::uint64_t pos = base + 8 * i;
        std::uint8_t kb;
        if (pos % 8 == 0) {
            kb = key.packed_[pos / 8];
        } else {
            kb = 0;  // offsets can be unaligned if the file was produced elsewhere
            for (int b = 0; b < 8; ++b)
                kb = static_cast<std::uint8_t>((kb << 1) | (key.bit(pos + b) ? 1 : 0));
        }
        out[i] = message[i] ^ kb;
    }
    key.consumed_ += required;
    return out;
}

KeyMaterial generate_key(std::uint64_t bit_length, std::uint64_t seed) {
    std::vector<std::uint8_t> packed(packed_size(bit_length));
    rng::Stream stream(rng::mix64(seed));
    for (std::size_t i = 0; i < packed.size(); i += 8) {
        const std::uint64_t word = stream.next_u64();
        for (std::size_t b = 0; b < 8 && i + b < packed.size(); ++b)
            packed[i + b] = static_cast<std::uint8_t>((word >> (56 - 8 * b)) & 0xff);
    }
    // Zero any padding bits past bit_length in the final byte.
    if (bit_length % 8 != 0 && !packed.empty())
        packed.back() &= static_cast<std::uint8_t>(0xff << (8 - bit_length % 8));
    return KeyMaterial::from_bits(std::move(packed), bit_length);
}

}  // namespace mdiqkd
