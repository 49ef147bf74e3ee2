#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdiqkd {

class InsufficientKeyError : public std::runtime_error {
  public:
    InsufficientKeyError(std::uint64_t required_bits, std::uint64_t available_bits);
    std::uint64_t required_bits() const { return required_; }
    std::uint64_t available_bits() const { return available_; }

  private:
    std::uint64_t required_;
    std::uint64_t available_;
};

/// Pad bits plus a consumption offset. The bit sequence is immutable once
/// loaded; the offset only moves forward (via otp_xor), so no key bit can be
/// used twice through this interface. On disk: magic "OTPKEY01", bit length
/// and consumed offset as big-endian u64, then the bits packed MSB-first.
class KeyMaterial {
  public:
    KeyMaterial() = default;
    static KeyMaterial from_bits(std::vector<std::uint8_t> packed, std::uint64_t bit_length,
                                 std::uint64_t consumed = 0);
    static KeyMaterial load(const std::string& path);
    void save(const std::string& path) const;

    std::uint64_t bit_length() const { return bit_length_; }
    std::uint64_t consumed() const { return consumed_; }
    std::uint64_t remaining_bits() const { return bit_length_ - consumed_; }

    /// Bit at absolute position (0 = MSB of first byte).
    bool bit(std::uint64_t position) const;

  private:
    std::vector<std::uint8_t> packed_;
    std::uint64_t bit_length_ = 0;
    std::uint64_t consumed_ = 0;

    friend std::vector<std::uint8_t> otp_xor(const std::vector<std::uint8_t>&, KeyMaterial&);
};

/// XORs message with the next 8*|message| unused key bits and advances the
/// offset. Applying it twice from the same offset restores the message.
/// Throws InsufficientKeyError (with counts) rather than reusing or wrapping.
std::vector<std::uint8_t> otp_xor(const std::vector<std::uint8_t>& message, KeyMaterial& key);

/// Deterministic key generation from a seed (demo/testing convenience; real
/// pads come out of the QKD pipeline).
KeyMaterial generate_key(std::uint64_t bit_length, std::uint64_t seed);

}  // namespace mdiqkd
