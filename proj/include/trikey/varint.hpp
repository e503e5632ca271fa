#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trikey/types.hpp"

namespace trikey::varint {

// LEB128: 7 payload bits per byte, high bit set on all but the last byte.
inline void put(std::vector<std::uint8_t>& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(v | 0x80));
        v >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::size_t size(std::uint64_t v) noexcept {
    std::size_t n = 1;
    while (v >= 0x80) {
        v >>= 7;
        ++n;
    }
    return n;
}

inline constexpr std::uint64_t zigzag(std::int64_t v) noexcept {
    return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

inline constexpr std::int64_t unzigzag(std::uint64_t v) noexcept {
    return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

/// Sequential reader over a byte span. Throws FormatError on truncation.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) noexcept : bytes_(bytes) {}

    [[nodiscard]] bool done() const noexcept { return pos_ >= bytes_.size(); }
    [[nodiscard]] std::size_t offset() const noexcept { return pos_; }

    std::uint64_t get() {
        std::uint64_t v = 0;
        for (unsigned shift = 0; shift < 64; shift += 7) {
            if (pos_ >= bytes_.size()) throw FormatError("truncated varint");
            auto b = bytes_[pos_++];
            v |= std::uint64_t{b & 0x7fu} << shift;
            if ((b & 0x80) == 0) return v;
        }
        throw FormatError("varint too long");
    }

    std::uint32_t get32() {
        auto v = get();
        if (v > 0xffffffffULL) throw FormatError("varint exceeds 32 bits");
        return static_cast<std::uint32_t>(v);
    }

    std::int64_t get_signed() { return unzigzag(get()); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace trikey::varint
