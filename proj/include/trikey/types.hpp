#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace trikey {

using DocId = std::uint32_t;
using Position = std::uint32_t;
/// Ordinal of a lemma in the frequency-ordered lemma list (FL-number).
using LemmaId = std::uint32_t;
using Distance = std::int32_t;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, layout or flags.
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed or corrupted on-disk data.
struct FormatError : Error {
    using Error::Error;
};

/// A query the three-component index cannot answer.
struct QueryError : Error {
    using Error::Error;
};

/// One occurrence of a stop lemma: document, word position, FL-number.
struct DRecord {
    DocId id = 0;
    Position p = 0;
    LemmaId lem = 0;

    friend auto operator<=>(const DRecord&, const DRecord&) = default;
};

/// Canonical three-component key, f <= s <= t.
struct TripleKey {
    LemmaId f = 0;
    LemmaId s = 0;
    LemmaId t = 0;

    [[nodiscard]] bool canonical() const noexcept { return f <= s && s <= t; }

    friend auto operator<=>(const TripleKey&, const TripleKey&) = default;
};

/// Occurrence of a key: the f-word at (id, p), the s-word at p + d1 and the
/// t-word at p + d2.
struct TriplePosting {
    DocId id = 0;
    Position p = 0;
    Distance d1 = 0;
    Distance d2 = 0;

    friend auto operator<=>(const TriplePosting&, const TriplePosting&) = default;
};

inline bool valid_posting(const TriplePosting& posting, std::uint32_t max_distance) noexcept {
    auto within = [max_distance](Distance d) {
        return d != 0 && static_cast<std::uint32_t>(d < 0 ? -d : d) <= max_distance;
    };
    return within(posting.d1) && within(posting.d2) && posting.d1 != posting.d2 &&
           static_cast<std::int64_t>(posting.p) + posting.d1 >= 0 &&
           static_cast<std::int64_t>(posting.p) + posting.d2 >= 0;
}

enum class Variant { Simplified, Optimized };

inline const char* to_string(Variant v) noexcept {
    return v == Variant::Simplified ? "simplified" : "optimized";
}

inline Variant parse_variant(const std::string& name) {
    if (name == "simplified") return Variant::Simplified;
    if (name == "optimized") return Variant::Optimized;
    throw ConfigError("unknown algorithm variant: " + name);
}

struct BuildConfig {
    std::uint32_t ws_count = 700;
    std::uint32_t fu_count = 2100;
    std::uint32_t max_distance = 5;
    std::uint32_t thread_limit = 4;
    /// Budget for the encoded occurrence array of one iteration, in bytes.
    std::size_t ram_limit = std::size_t{256} << 20;
    /// Index files per phase, in layout order. Empty means a single phase.
    std::vector<std::size_t> phases;
    Variant variant = Variant::Optimized;

    void validate() const {
        if (ws_count < 1) throw ConfigError("ws_count must be at least 1");
        if (max_distance < 1) throw ConfigError("max_distance must be at least 1");
        if (thread_limit < 1) throw ConfigError("thread_limit must be at least 1");
        if (ram_limit == 0) throw ConfigError("ram_limit must be positive");
        for (auto n : phases)
            if (n == 0) throw ConfigError("phase groups must be non-empty");
    }

    void validate(std::size_t file_count) const {
        validate();
        if (!phases.empty() &&
            std::accumulate(phases.begin(), phases.end(), std::size_t{0}) != file_count)
            throw ConfigError("phase group sizes must sum to the number of index files (" +
                              std::to_string(file_count) + ")");
    }
};

inline std::string to_string(const TripleKey& k) {
    return "(" + std::to_string(k.f) + "," + std::to_string(k.s) + "," + std::to_string(k.t) + ")";
}

}  // namespace trikey

template <>
struct std::hash<trikey::TripleKey> {
    std::size_t operator()(const trikey::TripleKey& k) const noexcept {
        std::uint64_t h = (std::uint64_t{k.f} << 42) ^ (std::uint64_t{k.s} << 21) ^ k.t;
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
        return static_cast<std::size_t>(h);
    }
};
