#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "trikey/group.hpp"
#include "trikey/oracle.hpp"
#include "trikey/types.hpp"

namespace trikey {

struct RandomCaseLimits {
    std::size_t max_docs = 20;
    std::size_t max_words = 500;
    std::uint32_t max_alphabet = 50;
};

/// A random occurrence array and one group to build from it.
struct RandomCase {
    std::vector<DRecord> d;
    std::uint32_t max_distance = 5;
    std::uint32_t alphabet = 1;
    GroupTask task;
};

inline constexpr std::uint32_t kRandomDistances[] = {1, 2, 3, 5, 7, 9};

/// Documents of random length; each word position carries zero, one or two
/// lemmas drawn with a skew toward small numbers. Ranges are drawn so that
/// group_s >= index_s, as in any layout.
inline RandomCase random_case(std::mt19937_64& rng, const RandomCaseLimits& limits = {}) {
    auto uniform = [&](std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
    };
    RandomCase c;
    c.max_distance = kRandomDistances[uniform(0, std::size(kRandomDistances) - 1)];
    c.alphabet = static_cast<std::uint32_t>(uniform(1, limits.max_alphabet));
    const auto docs = uniform(1, limits.max_docs);
    const double gap_rate = static_cast<double>(uniform(0, 60)) / 100.0;
    const double multi_rate = static_cast<double>(uniform(0, 25)) / 100.0;
    std::geometric_distribution<std::uint32_t> skew(std::min(0.9, 3.0 / c.alphabet));
    std::bernoulli_distribution gap(gap_rate), multi(multi_rate);
    auto draw = [&] { return std::min<std::uint32_t>(skew(rng), c.alphabet - 1); };
    for (DocId id = 0; id < docs; ++id) {
        const auto words = uniform(0, limits.max_words);
        for (Position p = 0; p < words; ++p) {
            if (gap(rng)) continue;
            std::vector<LemmaId> lems{draw()};
            if (multi(rng)) lems.push_back(static_cast<LemmaId>(uniform(0, c.alphabet - 1)));
            std::sort(lems.begin(), lems.end());
            lems.erase(std::unique(lems.begin(), lems.end()), lems.end());
            for (auto l : lems) c.d.push_back({id, p, l});
        }
    }
    const auto ws = c.alphabet;
    auto& t = c.task;
    t.index_s = static_cast<LemmaId>(uniform(0, ws - 1));
    t.index_e = static_cast<LemmaId>(uniform(t.index_s, ws - 1));
    t.group_s = static_cast<LemmaId>(uniform(t.index_s, ws - 1));
    t.group_e = static_cast<LemmaId>(uniform(t.group_s, ws - 1));
    return c;
}

inline OracleConfig oracle_config(const GroupTask& task, std::uint32_t max_distance) {
    return {max_distance, task.index_s, task.index_e, task.group_s, task.group_e};
}

/// Runs one queue variant over `d` and collects its postings.
inline PostingMap run_variant(const std::vector<DRecord>& d, GroupTask task, Variant v, std::uint32_t max_distance) {
    task.variant = v;
    PostingMap out;
    auto sink = [&](const TripleKey& k, const TriplePosting& p) { out[k].push_back(p); };
    process_group(d, task, max_distance, sink);
    for (auto& [k, ps] : out) std::sort(ps.begin(), ps.end());
    return out;
}

struct Divergence {
    TripleKey key;
    std::vector<TriplePosting> expected;
    std::vector<TriplePosting> actual;
};

inline std::optional<Divergence> first_divergence(const PostingMap& expected, const PostingMap& actual) {
    auto e = expected.begin();
    auto a = actual.begin();
    static const std::vector<TriplePosting> none;
    while (e != expected.end() || a != actual.end()) {
        if (a == actual.end() || (e != expected.end() && e->first < a->first)) return Divergence{e->first, e->second, none};
        if (e == expected.end() || a->first < e->first) return Divergence{a->first, none, a->second};
        if (e->second != a->second) return Divergence{e->first, e->second, a->second};
        ++e;
        ++a;
    }
    return std::nullopt;
}

inline std::string describe(const std::vector<TriplePosting>& ps, std::size_t limit = 8) {
    std::string out = "[";
    for (std::size_t i = 0; i < ps.size() && i < limit; ++i) {
        if (i) out += ", ";
        out += "(" + std::to_string(ps[i].id) + "," + std::to_string(ps[i].p) + "," + std::to_string(ps[i].d1) + "," +
               std::to_string(ps[i].d2) + ")";
    }
    if (ps.size() > limit) out += ", ... " + std::to_string(ps.size()) + " total";
    return out + "]";
}

}  // namespace trikey
