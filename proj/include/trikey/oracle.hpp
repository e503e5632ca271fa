#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <span>
#include <vector>

#include "trikey/types.hpp"

namespace trikey {

struct OracleConfig {
    std::uint32_t max_distance = 5;
    LemmaId index_s = 0;
    LemmaId index_e = 0;
    LemmaId group_s = 0;
    LemmaId group_e = 0;
};

/// Key -> sorted, duplicate-free postings.
using PostingMap = std::map<TripleKey, std::vector<TriplePosting>>;

/// Reference enumeration of every posting of a group: all triples of
/// occurrences (F, S, T) in one document with pairwise distinct positions,
/// S and T within max_distance of F, f in the index range, s in the group
/// range, f <= s <= t, and (t > s or T after S). Works document by document
/// over the record multiset; input order does not matter.
inline PostingMap oracle_postings(std::span<const DRecord> records, const OracleConfig& cfg) {
    std::vector<DRecord> sorted(records.begin(), records.end());
    std::sort(sorted.begin(), sorted.end());
    const auto md = static_cast<std::int64_t>(cfg.max_distance);
    PostingMap out;
    for (std::size_t doc_begin = 0; doc_begin < sorted.size();) {
        std::size_t doc_end = doc_begin;
        while (doc_end < sorted.size() && sorted[doc_end].id == sorted[doc_begin].id) ++doc_end;
        std::span<const DRecord> doc(sorted.data() + doc_begin, doc_end - doc_begin);
        auto pos_less = [](const DRecord& r, std::int64_t p) { return std::int64_t{r.p} < p; };
        for (const auto& f : doc) {
            if (f.lem < cfg.index_s || f.lem > cfg.index_e) continue;
            // Only occurrences within [f.p - md, f.p + md] can satisfy the
            // distance predicate below.
            auto lo = std::lower_bound(doc.begin(), doc.end(), std::int64_t{f.p} - md, pos_less);
            auto hi = std::lower_bound(doc.begin(), doc.end(), std::int64_t{f.p} + md + 1, pos_less);
            std::span<const DRecord> window(lo, hi);
            for (const auto& s : window) {
                const std::int64_t d1 = std::int64_t{s.p} - std::int64_t{f.p};
                if (s.p == f.p || std::llabs(d1) > md) continue;
                if (s.lem < cfg.group_s || s.lem > cfg.group_e || s.lem < f.lem) continue;
                for (const auto& t : window) {
                    const std::int64_t d2 = std::int64_t{t.p} - std::int64_t{f.p};
                    if (t.p == f.p || t.p == s.p || std::llabs(d2) > md) continue;
                    if (t.lem < s.lem) continue;
                    if (!(t.lem > s.lem || t.p > s.p)) continue;
                    out[{f.lem, s.lem, t.lem}].push_back(
                        {f.id, f.p, static_cast<Distance>(d1), static_cast<Distance>(d2)});
                }
            }
        }
        doc_begin = doc_end;
    }
    for (auto& [key, postings] : out) {
        std::sort(postings.begin(), postings.end());
        postings.erase(std::unique(postings.begin(), postings.end()), postings.end());
    }
    return out;
}

}  // namespace trikey
