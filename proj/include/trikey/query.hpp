#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trikey/corpus.hpp"
#include "trikey/index_store.hpp"
#include "trikey/ingest.hpp"
#include "trikey/layout.hpp"
#include "trikey/lexicon.hpp"
#include "trikey/types.hpp"

namespace trikey {

/// Proximity score of one match: 1 / (max - min - (n - 2))^2. Equals 1 when
/// the n positions are consecutive.
inline double tp_score(std::span<const Position> positions) {
    if (positions.size() < 2) throw QueryError("proximity score needs at least two positions");
    std::vector<Position> sorted(positions.begin(), positions.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw QueryError("proximity score needs distinct positions");
    const double gap = static_cast<double>(sorted.back() - sorted.front()) - static_cast<double>(sorted.size() - 2);
    return 1.0 / (gap * gap);
}

/// Query words resolved to stop lemmas. A word with several stop lemmas
/// matches any of them.
struct Query {
    std::vector<std::string> words;
    std::vector<std::vector<LemmaId>> lemmas;

    [[nodiscard]] std::size_t size() const noexcept { return lemmas.size(); }
};

inline Query make_query(const std::vector<std::string>& words, const Lemmatizer& lemmatizer, const FLList& fl,
                        std::uint32_t ws_count) {
    if (words.size() < 3) throw QueryError("a query needs at least three words");
    Query q;
    for (const auto& raw : words) {
        auto word = normalize(raw);
        std::vector<LemmaId> ids;
        for (const auto& lemma : lemmatizer.lemmas(word))
            if (auto n = fl.number_of(lemma); n && *n < ws_count) ids.push_back(*n);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        if (ids.empty()) throw QueryError("'" + raw + "' is not a stop word of this index");
        q.words.push_back(word);
        q.lemmas.push_back(std::move(ids));
    }
    return q;
}

inline Query make_query(const std::vector<LemmaId>& lemmas) {
    if (lemmas.size() < 3) throw QueryError("a query needs at least three words");
    Query q;
    for (auto l : lemmas) {
        q.words.push_back(std::to_string(l));
        q.lemmas.push_back({l});
    }
    return q;
}

/// One match: positions are in query word order.
struct Hit {
    DocId id = 0;
    double tp = 0;
    std::vector<Position> positions;

    friend bool operator==(const Hit&, const Hit&) = default;
};

/// Ranking order: higher score first, then smaller document id, then the
/// earlier match.
inline bool hit_before(const Hit& a, const Hit& b) {
    if (a.tp != b.tp) return a.tp > b.tp;
    if (a.id != b.id) return a.id < b.id;
    auto amin = *std::min_element(a.positions.begin(), a.positions.end());
    auto bmin = *std::min_element(b.positions.begin(), b.positions.end());
    if (amin != bmin) return amin < bmin;
    return a.positions < b.positions;
}

namespace detail {

struct Match {
    DocId id = 0;
    std::vector<Position> positions;

    friend auto operator<=>(const Match&, const Match&) = default;
};

/// Matches of query words [from, from + 3), positions in query order. Slots
/// with equal lemmas are interchangeable, so every ordering of their
/// positions is reported; the key stores only one of them when the second
/// and third components are equal.
inline std::set<Match> triple_matches(const IndexStore& store, const Query& q, std::size_t from) {
    static constexpr std::array<std::array<std::size_t, 3>, 6> kPerms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    std::set<Match> out;
    for (auto a : q.lemmas[from])
        for (auto b : q.lemmas[from + 1])
            for (auto c : q.lemmas[from + 2]) {
                const std::array<LemmaId, 3> lem{a, b, c};
                auto canon = canonicalize(a, b, c);
                for (const auto& posting : store.get_postings(canon.key)) {
                    auto pos = resolve_positions(canon, posting);
                    for (const auto& perm : kPerms) {
                        if (lem[perm[0]] != lem[0] || lem[perm[1]] != lem[1] || lem[perm[2]] != lem[2]) continue;
                        out.insert({posting.id, {pos[perm[0]], pos[perm[1]], pos[perm[2]]}});
                    }
                }
            }
    return out;
}

inline bool distinct(std::vector<Position> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
}

}  // namespace detail

/// Every match, unaggregated. Three-word queries read one key per lemma
/// combination. Longer queries join the matches of each run of three
/// consecutive words on the two positions shared with the next run; a match
/// is reported when every run is matched and all positions differ.
inline std::vector<Hit> evaluate_raw(const IndexStore& store, const Query& q) {
    if (q.size() < 3) throw QueryError("a query needs at least three words");
    auto current = detail::triple_matches(store, q, 0);
    for (std::size_t from = 1; from + 3 <= q.size() && !current.empty(); ++from) {
        std::map<std::tuple<DocId, Position, Position>, std::vector<Position>> next_by_prefix;
        for (const auto& m : detail::triple_matches(store, q, from))
            next_by_prefix[{m.id, m.positions[0], m.positions[1]}].push_back(m.positions[2]);
        std::set<detail::Match> joined;
        for (const auto& m : current) {
            auto n = m.positions.size();
            auto it = next_by_prefix.find({m.id, m.positions[n - 2], m.positions[n - 1]});
            if (it == next_by_prefix.end()) continue;
            for (auto p : it->second) {
                if (std::find(m.positions.begin(), m.positions.end(), p) != m.positions.end()) continue;
                auto ext = m;
                ext.positions.push_back(p);
                joined.insert(std::move(ext));
            }
        }
        current = std::move(joined);
    }
    std::vector<Hit> out;
    for (const auto& m : current) {
        if (!detail::distinct(m.positions)) continue;
        out.push_back({m.id, tp_score(m.positions), m.positions});
    }
    std::sort(out.begin(), out.end(), hit_before);
    return out;
}

/// Best match per document, ranked.
inline std::vector<Hit> evaluate(const IndexStore& store, const Query& q) {
    std::vector<Hit> best;
    std::unordered_map<DocId, std::size_t> slot;
    for (auto& h : evaluate_raw(store, q)) {
        auto [it, fresh] = slot.try_emplace(h.id, best.size());
        if (fresh)
            best.push_back(std::move(h));
        else if (hit_before(h, best[it->second]))
            best[it->second] = std::move(h);
    }
    std::sort(best.begin(), best.end(), hit_before);
    return best;
}

/// Three consecutive stop-word positions of a document lying within
/// max_distance, with the smallest lemma at each position.
struct Window {
    DocId id = 0;
    std::array<Position, 3> positions{};
    std::array<LemmaId, 3> lemmas{};
};

inline std::vector<Window> document_windows(std::span<const DRecord> records, std::uint32_t max_distance) {
    std::vector<DRecord> firsts;
    for (const auto& r : records)
        if (firsts.empty() || firsts.back().p != r.p || firsts.back().id != r.id) firsts.push_back(r);
    std::vector<Window> out;
    for (std::size_t i = 0; i + 2 < firsts.size(); ++i) {
        const auto& a = firsts[i];
        const auto& c = firsts[i + 2];
        if (a.id != c.id || c.p - a.p > max_distance) continue;
        const auto& b = firsts[i + 1];
        out.push_back({a.id, {a.p, b.p, c.p}, {a.lem, b.lem, c.lem}});
    }
    return out;
}

struct RoundtripReport {
    std::uint64_t checked = 0;
    std::vector<Window> missed;
};

/// Searches each window through the index and records those whose exact
/// positions are not among the matches.
inline RoundtripReport roundtrip_check(const IndexStore& store, std::span<const Window> windows) {
    RoundtripReport report;
    for (const auto& w : windows) {
        ++report.checked;
        auto hits = evaluate_raw(store, make_query({w.lemmas[0], w.lemmas[1], w.lemmas[2]}));
        std::vector<Position> want(w.positions.begin(), w.positions.end());
        bool found = std::any_of(hits.begin(), hits.end(),
                                 [&](const Hit& h) { return h.id == w.id && h.positions == want; });
        if (!found) report.missed.push_back(w);
    }
    return report;
}

/// Samples up to `count` windows from randomly chosen indexed documents
/// (re-read from their source paths) and checks them.
inline RoundtripReport roundtrip_random(const IndexStore& store, const Lemmatizer& lemmatizer, Encoding encoding,
                                        std::size_t count, std::uint64_t seed) {
    std::vector<Window> sample;
    const auto& reg = store.registry();
    if (reg.size() == 0) return {};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_doc(0, reg.size() - 1);
    std::unordered_map<DocId, std::vector<Window>> cache;
    std::size_t attempts = 0;
    while (sample.size() < count && attempts++ < count * 20) {
        auto id = static_cast<DocId>(pick_doc(rng));
        auto it = cache.find(id);
        if (it == cache.end()) {
            auto raw = read_file(reg[id].path);
            if (!raw) throw Error("cannot re-read indexed document " + reg[id].path);
            auto text = encoding == Encoding::Latin1 ? latin1_to_utf8(*raw) : *raw;
            auto recs = document_records(text, id, lemmatizer, store.fl(), store.ws_count());
            it = cache.emplace(id, document_windows(recs.records, store.max_distance())).first;
        }
        if (it->second.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
        sample.push_back(it->second[pick(rng)]);
    }
    return roundtrip_check(store, sample);
}

}  // namespace trikey
