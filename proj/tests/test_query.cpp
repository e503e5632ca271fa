#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"
#include "trikey/pipeline.hpp"
#include "trikey/query.hpp"

using namespace trikey;

namespace {

double tp(std::vector<Position> v) { return tp_score(v); }

IndexOptions small_options(std::uint32_t ws, std::uint32_t md = 5) {
    IndexOptions o;
    o.config.ws_count = ws;
    o.config.fu_count = ws;
    o.config.max_distance = md;
    o.config.thread_limit = 2;
    o.plan.file_count_hint = 3;
    return o;
}

std::vector<DRecord> records_of_store(const IndexStore& store, const std::vector<std::string>& docs) {
    std::vector<DRecord> all;
    for (DocId id = 0; id < docs.size(); ++id) {
        auto r = document_records(docs[id], id, IdentityLemmatizer{}, store.fl(), store.ws_count()).records;
        all.insert(all.end(), r.begin(), r.end());
    }
    return all;
}

// Three positions match when some word carrying the smallest lemma has the
// other two within max_distance.
bool triple_ok(const std::array<Position, 3>& x, const std::array<LemmaId, 3>& l, std::uint32_t md) {
    auto lo = std::min({l[0], l[1], l[2]});
    for (std::size_t i = 0; i < 3; ++i) {
        if (l[i] != lo) continue;
        bool near = true;
        for (std::size_t j = 0; j < 3; ++j)
            if (j != i && static_cast<Position>(std::abs(static_cast<std::int64_t>(x[j]) - x[i])) > md) near = false;
        if (near) return true;
    }
    return false;
}

/// Full-text reference: every vector of distinct positions carrying the query
/// lemmas in which each run of three consecutive words matches.
std::set<std::pair<DocId, std::vector<Position>>> brute_force(const std::vector<DRecord>& d,
                                                              const std::vector<LemmaId>& q, std::uint32_t md) {
    std::map<std::pair<DocId, LemmaId>, std::vector<Position>> where;
    std::set<DocId> ids;
    for (const auto& r : d) {
        where[{r.id, r.lem}].push_back(r.p);
        ids.insert(r.id);
    }
    std::set<std::pair<DocId, std::vector<Position>>> out;
    for (auto id : ids) {
        std::vector<Position> cur;
        auto rec = [&](auto& self, std::size_t i) -> void {
            if (i == q.size()) {
                out.insert({id, cur});
                return;
            }
            auto it = where.find({id, q[i]});
            if (it == where.end()) return;
            for (auto p : it->second) {
                if (std::find(cur.begin(), cur.end(), p) != cur.end()) continue;
                cur.push_back(p);
                if (i < 2 || triple_ok({cur[i - 2], cur[i - 1], cur[i]}, {q[i - 2], q[i - 1], q[i]}, md))
                    self(self, i + 1);
                cur.pop_back();
            }
        };
        rec(rec, 0);
    }
    return out;
}

std::set<std::pair<DocId, std::vector<Position>>> as_set(const std::vector<Hit>& hits) {
    std::set<std::pair<DocId, std::vector<Position>>> out;
    for (const auto& h : hits) out.insert({h.id, h.positions});
    return out;
}

}  // namespace

TEST(ProximityScore, WorkedValues) {
    EXPECT_DOUBLE_EQ(tp({10, 11, 12, 13, 14, 15, 16}), 1.0);
    EXPECT_DOUBLE_EQ(tp({0, 2, 3, 5, 7, 8, 10}), 1.0 / 25.0);
    EXPECT_DOUBLE_EQ(tp({3, 5}), 0.25);
    EXPECT_DOUBLE_EQ(tp({7, 8}), 1.0);
}

TEST(ProximityScore, InvariantUnderPermutationAndShift) {
    std::mt19937 rng(8);
    for (int i = 0; i < 500; ++i) {
        std::set<Position> s;
        auto n = 2 + rng() % 8;
        while (s.size() < n) s.insert(rng() % 40);
        std::vector<Position> v(s.begin(), s.end());
        auto base = tp(v);
        EXPECT_GT(base, 0.0);
        EXPECT_LE(base, 1.0);
        std::shuffle(v.begin(), v.end(), rng);
        EXPECT_DOUBLE_EQ(tp(v), base);
        for (auto& p : v) p += 1000;
        EXPECT_DOUBLE_EQ(tp(v), base);
    }
}

TEST(ProximityScore, RejectsDegenerateInput) {
    EXPECT_THROW(tp({4}), QueryError);
    EXPECT_THROW(tp({4, 4, 5}), QueryError);
}

TEST(MakeQuery, Errors) {
    std::unordered_map<std::string, std::uint64_t> counts{{"a", 9}, {"b", 8}, {"c", 7}, {"rare", 1}};
    auto fl = FLList::from_counts(counts);
    IdentityLemmatizer lem;
    EXPECT_THROW(make_query({"a", "b"}, lem, fl, 3), QueryError);
    EXPECT_THROW(make_query({"a", "b", "rare"}, lem, fl, 3), QueryError);
    EXPECT_THROW(make_query({"a", "b", "unknown"}, lem, fl, 3), QueryError);
    auto q = make_query({"A", "b", "c"}, lem, fl, 3);
    EXPECT_EQ(q.lemmas, (std::vector<std::vector<LemmaId>>{{0}, {1}, {2}}));
}

TEST(Evaluate, ConsecutiveWords) {
    test::TempDir tmp;
    auto store = test::build_from_texts(tmp.path(), {"a b c", "c c c b"}, small_options(3));
    IdentityLemmatizer lem;
    auto hits = evaluate(store, make_query({"a", "b", "c"}, lem, store.fl(), 3));
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, 0u);
    EXPECT_EQ(hits[0].positions, (std::vector<Position>{0, 1, 2}));
    EXPECT_DOUBLE_EQ(hits[0].tp, 1.0);
    hits = evaluate(store, make_query({"c", "a", "b"}, lem, store.fl(), 3));
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].positions, (std::vector<Position>{2, 0, 1}));
}

TEST(Evaluate, AbsentCombinationIsEmpty) {
    test::TempDir tmp;
    auto store = test::build_from_texts(tmp.path(), {"a b c", "a a b"}, small_options(3));
    IdentityLemmatizer lem;
    EXPECT_TRUE(evaluate(store, make_query({"c", "c", "a"}, lem, store.fl(), 3)).empty());
}

TEST(Evaluate, RepeatedWordsFindEveryOrdering) {
    test::TempDir tmp;
    auto store = test::build_from_texts(tmp.path(), {"x y y x"}, small_options(2));
    IdentityLemmatizer lem;
    auto raw = evaluate_raw(store, make_query({"y", "x", "y"}, lem, store.fl(), 2));
    auto got = as_set(raw);
    EXPECT_TRUE(got.count({0, {1, 0, 2}}));
    EXPECT_TRUE(got.count({0, {2, 0, 1}}));
    EXPECT_TRUE(got.count({0, {1, 3, 2}}));
}

TEST(Evaluate, AgreesWithFullTextSearch) {
    test::TempDir tmp;
    const std::uint32_t ws = 8;
    auto docs = test::zipf_documents(12, 10, 20, 80, 77, 0.7);
    for (std::uint32_t md : {2u, 5u}) {
        auto dir = tmp / ("md" + std::to_string(md));
        auto store = test::build_from_texts(dir, docs, small_options(ws, md));
        auto d = records_of_store(store, docs);
        std::mt19937 rng(md);
        for (int i = 0; i < 120; ++i) {
            std::vector<LemmaId> q(3 + rng() % 3);
            for (auto& l : q) l = rng() % ws;
            auto expected = brute_force(d, q, md);
            auto got = as_set(evaluate_raw(store, make_query(q)));
            ASSERT_EQ(got, expected) << "md " << md << " query size " << q.size() << " case " << i;
        }
    }
}

TEST(Evaluate, RankingIsDeterministicAndOnePerDocument) {
    test::TempDir tmp;
    auto docs = test::zipf_documents(15, 6, 30, 60, 5);
    auto store = test::build_from_texts(tmp.path(), docs, small_options(6));
    auto q = make_query(std::vector<LemmaId>{0, 1, 2, 0});
    auto a = evaluate(store, q);
    auto b = evaluate(store, q);
    EXPECT_EQ(a, b);
    std::set<DocId> seen;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(seen.insert(a[i].id).second);
        EXPECT_DOUBLE_EQ(a[i].tp, tp_score(a[i].positions));
        if (i) {
            EXPECT_FALSE(hit_before(a[i], a[i - 1]));
        }
    }
    // The best hit of a document is no worse than any of its raw matches.
    for (const auto& h : evaluate_raw(store, q)) {
        auto it = std::find_if(a.begin(), a.end(), [&](const Hit& b) { return b.id == h.id; });
        ASSERT_NE(it, a.end());
        EXPECT_FALSE(hit_before(h, *it));
    }
}

TEST(Windows, ConsecutiveStopPositionsWithinDistance) {
    std::vector<DRecord> d{{0, 0, 3}, {0, 0, 1}, {0, 2, 4}, {0, 4, 0}, {0, 20, 1}, {1, 0, 2}, {1, 1, 2}};
    std::sort(d.begin(), d.end());
    auto w = document_windows(d, 5);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].positions, (std::array<Position, 3>{0, 2, 4}));
    EXPECT_EQ(w[0].lemmas, (std::array<LemmaId, 3>{1, 4, 0}));
    EXPECT_TRUE(document_windows(std::vector<DRecord>{{0, 0, 1}, {0, 1, 1}}, 5).empty());
}

TEST(Roundtrip, SampledWindowsAreAllFound) {
    test::TempDir tmp;
    auto docs = test::zipf_documents(20, 40, 50, 200, 12);
    for (std::uint32_t md : {2u, 3u, 7u}) {
        auto store = test::build_from_texts(tmp / std::to_string(md), docs, small_options(25, md));
        auto report = roundtrip_random(store, IdentityLemmatizer{}, Encoding::Utf8, 300, md);
        EXPECT_EQ(report.checked, 300u);
        EXPECT_TRUE(report.missed.empty()) << report.missed.size() << " missed at md " << md;
    }
}

TEST(Roundtrip, DocumentsWithoutWindows) {
    test::TempDir tmp;
    auto store = test::build_from_texts(tmp.path(), {"a b", "a"}, small_options(2));
    auto report = roundtrip_random(store, IdentityLemmatizer{}, Encoding::Utf8, 10, 1);
    EXPECT_EQ(report.checked, 0u);
}
