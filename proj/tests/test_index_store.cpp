#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "trikey/index_store.hpp"

using namespace trikey;

namespace {

std::string hex(const std::vector<std::uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 15]);
    }
    return out;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    auto s = read_file(p);
    return {s->begin(), s->end()};
}

std::vector<TriplePosting> random_postings(std::mt19937_64& rng, std::size_t n, std::uint32_t md) {
    std::vector<TriplePosting> out;
    std::uniform_int_distribution<int> dist(-static_cast<int>(md), static_cast<int>(md));
    DocId id = 0;
    Position p = 0;
    while (out.size() < n) {
        if (rng() % 4 == 0) {
            id += static_cast<DocId>(1 + rng() % 20);
            p = static_cast<Position>(rng() % 50);
        } else {
            p += static_cast<Position>(rng() % 30);
        }
        TriplePosting t{id, p + md, 0, 0};
        do {
            t.d1 = dist(rng);
            t.d2 = dist(rng);
        } while (!valid_posting(t, md));
        out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

BuildConfig small_config(std::uint32_t ws, std::uint32_t md = 5) {
    BuildConfig cfg;
    cfg.ws_count = ws;
    cfg.max_distance = md;
    return cfg;
}

FLList letters_fl(std::uint32_t n) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (std::uint32_t i = 0; i < n; ++i) counts[test::vocabulary_word(i)] = 1000 - i;
    return FLList::from_counts(counts);
}

// Writes one segment with the given key -> postings content.
void write_segment(IndexStore& store, const PostingMap& content, const DocumentRegistry& reg) {
    auto seg = store.begin_segment();
    const auto& layout = store.layout();
    for (std::size_t f = 0; f < layout.size(); ++f) {
        auto out = seg->open_file(f);
        for (std::size_t g = 0; g < layout[f].groups.size(); ++g) {
            out.begin_group(g);
            for (const auto& [k, ps] : content)
                if (layout.route(k) == Route{f, g}) out.append_postings(k, ps);
            out.end_group();
        }
        out.finish();
    }
    store.commit(seg.get(), reg);
}

}  // namespace

TEST(PostingBlock, EmptyListIsEmptyBlock) {
    EXPECT_TRUE(encode_posting_block({}).empty());
    EXPECT_TRUE(decode_posting_block({}).empty());
}

TEST(PostingBlock, GoldenBytes) {
    std::vector<TriplePosting> ps{{0, 5, 1, 2}, {0, 9, -1, 1}, {2, 3, 1, -1}};
    EXPECT_EQ(hex(encode_posting_block(ps)), "000502040004010202030201");
}

TEST(PostingBlock, RoundTripOnRandomLists) {
    std::mt19937_64 rng(12);
    auto ps = random_postings(rng, 100000, 9);
    auto bytes = encode_posting_block(ps);
    EXPECT_EQ(decode_posting_block(bytes), ps);
    EXPECT_LT(bytes.size(), ps.size() * 16);
}

TEST(PostingBlock, SmallerThanFixedRecordsOnZipfIds) {
    std::mt19937_64 rng(13);
    test::ZipfSampler zipf(5000, 1.0);
    std::vector<TriplePosting> ps;
    for (int i = 0; i < 20000; ++i)
        ps.push_back({static_cast<DocId>(zipf(rng)), static_cast<Position>(rng() % 5000 + 9), 1, -2});
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    EXPECT_LT(encode_posting_block(ps).size(), ps.size() * 16);
}

TEST(PostingBlock, TruncationIsDetected) {
    std::vector<TriplePosting> ps{{0, 5, 1, 2}, {300, 70000, -3, 4}};
    auto bytes = encode_posting_block(ps);
    // A cut inside a posting throws; a cut at a posting boundary decodes to
    // a shorter list, which the directory's posting count catches.
    for (std::size_t cut = 1; cut < bytes.size(); ++cut) {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        try {
            EXPECT_LT(decode_posting_block(part).size(), ps.size());
        } catch (const FormatError&) {
        }
    }
    std::vector<std::uint8_t> mid(bytes.begin(), bytes.end() - 1);
    EXPECT_THROW(decode_posting_block(mid), FormatError);
}

TEST(PostingBlock, EncoderRejectsUnsortedInput) {
    std::vector<TriplePosting> ps{{1, 5, 1, 2}, {0, 9, 1, 2}};
    EXPECT_THROW(encode_posting_block(ps), Error);
}

TEST(FileHeader, RoundTripAndRejection) {
    FileHeader h;
    h.max_distance = 7;
    h.ws_count = 700;
    h.layout_fingerprint = 0x0123456789abcdefULL;
    h.segment = 3;
    h.file = 2;
    h.index_s = 5;
    h.index_e = 15;
    h.group_count = 4;
    auto bytes = h.encode();
    auto back = FileHeader::decode(bytes);
    EXPECT_EQ(back.max_distance, 7u);
    EXPECT_EQ(back.layout_fingerprint, h.layout_fingerprint);
    EXPECT_EQ(back.group_count, 4u);
    bytes[0] = 'X';
    EXPECT_THROW(FileHeader::decode(bytes), FormatError);
    bytes = h.encode();
    bytes[4] = 9;
    EXPECT_THROW(FileHeader::decode(bytes), FormatError);
}

TEST(IndexFile, GoldenFile) {
    test::TempDir tmp;
    Layout layout = Layout::parse("0-1 : 0-1\n");
    SegmentWriter seg(tmp.path(), 0, layout, 5);
    auto out = seg.open_file(0);
    out.begin_group(0);
    std::vector<TriplePosting> ps{{0, 5, 1, 2}, {0, 9, -1, 1}, {2, 3, 1, -1}};
    out.append_postings({0, 1, 1}, ps);
    out.end_group();
    auto stats = out.finish();
    EXPECT_EQ(stats.keys, 1u);
    EXPECT_EQ(stats.postings, 3u);
    seg.seal();
    auto path = tmp.path() / "seg-000000" / "file-0000.tki";
    EXPECT_EQ(hex(file_bytes(path)),
              "544b495801000000050000000200000005dce53347d4e127000000000000000000000000010000000100000000010100"
              "0101030c8cd6d9d90f000502040004010202030201");
    EXPECT_EQ(stats.bytes, fs::file_size(path));
    IndexFileReader reader(path, "golden");
    ASSERT_EQ(reader.groups().size(), 1u);
    const auto* e = reader.find(0, {0, 1, 1});
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(reader.postings(0, *e), ps);
    EXPECT_EQ(reader.find(0, {0, 0, 1}), nullptr);
}

TEST(IndexFile, WriterValidatesInput) {
    test::TempDir tmp;
    Layout layout = Layout::parse("0-1 : 0-0, 1-2\n2-2 : 2-2\n");
    SegmentWriter seg(tmp.path(), 0, layout, 3);
    auto out = seg.open_file(0);
    out.begin_group(0);
    std::vector<TriplePosting> zero{{0, 5, 0, 2}};
    EXPECT_THROW(out.append_postings({0, 0, 1}, zero), Error);
    std::vector<TriplePosting> far{{0, 5, 1, 4}};
    EXPECT_THROW(out.append_postings({0, 0, 1}, far), Error);
    std::vector<TriplePosting> same{{0, 5, 1, 1}};
    EXPECT_THROW(out.append_postings({0, 0, 1}, same), Error);
    std::vector<TriplePosting> ok{{0, 5, 1, 2}};
    EXPECT_THROW(out.append_postings({0, 1, 1}, ok), Error);  // s outside group 0
    EXPECT_THROW(out.append_postings({1, 0, 2}, ok), Error);  // not canonical
    out.append_postings({0, 0, 2}, ok);
    EXPECT_THROW(out.append_postings({0, 0, 1}, ok), Error);  // key order
    std::vector<TriplePosting> earlier{{0, 4, 1, 2}};
    EXPECT_THROW(out.append_postings({0, 0, 2}, earlier), Error);  // posting order
    EXPECT_THROW(out.begin_group(1), Error);
    out.end_group();
    EXPECT_THROW(out.begin_group(0), Error);
}

TEST(IndexFile, EncodedBlocksGiveTheSameFile) {
    test::TempDir tmp;
    Layout layout = Layout::parse("0-1 : 0-1\n");
    std::vector<TriplePosting> a{{0, 5, 1, 2}, {0, 9, -1, 1}, {2, 3, 1, -1}};
    std::vector<TriplePosting> b{{1, 1, 2, 3}};
    for (int mode = 0; mode < 2; ++mode) {
        SegmentWriter seg(tmp / std::to_string(mode), 0, layout, 5);
        auto out = seg.open_file(0);
        out.begin_group(0);
        if (mode == 0) {
            out.append_postings({0, 1, 1}, a);
            out.append_postings({1, 1, 1}, b);
        } else {
            out.append_block({0, 1, 1}, encode_posting_block(a), a.size());
            out.append_block({1, 1, 1}, encode_posting_block(b), b.size());
        }
        out.end_group();
        out.finish();
        seg.seal();
    }
    EXPECT_EQ(file_bytes(tmp / "0" / "seg-000000" / "file-0000.tki"),
              file_bytes(tmp / "1" / "seg-000000" / "file-0000.tki"));
}

TEST(IndexFile, EncodedBlocksAreValidated) {
    test::TempDir tmp;
    Layout layout = Layout::parse("0-1 : 0-1\n");
    SegmentWriter seg(tmp.path(), 0, layout, 3);
    auto out = seg.open_file(0);
    out.begin_group(0);
    std::vector<TriplePosting> far{{0, 5, 1, 4}};
    EXPECT_THROW(out.append_block({0, 1, 1}, encode_posting_block(far), 1), Error);
    std::vector<TriplePosting> ok{{0, 5, 1, 2}};
    EXPECT_THROW(out.append_block({0, 1, 1}, encode_posting_block(ok), 2), Error);
    EXPECT_THROW(out.append_block({1, 0, 1}, encode_posting_block(ok), 1), Error);
    out.append_block({0, 1, 1}, encode_posting_block(ok), 1);
    EXPECT_THROW(out.append_block({0, 1, 1}, encode_posting_block(ok), 1), Error);
    EXPECT_THROW(out.append_postings({0, 1, 1}, ok), Error);
}

TEST(IndexFile, UnsealedSegmentsLeaveNoTrace) {
    test::TempDir tmp;
    Layout layout = Layout::parse("0-1 : 0-1\n");
    {
        SegmentWriter seg(tmp.path(), 4, layout, 5);
        auto out = seg.open_file(0);
        out.begin_group(0);
    }
    EXPECT_TRUE(fs::is_empty(tmp.path()));
}

class StoreTest : public ::testing::Test {
protected:
    void SetUp() override {
        layout_ = Layout::parse("0-1 : 0-2, 3-5\n2-5 : 2-5\n");
        fl_ = letters_fl(8);
        store_.emplace(IndexStore::create(tmp_ / "idx", layout_, small_config(6), fl_));
    }

    test::TempDir tmp_;
    Layout layout_;
    FLList fl_;
    std::optional<IndexStore> store_;
};

TEST_F(StoreTest, AppendThenReadBack) {
    PostingMap content{{{0, 1, 2}, {{0, 3, 1, 2}, {1, 7, -1, 3}}}, {{2, 2, 5}, {{1, 4, 1, -2}}}};
    DocumentRegistry reg;
    reg.add("a", 10);
    reg.add("b", 10);
    write_segment(*store_, content, reg);
    EXPECT_EQ(store_->get_postings({0, 1, 2}), content.at({0, 1, 2}));
    EXPECT_EQ(store_->get_postings({2, 2, 5}), content.at({2, 2, 5}));
    EXPECT_TRUE(store_->get_postings({1, 1, 1}).empty());
    EXPECT_TRUE(store_->get_postings({0, 0, 9}).empty());
    EXPECT_EQ(store_->logical_content(), content);

    auto reopened = IndexStore::open(tmp_ / "idx");
    EXPECT_EQ(reopened.logical_content(), content);
    EXPECT_EQ(reopened.registry(), reg);
    EXPECT_EQ(reopened.fl(), fl_);
    EXPECT_EQ(reopened.layout(), layout_);
}

TEST_F(StoreTest, SegmentsMergeInPostingOrder) {
    std::mt19937_64 rng(5);
    PostingMap all;
    DocumentRegistry reg;
    for (int s = 0; s < 3; ++s) {
        PostingMap part;
        for (TripleKey k : {TripleKey{0, 1, 2}, TripleKey{1, 4, 5}, TripleKey{3, 3, 3}}) {
            auto ps = random_postings(rng, 50, 5);
            for (auto& p : ps) p.id += static_cast<DocId>(s * 3);  // overlapping id ranges
            part[k] = ps;
            all[k].insert(all[k].end(), ps.begin(), ps.end());
        }
        write_segment(*store_, part, reg);
    }
    EXPECT_EQ(store_->segment_count(), 3u);
    for (auto& [k, ps] : all) {
        std::sort(ps.begin(), ps.end());
        auto got = store_->get_postings(k);
        EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
        EXPECT_EQ(got, ps);
    }
    auto before = store_->logical_content();
    store_->compact();
    EXPECT_EQ(store_->segment_count(), 1u);
    EXPECT_EQ(store_->logical_content(), before);
    EXPECT_EQ(IndexStore::open(tmp_ / "idx").logical_content(), before);
    EXPECT_EQ(std::distance(fs::directory_iterator(tmp_ / "idx" / "segments"), fs::directory_iterator{}), 1);
}

TEST_F(StoreTest, StatsCountKeysPostingsAndBytes) {
    PostingMap content{{{0, 1, 2}, {{0, 3, 1, 2}}}, {{0, 4, 5}, {{0, 3, 1, 2}, {0, 9, 1, 2}}}, {{2, 2, 5}, {{1, 4, 1, -2}}}};
    write_segment(*store_, content, {});
    write_segment(*store_, {{{0, 1, 2}, {{5, 3, 1, 2}}}}, {});
    auto st = store_->stats();
    ASSERT_EQ(st.files.size(), 2u);
    EXPECT_EQ(st.files[0].keys, 2u);
    EXPECT_EQ(st.files[0].postings, 4u);
    EXPECT_EQ(st.files[1].keys, 1u);
    EXPECT_EQ(st.keys, 3u);
    EXPECT_EQ(st.postings, 5u);
    EXPECT_GT(st.bytes, 4 * kHeaderSize);
}

TEST_F(StoreTest, CorruptedBlockIsReportedWithSegmentAndKey) {
    PostingMap content{{{0, 1, 2}, {{0, 3, 1, 2}, {1, 7, -1, 3}}}};
    write_segment(*store_, content, {});
    auto path = tmp_ / "idx" / "segments" / "seg-000000" / "file-0000.tki";
    auto bytes = file_bytes(path);
    std::uint64_t block_at = 0;
    {
        IndexFileReader reader(path, "probe");
        block_at = reader.groups()[0].blocks_offset + reader.find(0, {0, 1, 2})->offset + 1;
    }
    bytes[block_at] ^= 0x04;
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    auto store = IndexStore::open(tmp_ / "idx");
    try {
        (void)store.get_postings({0, 1, 2});
        FAIL() << "corruption not detected";
    } catch (const FormatError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("seg-000000"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(0,1,2)"), std::string::npos) << msg;
    }
    auto issues = store.check_blocks();
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].key, (TripleKey{0, 1, 2}));
}

TEST_F(StoreTest, ReaderRejectsMismatchedDistanceOrLayout) {
    write_segment(*store_, {{{0, 1, 2}, {{0, 3, 1, 2}}}}, {});
    auto path = tmp_ / "idx" / "segments" / "seg-000000" / "file-0001.tki";
    auto bytes = file_bytes(path);
    auto patched = bytes;
    patched[8] = 9;  // max_distance
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(patched.data()), static_cast<std::streamsize>(patched.size()));
    EXPECT_THROW(IndexStore::open(tmp_ / "idx"), FormatError);
    patched = bytes;
    patched[16] ^= 1;  // fingerprint
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(patched.data()), static_cast<std::streamsize>(patched.size()));
    EXPECT_THROW(IndexStore::open(tmp_ / "idx"), FormatError);
}

TEST_F(StoreTest, CreateRefusesExistingIndex) {
    EXPECT_THROW(IndexStore::create(tmp_ / "idx", layout_, small_config(6), fl_), Error);
    EXPECT_THROW(IndexStore::open(tmp_ / "missing"), Error);
}

TEST(ResolvePositions, KeyOrderAndQueryOrder) {
    TriplePosting p{1, 10, 2, -2};
    auto kp = resolve_positions(TripleKey{2, 5, 7}, p);
    EXPECT_EQ(kp, (KeyPositions{10, 12, 8}));
    auto c = canonicalize(7, 2, 5);
    ASSERT_EQ(c.key, (TripleKey{2, 5, 7}));
    EXPECT_EQ(resolve_positions(c, p), (std::array<Position, 3>{8, 10, 12}));
}

TEST(ResolvePositions, NeverYieldsEqualSecondAndThird) {
    std::mt19937_64 rng(8);
    for (const auto& p : random_postings(rng, 2000, 7)) {
        auto kp = resolve_positions(TripleKey{0, 0, 0}, p);
        EXPECT_NE(kp.ps, kp.pt);
        EXPECT_NE(kp.pf, kp.ps);
    }
}
