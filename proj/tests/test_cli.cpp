#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "support.hpp"
#include "trikey/cli.hpp"

using namespace trikey;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "trikey");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<std::string> sample_docs() {
    return {"The cat and the dog.", "A dog, the cat; and THE bird!", "and the of the and", ""};
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, AnalyzeWritesTheFrequencyList) {
    test::TempDir tmp;
    auto corpus = test::write_corpus(tmp / "c", sample_docs());
    auto r = invoke({"analyze", corpus.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out,
              "0\tthe\t6\n"
              "1\tand\t4\n"
              "2\tcat\t2\n"
              "3\tdog\t2\n"
              "4\ta\t1\n"
              "5\tbird\t1\n"
              "6\tof\t1\n");
    EXPECT_EQ(invoke({"analyze", corpus.string()}).out, r.out);
    auto out = tmp / "fl.tsv";
    r = invoke({"analyze", corpus.string(), "-o", out.string(), "--ws-count", "2", "--fu-count", "3"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "documents\t4\nlemmas\t7\nstop\t2\nfrequently_used\t3\nordinary\t2\n");
    EXPECT_EQ(read_all(out), invoke({"analyze", corpus.string()}).out);
}

TEST(Cli, AnalyzeEmptyCorpusWarns) {
    test::TempDir tmp;
    fs::create_directories(tmp / "empty");
    auto r = invoke({"analyze", (tmp / "empty").string()});
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Cli, BuildQueryVerify) {
    test::TempDir tmp;
    auto corpus = test::write_corpus(tmp / "c", sample_docs());
    auto index = (tmp / "idx").string();
    auto r = invoke({"build", corpus.string(), index, "--ws-count", "4", "--files", "2", "--threads", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = invoke({"query", index, "the", "cat", "and"});
    ASSERT_EQ(r.code, 0) << r.err;
    // Best match per document, tab separated: path, score, positions.
    EXPECT_EQ(r.out, (tmp / "c" / "doc00000.txt").string() + "\t1\t0,1,2\n" +
                         (tmp / "c" / "doc00001.txt").string() + "\t1\t2,3,4\n");
    r = invoke({"query", index, "the", "dog", "the"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, (tmp / "c" / "doc00000.txt").string() + "\t0.111111\t0,4,3\n" +
                         (tmp / "c" / "doc00001.txt").string() + "\t0.111111\t2,1,5\n");
    r = invoke({"query", index, "the", "cat", "and", "--json"});
    ASSERT_EQ(r.code, 0);
    auto j = nlohmann::json::parse(r.out);
    ASSERT_EQ(j.size(), 2u);
    EXPECT_DOUBLE_EQ(j[0]["tp"].get<double>(), 1.0);
    r = invoke({"verify", "--index", index, "--windows", "50"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("blocks\tok"), std::string::npos);
    EXPECT_NE(r.out.find("oracle\tok"), std::string::npos);
}

TEST(Cli, UsageErrors) {
    test::TempDir tmp;
    auto corpus = test::write_corpus(tmp / "c", sample_docs());
    auto index = (tmp / "idx").string();
    ASSERT_EQ(invoke({"build", corpus.string(), index, "--ws-count", "3"}).code, 0);
    auto r = invoke({"query", index, "the", "bird", "and"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bird"), std::string::npos);
    EXPECT_EQ(invoke({"query", index, "the", "and"}).code, 2);
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
    EXPECT_EQ(invoke({"build", corpus.string(), (tmp / "x").string(), "--max-distance", "0"}).code, 2);
    EXPECT_EQ(invoke({"build", corpus.string(), (tmp / "y").string(), "--ram-limit", "lots"}).code, 2);
    EXPECT_EQ(invoke({"stats", (tmp / "missing").string()}).code, 1);
}

TEST(Cli, VerifyReportsCorruptBlock) {
    test::TempDir tmp;
    auto docs = test::zipf_documents(10, 12, 40, 80, 3);
    auto corpus = test::write_corpus(tmp / "c", docs);
    auto index = tmp / "idx";
    ASSERT_EQ(invoke({"build", corpus.string(), index.string(), "--ws-count", "8", "--files", "1"}).code, 0);
    auto path = index / "segments" / "seg-000000" / "file-0000.tki";
    TripleKey key;
    std::uint64_t at = 0;
    {
        IndexFileReader reader(path, "probe");
        const auto& e = reader.groups()[0].entries.at(0);
        key = e.key;
        at = reader.groups()[0].blocks_offset + e.offset + 1;
    }
    auto bytes = read_all(path);
    bytes[at] = static_cast<char>(bytes[at] ^ 0x10);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
    auto r = invoke({"verify", "--index", index.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("corrupt\tsegment"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find(to_string(key)), std::string::npos) << r.out;
}

TEST(Cli, StatsGrowWithDistance) {
    test::TempDir tmp;
    auto corpus = test::write_corpus(tmp / "c", test::zipf_documents(20, 30, 100, 200, 4));
    std::uint64_t bytes[2] = {0, 0};
    int i = 0;
    for (const char* md : {"5", "9"}) {
        auto index = (tmp / ("i" + std::string(md))).string();
        ASSERT_EQ(invoke({"build", corpus.string(), index, "--ws-count", "20", "--max-distance", md}).code, 0);
        auto r = invoke({"stats", index, "--json"});
        ASSERT_EQ(r.code, 0);
        auto j = nlohmann::json::parse(r.out);
        EXPECT_EQ(j["max_distance"].get<int>(), std::stoi(md));
        bytes[i++] = j["bytes"].get<std::uint64_t>();
    }
    EXPECT_LT(bytes[0], bytes[1]);
}

TEST(Cli, EnvironmentSuppliesDefaults) {
    test::TempDir tmp;
    auto corpus = test::write_corpus(tmp / "c", sample_docs());
    ::setenv("TRIKEY_MAX_DISTANCE", "3", 1);
    ::setenv("TRIKEY_WS_COUNT", "4", 1);
    auto r = invoke({"build", corpus.string(), (tmp / "idx").string()});
    ::unsetenv("TRIKEY_MAX_DISTANCE");
    ::unsetenv("TRIKEY_WS_COUNT");
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(invoke({"stats", (tmp / "idx").string(), "--json"}).out);
    EXPECT_EQ(j["max_distance"].get<int>(), 3);
    EXPECT_EQ(j["ws_count"].get<int>(), 4);
}

TEST(Cli, AppendAndCompact) {
    test::TempDir tmp;
    auto a = test::write_corpus(tmp / "a", {"x y z x y", "y y x"});
    auto b = test::write_corpus(tmp / "b", {"z x y z"});
    auto fl = tmp / "fl.tsv";
    ASSERT_EQ(invoke({"analyze", a.string(), "-o", fl.string()}).code, 0);
    auto index = (tmp / "idx").string();
    ASSERT_EQ(invoke({"build", a.string(), index, "--fl-list", fl.string(), "--ws-count", "3"}).code, 0);
    auto r = invoke({"build", b.string(), index, "--append"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(invoke({"build", b.string(), index, "--append", "--max-distance", "7"}).code, 2);
    r = invoke({"query", index, "z", "x", "y", "--all"});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("doc00000.txt\t1\t0,1,2"), std::string::npos) << r.out;
    r = invoke({"compact", index});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "segments\t2 -> 1\n");
    EXPECT_EQ(invoke({"verify", "--index", index}).code, 0);
}

TEST(Cli, RandomDifferentialRun) {
    auto r = invoke({"verify", "--random", "50", "--seed", "9"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("divergences\t0"), std::string::npos);
}
