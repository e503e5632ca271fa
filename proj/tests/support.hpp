#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "trikey/trikey.hpp"

namespace trikey::test {

namespace fs = std::filesystem;

/// Directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "trikey-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    [[nodiscard]] const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// One file per document, named so that directory order is input order.
inline fs::path write_corpus(const fs::path& dir, const std::vector<std::string>& docs) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        std::ostringstream name;
        name << "doc" << std::setw(5) << std::setfill('0') << i << ".txt";
        write_text(dir / name.str(), docs[i]);
    }
    return dir;
}

/// Lower-case letters only, distinct per rank.
inline std::string vocabulary_word(std::size_t rank) {
    std::string w;
    std::size_t v = rank;
    do {
        w.push_back(static_cast<char>('a' + v % 26));
        v /= 26;
    } while (v > 0);
    return w + "q";
}

/// Draws ranks from a Zipf distribution with exponent `s` over `n` ranks.
class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double s) : cdf_(n) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            total += 1.0 / std::pow(static_cast<double>(i + 1), s);
            cdf_[i] = total;
        }
        for (auto& c : cdf_) c /= total;
    }

    template <typename Rng>
    std::size_t operator()(Rng& rng) const {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), std::ssize(cdf_) - 1));
    }

private:
    std::vector<double> cdf_;
};

/// Random Zipf-distributed documents of `min_words`..`max_words` words.
inline std::vector<std::string> zipf_documents(std::size_t docs, std::size_t vocab, std::size_t min_words,
                                               std::size_t max_words, std::uint64_t seed, double s = 1.0) {
    std::mt19937_64 rng(seed);
    ZipfSampler zipf(vocab, s);
    std::vector<std::string> out;
    for (std::size_t d = 0; d < docs; ++d) {
        auto n = std::uniform_int_distribution<std::size_t>(min_words, max_words)(rng);
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
            if (i) text += (i % 17 == 0) ? ".\n" : " ";
            text += vocabulary_word(zipf(rng));
        }
        out.push_back(std::move(text));
    }
    return out;
}

/// Writes a Zipf corpus of at least `target_bytes` as documents of
/// 300..3000 words. Returns the number of bytes written.
inline std::uint64_t write_synthetic_corpus(const fs::path& dir, std::uint64_t target_bytes, std::size_t vocab,
                                            std::uint64_t seed) {
    fs::create_directories(dir);
    std::mt19937_64 rng(seed);
    ZipfSampler zipf(vocab, 1.0);
    std::vector<std::string> words(vocab);
    for (std::size_t i = 0; i < vocab; ++i) words[i] = vocabulary_word(i);
    std::uint64_t written = 0;
    for (std::size_t d = 0; written < target_bytes; ++d) {
        auto n = std::uniform_int_distribution<std::size_t>(300, 3000)(rng);
        std::string text;
        text.reserve(n * 6);
        for (std::size_t i = 0; i < n; ++i) {
            if (i) text += (i % 19 == 0) ? ".\n" : " ";
            text += words[zipf(rng)];
        }
        std::ostringstream name;
        name << "doc" << std::setw(6) << std::setfill('0') << d << ".txt";
        write_text(dir / name.str(), text);
        written += text.size();
    }
    return written;
}

inline std::vector<DRecord> records_of(const DArray& d) { return d.to_vector(); }

/// Builds an index in `dir` from in-memory documents and returns it opened.
inline IndexStore build_from_texts(const fs::path& dir, const std::vector<std::string>& docs, IndexOptions opts,
                                   const Lemmatizer& lemmatizer = IdentityLemmatizer{}) {
    auto corpus = write_corpus(dir / "corpus", docs);
    build_index(corpus, dir / "index", opts, lemmatizer, nullptr);
    return IndexStore::open(dir / "index");
}

}  // namespace trikey::test
