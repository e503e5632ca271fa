#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trikey/corpus.hpp"
#include "trikey/types.hpp"

namespace trikey {

/// Document text is not valid UTF-8.
struct EncodingError : Error {
    using Error::Error;
};

struct Token {
    std::string word;
    Position pos = 0;

    friend bool operator==(const Token&, const Token&) = default;
};

namespace detail {

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

/// Decodes one code point at `i`, advancing it. Throws EncodingError.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
    auto lead = static_cast<unsigned char>(s[i]);
    if (lead < 0x80) {
        ++i;
        return lead;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        len = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        len = 4;
        cp = lead & 0x07;
    } else {
        throw EncodingError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > s.size()) throw EncodingError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
        auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80)
            throw EncodingError("invalid UTF-8 continuation byte at offset " + std::to_string(i + k));
        cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_for_len[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
        throw EncodingError("invalid UTF-8 code point at offset " + std::to_string(i));
    i += len;
    return cp;
}

inline bool is_word_char(char32_t cp) noexcept {
    if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    // Latin-1 punctuation, general punctuation, CJK punctuation, specials.
    if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
    if (cp >= 0xFFF0 && cp <= 0xFFFF) return false;
    return true;
}

inline char32_t fold_case(char32_t cp) noexcept {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

}  // namespace detail

/// Splits text into maximal alphanumeric runs, case-folded, numbered by
/// 0-based word ordinal. Throws EncodingError on malformed UTF-8.
inline std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::string word;
    Position pos = 0;
    for (std::size_t i = 0; i < text.size();) {
        char32_t cp = detail::next_code_point(text, i);
        if (detail::is_word_char(cp)) {
            detail::append_utf8(word, detail::fold_case(cp));
        } else if (!word.empty()) {
            tokens.push_back({std::move(word), pos++});
            word.clear();
        }
    }
    if (!word.empty()) tokens.push_back({std::move(word), pos});
    return tokens;
}

inline std::string normalize(std::string_view word) {
    std::string out;
    for (std::size_t i = 0; i < word.size();) detail::append_utf8(out, detail::fold_case(detail::next_code_point(word, i)));
    return out;
}

/// Source of basic forms for a word.
class Lemmatizer {
public:
    virtual ~Lemmatizer() = default;
    /// Non-empty, duplicate-free list of lemmas for a tokenizer word.
    [[nodiscard]] virtual std::vector<std::string> lemmas(std::string_view word) const = 0;
};

class IdentityLemmatizer final : public Lemmatizer {
public:
    [[nodiscard]] std::vector<std::string> lemmas(std::string_view word) const override {
        return {normalize(word)};
    }
};

/// Word -> lemma list lookup; unknown words map to themselves.
/// File lines: "word TAB lemma[,lemma...]".
class DictionaryLemmatizer final : public Lemmatizer {
public:
    DictionaryLemmatizer() = default;

    void add(std::string_view word, const std::vector<std::string>& forms) {
        auto& dst = entries_[normalize(word)];
        for (const auto& f : forms) {
            auto n = normalize(f);
            if (!n.empty() && std::find(dst.begin(), dst.end(), n) == dst.end()) dst.push_back(std::move(n));
        }
    }

    static DictionaryLemmatizer load(std::istream& in) {
        DictionaryLemmatizer dict;
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos || tab == 0)
                throw FormatError("dictionary line " + std::to_string(line_no) + ": expected 'word<TAB>lemmas'");
            std::vector<std::string> forms;
            std::string_view rest(line);
            rest.remove_prefix(tab + 1);
            while (!rest.empty()) {
                auto comma = rest.find(',');
                auto item = rest.substr(0, comma);
                if (!item.empty()) forms.emplace_back(item);
                if (comma == std::string_view::npos) break;
                rest.remove_prefix(comma + 1);
            }
            if (forms.empty())
                throw FormatError("dictionary line " + std::to_string(line_no) + ": empty lemma list");
            dict.add(std::string_view(line).substr(0, tab), forms);
        }
        return dict;
    }

    static DictionaryLemmatizer load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read dictionary: " + path.string());
        return load(in);
    }

    [[nodiscard]] std::vector<std::string> lemmas(std::string_view word) const override {
        auto key = normalize(word);
        if (auto it = entries_.find(key); it != entries_.end() && !it->second.empty()) return it->second;
        return {key};
    }

private:
    std::unordered_map<std::string, std::vector<std::string>> entries_;
};

enum class LemmaClass { Stop, FrequentlyUsed, Ordinary };

inline LemmaClass classify(LemmaId fl_number, const BuildConfig& cfg) noexcept {
    if (fl_number < cfg.ws_count) return LemmaClass::Stop;
    if (fl_number - cfg.ws_count < cfg.fu_count) return LemmaClass::FrequentlyUsed;
    return LemmaClass::Ordinary;
}

/// All lemmas ordered by decreasing occurrence count, ties by lemma text.
class FLList {
public:
    struct Entry {
        std::string lemma;
        std::uint64_t count = 0;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    FLList() = default;

    static FLList from_counts(const std::unordered_map<std::string, std::uint64_t>& counts) {
        FLList fl;
        fl.entries_.reserve(counts.size());
        for (const auto& [lemma, count] : counts) fl.entries_.push_back({lemma, count});
        std::sort(fl.entries_.begin(), fl.entries_.end(), [](const Entry& a, const Entry& b) {
            return a.count != b.count ? a.count > b.count : a.lemma < b.lemma;
        });
        fl.reindex();
        return fl;
    }

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const Entry& operator[](LemmaId i) const { return entries_.at(i); }

    [[nodiscard]] std::optional<LemmaId> number_of(std::string_view lemma) const {
        if (auto it = index_.find(std::string(lemma)); it != index_.end()) return it->second;
        return std::nullopt;
    }

    /// Lines "fl_number TAB lemma TAB count".
    void write(std::ostream& out) const {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            out << i << '\t' << entries_[i].lemma << '\t' << entries_[i].count << '\n';
    }

    static FLList read(std::istream& in) {
        FLList fl;
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto t1 = line.find('\t');
            auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
            if (t2 == std::string::npos)
                throw FormatError("FL-list line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
            std::size_t number = 0;
            std::uint64_t count = 0;
            try {
                number = std::stoull(line.substr(0, t1));
                count = std::stoull(line.substr(t2 + 1));
            } catch (const std::exception&) {
                throw FormatError("FL-list line " + std::to_string(line_no) + ": bad number");
            }
            if (number != fl.entries_.size())
                throw FormatError("FL-list line " + std::to_string(line_no) + ": numbers must be consecutive from 0");
            auto lemma = line.substr(t1 + 1, t2 - t1 - 1);
            if (lemma.empty()) throw FormatError("FL-list line " + std::to_string(line_no) + ": empty lemma");
            fl.entries_.push_back({std::move(lemma), count});
        }
        fl.reindex();
        if (fl.index_.size() != fl.entries_.size()) throw FormatError("FL-list contains duplicate lemmas");
        return fl;
    }

    static FLList read(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read FL-list: " + path.string());
        return read(in);
    }

    void write(const fs::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write FL-list: " + path.string());
        write(out);
        if (!out) throw Error("write failed: " + path.string());
    }

    friend bool operator==(const FLList& a, const FLList& b) { return a.entries_ == b.entries_; }

private:
    void reindex() {
        index_.clear();
        index_.reserve(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].lemma, static_cast<LemmaId>(i));
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, LemmaId> index_;
};

/// Accumulates lemma occurrence counts document by document. Each distinct
/// lemma of a word counts once per word occurrence.
class FLListBuilder {
public:
    explicit FLListBuilder(const Lemmatizer& lemmatizer) : lemmatizer_(&lemmatizer) {}

    void add_document(std::string_view text) {
        for (const auto& token : tokenize(text))
            for (auto& lemma : lemmatizer_->lemmas(token.word)) ++counts_[std::move(lemma)];
    }

    void merge(const FLListBuilder& other) {
        for (const auto& [lemma, count] : other.counts_) counts_[lemma] += count;
    }

    [[nodiscard]] FLList finish() const { return FLList::from_counts(counts_); }

private:
    const Lemmatizer* lemmatizer_;
    std::unordered_map<std::string, std::uint64_t> counts_;
};

/// Counts lemmas over every readable document. Unreadable or mis-encoded
/// documents are reported to `diag` and skipped.
inline FLList build_fl_list(const DocumentSource& docs, const Lemmatizer& lemmatizer, std::ostream* diag = &std::cerr) {
    FLListBuilder builder(lemmatizer);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto text = docs.read(i);
        if (!text) {
            if (diag) *diag << "warning: cannot read " << docs.path(i).string() << ", skipped\n";
            continue;
        }
        try {
            builder.add_document(*text);
        } catch (const EncodingError& e) {
            if (diag) *diag << "warning: " << docs.path(i).string() << ": " << e.what() << ", skipped\n";
        }
    }
    return builder.finish();
}

}  // namespace trikey
