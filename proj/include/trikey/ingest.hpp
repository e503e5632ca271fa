#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trikey/corpus.hpp"
#include "trikey/lexicon.hpp"
#include "trikey/types.hpp"
#include "trikey/varint.hpp"

namespace trikey {

// Record layout: varint(lem << 1 | new_doc), then varint(id delta) and
// varint(p) when new_doc is set, otherwise varint(p delta). A missing
// predecessor behaves as a document change from id 0.
inline void encode_record(std::vector<std::uint8_t>& out, const DRecord& r, const DRecord* prev) {
    bool new_doc = prev == nullptr || prev->id != r.id;
    varint::put(out, (std::uint64_t{r.lem} << 1) | (new_doc ? 1u : 0u));
    if (new_doc) {
        varint::put(out, r.id - (prev ? prev->id : 0));
        varint::put(out, r.p);
    } else {
        varint::put(out, r.p - prev->p);
    }
}

inline std::vector<std::uint8_t> encode_record(const DRecord& r, const std::optional<DRecord>& prev) {
    std::vector<std::uint8_t> out;
    encode_record(out, r, prev ? &*prev : nullptr);
    return out;
}

inline DRecord decode_record(varint::Reader& in, const DRecord* prev) {
    auto head = in.get();
    DRecord r;
    r.lem = static_cast<LemmaId>(head >> 1);
    if (head & 1) {
        r.id = (prev ? prev->id : 0) + in.get32();
        r.p = in.get32();
    } else {
        if (!prev) throw FormatError("first record must start a document");
        r.id = prev->id;
        r.p = prev->p + in.get32();
    }
    return r;
}

/// Stage-1 occurrence array: records ordered by (id, p, lem), stored
/// delta-encoded. Iteration decodes on the fly.
class DArray {
public:
    class Iterator {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = DRecord;
        using difference_type = std::ptrdiff_t;
        using pointer = const DRecord*;
        using reference = const DRecord&;

        Iterator() = default;
        Iterator(std::span<const std::uint8_t> bytes, std::size_t count) : reader_(bytes), remaining_(count) {
            advance();
        }

        reference operator*() const noexcept { return current_; }
        pointer operator->() const noexcept { return &current_; }
        Iterator& operator++() {
            advance();
            return *this;
        }
        void operator++(int) { advance(); }
        friend bool operator==(const Iterator& a, const Iterator& b) noexcept { return a.left() == b.left(); }

    private:
        [[nodiscard]] std::size_t left() const noexcept { return remaining_ + (valid_ ? 1 : 0); }

        void advance() {
            if (remaining_ == 0) {
                valid_ = false;
                return;
            }
            current_ = decode_record(reader_, valid_ ? &current_ : nullptr);
            valid_ = true;
            --remaining_;
        }

        varint::Reader reader_{{}};
        std::size_t remaining_ = 0;
        DRecord current_{};
        bool valid_ = false;
    };

    DArray() = default;

    template <std::ranges::input_range R>
    static DArray from(const R& records) {
        DArray d;
        for (const auto& r : records) d.push_back(r);
        return d;
    }

    void push_back(const DRecord& r) {
        if (last_ && r < *last_) throw Error("occurrence records must be appended in (id, p, lem) order");
        encode_record(bytes_, r, last_ ? &*last_ : nullptr);
        last_ = r;
        ++count_;
    }

    struct Mark {
        std::size_t bytes;
        std::size_t count;
        std::optional<DRecord> last;
    };
    [[nodiscard]] Mark mark() const { return {bytes_.size(), count_, last_}; }
    void rollback(const Mark& m) {
        bytes_.resize(m.bytes);
        count_ = m.count;
        last_ = m.last;
    }

    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    [[nodiscard]] bool empty() const noexcept { return count_ == 0; }
    [[nodiscard]] std::size_t byte_size() const noexcept { return bytes_.size(); }
    [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

    [[nodiscard]] Iterator begin() const { return Iterator(bytes_, count_); }
    [[nodiscard]] Iterator end() const { return Iterator(bytes_, 0); }

    [[nodiscard]] std::vector<DRecord> to_vector() const {
        std::vector<DRecord> out;
        out.reserve(count_);
        for (const auto& r : *this) out.push_back(r);
        return out;
    }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t count_ = 0;
    std::optional<DRecord> last_;
};

/// Keeps only records with lem > threshold. threshold < 0 keeps everything.
inline DArray reconstruct_d(const DArray& d, std::int64_t threshold) {
    DArray out;
    for (const auto& r : d)
        if (static_cast<std::int64_t>(r.lem) > threshold) out.push_back(r);
    return out;
}

/// Id <-> source mapping. Ids are dense and assigned in ingestion order.
/// File lines: "id TAB path TAB word_count".
class DocumentRegistry {
public:
    struct Entry {
        std::string path;
        std::uint64_t word_count = 0;
        std::uint64_t record_count = 0;

        friend bool operator==(const Entry& a, const Entry& b) {
            return a.path == b.path && a.word_count == b.word_count;
        }
    };

    DocId add(std::string path, std::uint64_t word_count, std::uint64_t record_count = 0) {
        entries_.push_back({std::move(path), word_count, record_count});
        return static_cast<DocId>(entries_.size() - 1);
    }

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] DocId next_id() const noexcept { return static_cast<DocId>(entries_.size()); }
    [[nodiscard]] const Entry& operator[](DocId id) const { return entries_.at(id); }
    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
    void truncate(std::size_t n) {
        if (n < entries_.size()) entries_.resize(n);
    }

    void write(std::ostream& out) const {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            out << i << '\t' << entries_[i].path << '\t' << entries_[i].word_count << '\n';
    }

    static DocumentRegistry read(std::istream& in) {
        DocumentRegistry reg;
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (line.empty()) continue;
            auto t1 = line.find('\t');
            auto t2 = line.rfind('\t');
            if (t1 == std::string::npos || t1 == t2)
                throw FormatError("registry line " + std::to_string(line_no) + ": expected 3 fields");
            try {
                if (std::stoull(line.substr(0, t1)) != reg.size())
                    throw FormatError("registry line " + std::to_string(line_no) + ": ids must be dense");
                reg.add(line.substr(t1 + 1, t2 - t1 - 1), std::stoull(line.substr(t2 + 1)));
            } catch (const std::invalid_argument&) {
                throw FormatError("registry line " + std::to_string(line_no) + ": bad number");
            }
        }
        return reg;
    }

    friend bool operator==(const DocumentRegistry&, const DocumentRegistry&) = default;

private:
    std::vector<Entry> entries_;
};

struct DocumentRecords {
    std::vector<DRecord> records;
    std::uint64_t word_count = 0;
};

/// Stop-lemma occurrences of one document, ordered by (p, lem).
inline DocumentRecords document_records(std::string_view text, DocId id, const Lemmatizer& lemmatizer,
                                        const FLList& fl, std::uint32_t ws_count) {
    DocumentRecords out;
    auto tokens = tokenize(text);
    out.word_count = tokens.size();
    std::vector<LemmaId> at_pos;
    for (const auto& token : tokens) {
        at_pos.clear();
        for (const auto& lemma : lemmatizer.lemmas(token.word))
            if (auto n = fl.number_of(lemma); n && *n < ws_count) at_pos.push_back(*n);
        std::sort(at_pos.begin(), at_pos.end());
        at_pos.erase(std::unique(at_pos.begin(), at_pos.end()), at_pos.end());
        for (auto lem : at_pos) out.records.push_back({id, token.pos, lem});
    }
    return out;
}

struct IngestResult {
    DArray d;
    /// Index into the document source of the next unread document.
    std::size_t cursor = 0;
    std::size_t documents = 0;
    std::size_t skipped = 0;
};

/// Stage 1: reads documents from `cursor` until the encoded array would
/// exceed cfg.ram_limit or the source ends. Documents are never split; a
/// single document larger than the limit forms an iteration on its own.
/// Accepted documents are appended to `registry`.
inline IngestResult ingest_iteration(const DocumentSource& docs, std::size_t cursor, const FLList& fl,
                                     const BuildConfig& cfg, const Lemmatizer& lemmatizer,
                                     DocumentRegistry& registry, std::ostream* diag = &std::cerr) {
    IngestResult res;
    res.cursor = cursor;
    while (res.cursor < docs.size()) {
        const auto& path = docs.path(res.cursor);
        auto text = docs.read(res.cursor);
        if (!text) {
            if (diag) *diag << "warning: cannot read " << path.string() << ", skipped\n";
            ++res.skipped;
            ++res.cursor;
            continue;
        }
        DocumentRecords doc;
        try {
            doc = document_records(*text, registry.next_id(), lemmatizer, fl, cfg.ws_count);
        } catch (const EncodingError& e) {
            if (diag) *diag << "warning: " << path.string() << ": " << e.what() << ", skipped\n";
            ++res.skipped;
            ++res.cursor;
            continue;
        }
        auto mark = res.d.mark();
        for (const auto& r : doc.records) res.d.push_back(r);
        if (res.d.byte_size() > cfg.ram_limit && mark.count > 0) {
            res.d.rollback(mark);
            break;
        }
        registry.add(path.string(), doc.word_count, doc.records.size());
        ++res.documents;
        ++res.cursor;
        if (res.d.byte_size() >= cfg.ram_limit) break;
    }
    return res;
}

}  // namespace trikey
