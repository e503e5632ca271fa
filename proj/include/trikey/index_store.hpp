#pragma once

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "trikey/ingest.hpp"
#include "trikey/layout.hpp"
#include "trikey/lexicon.hpp"
#include "trikey/oracle.hpp"
#include "trikey/types.hpp"
#include "trikey/varint.hpp"

namespace trikey {

inline constexpr std::array<char, 4> kMagic{'T', 'K', 'I', 'X'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 44;

/// Fixed little-endian header at the start of every index file.
struct FileHeader {
    std::uint16_t version = kFormatVersion;
    std::uint8_t codec = 0;
    std::uint32_t max_distance = 0;
    std::uint32_t ws_count = 0;
    std::uint64_t layout_fingerprint = 0;
    std::uint32_t segment = 0;
    std::uint32_t file = 0;
    std::uint32_t index_s = 0;
    std::uint32_t index_e = 0;
    std::uint32_t group_count = 0;

    [[nodiscard]] std::array<std::uint8_t, kHeaderSize> encode() const {
        std::array<std::uint8_t, kHeaderSize> out{};
        std::size_t at = 0;
        auto put = [&](std::uint64_t v, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) out[at++] = static_cast<std::uint8_t>(v >> (8 * i));
        };
        for (char c : kMagic) out[at++] = static_cast<std::uint8_t>(c);
        put(version, 2);
        put(codec, 1);
        put(0, 1);
        put(max_distance, 4);
        put(ws_count, 4);
        put(layout_fingerprint, 8);
        put(segment, 4);
        put(file, 4);
        put(index_s, 4);
        put(index_e, 4);
        put(group_count, 4);
        return out;
    }

    static FileHeader decode(std::span<const std::uint8_t> in) {
        if (in.size() < kHeaderSize) throw FormatError("truncated index file header");
        if (!std::equal(kMagic.begin(), kMagic.end(), in.begin(),
                        [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
            throw FormatError("bad index file magic");
        std::size_t at = 4;
        auto get = [&](std::size_t n) {
            std::uint64_t v = 0;
            for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{in[at++]} << (8 * i);
            return v;
        };
        FileHeader h;
        h.version = static_cast<std::uint16_t>(get(2));
        h.codec = static_cast<std::uint8_t>(get(1));
        get(1);
        h.max_distance = static_cast<std::uint32_t>(get(4));
        h.ws_count = static_cast<std::uint32_t>(get(4));
        h.layout_fingerprint = get(8);
        h.segment = static_cast<std::uint32_t>(get(4));
        h.file = static_cast<std::uint32_t>(get(4));
        h.index_s = static_cast<std::uint32_t>(get(4));
        h.index_e = static_cast<std::uint32_t>(get(4));
        h.group_count = static_cast<std::uint32_t>(get(4));
        if (h.version != kFormatVersion)
            throw FormatError("unsupported index format version " + std::to_string(h.version));
        if (h.codec != 0) throw FormatError("unsupported posting codec " + std::to_string(h.codec));
        return h;
    }
};

// Posting block: per posting varint(id delta), then varint(p) if the id
// changed or varint(p delta) otherwise, then zigzag varints of d1 and d2.
// The implicit predecessor of the first posting is (0, 0).
class BlockEncoder {
public:
    explicit BlockEncoder(std::vector<std::uint8_t>& out) : out_(&out) {}

    /// Continues a block already holding `count` postings ending with `last`.
    BlockEncoder(std::vector<std::uint8_t>& out, const TriplePosting& last, std::uint64_t count)
        : out_(&out), prev_(count > 0 ? last : TriplePosting{}), count_(count) {}

    void add(const TriplePosting& p) {
        if (count_ > 0 && !(prev_ < p)) throw Error("postings must be appended in strictly increasing order");
        auto id_delta = p.id - prev_.id;
        varint::put(*out_, id_delta);
        varint::put(*out_, id_delta != 0 ? p.p : p.p - prev_.p);
        varint::put(*out_, varint::zigzag(p.d1));
        varint::put(*out_, varint::zigzag(p.d2));
        prev_ = p;
        ++count_;
    }

    [[nodiscard]] std::uint64_t count() const noexcept { return count_; }
    [[nodiscard]] const TriplePosting& last() const noexcept { return prev_; }

private:
    std::vector<std::uint8_t>* out_;
    TriplePosting prev_{};
    std::uint64_t count_ = 0;
};

inline std::vector<std::uint8_t> encode_posting_block(std::span<const TriplePosting> postings) {
    std::vector<std::uint8_t> out;
    BlockEncoder enc(out);
    for (const auto& p : postings) enc.add(p);
    return out;
}

/// Calls fn(posting) for each posting of a block, in order.
template <class Fn>
void for_each_posting(std::span<const std::uint8_t> bytes, Fn&& fn) {
    varint::Reader in(bytes);
    TriplePosting prev{};
    bool first = true;
    while (!in.done()) {
        TriplePosting p;
        auto id_delta = in.get32();
        p.id = prev.id + id_delta;
        p.p = id_delta != 0 ? in.get32() : prev.p + in.get32();
        auto d1 = in.get_signed();
        auto d2 = in.get_signed();
        if (d1 < INT32_MIN || d1 > INT32_MAX || d2 < INT32_MIN || d2 > INT32_MAX)
            throw FormatError("posting distance out of range");
        p.d1 = static_cast<Distance>(d1);
        p.d2 = static_cast<Distance>(d2);
        if (!first && !(prev < p)) throw FormatError("postings out of order");
        fn(p);
        prev = p;
        first = false;
    }
}

inline std::vector<TriplePosting> decode_posting_block(std::span<const std::uint8_t> bytes) {
    std::vector<TriplePosting> out;
    for_each_posting(bytes, [&](const TriplePosting& p) { out.push_back(p); });
    return out;
}

inline std::uint32_t block_checksum(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

/// Key directory entry; offset is relative to the group's block area.
struct DirEntry {
    TripleKey key;
    std::uint64_t count = 0;
    std::uint64_t offset = 0;
    std::uint32_t length = 0;
    std::uint32_t checksum = 0;
};

struct FileStats {
    std::uint64_t keys = 0;
    std::uint64_t postings = 0;
    std::uint64_t bytes = 0;
};

/// Writes one index file. Groups are written in layout order; within a
/// group keys arrive in increasing order, and a key's postings in strictly
/// increasing (id, p, d1, d2) order. Each group section is
///   varint group_s, varint group_e, varint key_count,
///   key_count x (varint f, s, t, count, length, checksum),
///   concatenated posting blocks.
/// The file is written under a temporary name and renamed by finish().
class IndexFileWriter {
public:
    IndexFileWriter(fs::path path, const FileHeader& header, IndexFileConfig config)
        : path_(std::move(path)), tmp_(path_.string() + ".tmp"), header_(header), config_(std::move(config)) {
        header_.group_count = static_cast<std::uint32_t>(config_.groups.size());
        header_.index_s = config_.index_s;
        header_.index_e = config_.index_e;
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error("cannot create index file: " + tmp_.string());
        auto h = header_.encode();
        out_.write(reinterpret_cast<const char*>(h.data()), h.size());
        stats_.bytes = h.size();
    }

    IndexFileWriter(const IndexFileWriter&) = delete;
    IndexFileWriter& operator=(const IndexFileWriter&) = delete;
    IndexFileWriter(IndexFileWriter&&) = default;

    ~IndexFileWriter() {
        if (!finished_ && !tmp_.empty()) {
            out_.close();
            std::error_code ec;
            fs::remove(tmp_, ec);
        }
    }

    [[nodiscard]] const IndexFileConfig& config() const noexcept { return config_; }

    void begin_group(std::size_t group) {
        if (open_group_) throw Error("previous group not ended");
        if (group != next_group_) throw Error("groups must be written in layout order");
        open_group_ = true;
        dir_.clear();
        blob_.clear();
    }

    void append_postings(const TripleKey& key, std::span<const TriplePosting> postings) {
        check_key(key);
        if (dir_.empty() || dir_.back().key != key || !encoder_) {
            if (!dir_.empty() && dir_.back().key == key) throw Error("key " + to_string(key) + " appended twice");
            close_key();
            dir_.push_back({key, 0, blob_.size(), 0, 0});
            encoder_.emplace(blob_);
        }
        for (const auto& p : postings) {
            check_posting(key, p);
            encoder_->add(p);
        }
    }

    /// Appends an already encoded block holding all postings of `key`. The
    /// block is scanned once to apply the same checks as append_postings.
    void append_block(const TripleKey& key, std::span<const std::uint8_t> block, std::uint64_t count) {
        check_key(key);
        if (!dir_.empty() && dir_.back().key == key) throw Error("key " + to_string(key) + " appended twice");
        std::uint64_t seen = 0;
        for_each_posting(block, [&](const TriplePosting& p) {
            check_posting(key, p);
            ++seen;
        });
        if (seen != count)
            throw Error("block for key " + to_string(key) + " holds " + std::to_string(seen) +
                        " postings, expected " + std::to_string(count));
        close_key();
        if (count == 0) return;
        DirEntry e{key, count, blob_.size(), static_cast<std::uint32_t>(block.size()), block_checksum(block)};
        blob_.insert(blob_.end(), block.begin(), block.end());
        dir_.push_back(e);
    }

    void end_group() {
        if (!open_group_) throw Error("end_group without begin_group");
        close_key();
        std::vector<std::uint8_t> head;
        const auto& g = config_.groups[next_group_];
        varint::put(head, g.group_s);
        varint::put(head, g.group_e);
        std::erase_if(dir_, [](const DirEntry& e) { return e.count == 0; });
        varint::put(head, dir_.size());
        for (const auto& e : dir_) {
            varint::put(head, e.key.f);
            varint::put(head, e.key.s);
            varint::put(head, e.key.t);
            varint::put(head, e.count);
            varint::put(head, e.length);
            varint::put(head, e.checksum);
            stats_.postings += e.count;
        }
        stats_.keys += dir_.size();
        out_.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
        out_.write(reinterpret_cast<const char*>(blob_.data()), static_cast<std::streamsize>(blob_.size()));
        if (!out_) throw Error("write failed: " + tmp_.string());
        stats_.bytes += head.size() + blob_.size();
        open_group_ = false;
        ++next_group_;
        dir_.clear();
        blob_.clear();
        blob_.shrink_to_fit();
    }

    FileStats finish() {
        if (open_group_) throw Error("group not ended");
        while (next_group_ < config_.groups.size()) {
            begin_group(next_group_);
            end_group();
        }
        out_.flush();
        out_.close();
        if (!out_) throw Error("write failed: " + tmp_.string());
        fs::rename(tmp_, path_);
        finished_ = true;
        return stats_;
    }

private:
    void check_key(const TripleKey& key) const {
        if (!open_group_) throw Error("postings appended outside a group");
        if (!key.canonical()) throw Error("key " + to_string(key) + " is not canonical");
        const auto& g = config_.groups[next_group_];
        if (!config_.contains(key.f) || !g.contains(key.s) || key.t >= header_.ws_count)
            throw Error("key " + to_string(key) + " does not belong to this group");
        if (!dir_.empty() && key < dir_.back().key) throw Error("keys must be appended in increasing order");
    }

    void check_posting(const TripleKey& key, const TriplePosting& p) const {
        if (!valid_posting(p, header_.max_distance))
            throw Error("invalid posting for key " + to_string(key) + ": d1=" + std::to_string(p.d1) +
                        " d2=" + std::to_string(p.d2));
    }

    void close_key() {
        if (dir_.empty() || !encoder_) return;
        auto& e = dir_.back();
        e.count = encoder_->count();
        e.length = static_cast<std::uint32_t>(blob_.size() - e.offset);
        e.checksum = block_checksum(std::span(blob_).subspan(e.offset, e.length));
        encoder_.reset();
    }

    fs::path path_;
    fs::path tmp_;
    FileHeader header_;
    IndexFileConfig config_;
    std::ofstream out_;
    std::size_t next_group_ = 0;
    bool open_group_ = false;
    bool finished_ = false;
    std::vector<DirEntry> dir_;
    std::vector<std::uint8_t> blob_;
    std::optional<BlockEncoder> encoder_;
    FileStats stats_;
};

inline std::string segment_name(std::uint32_t ordinal) {
    std::ostringstream s;
    s << "seg-" << std::setw(6) << std::setfill('0') << ordinal;
    return s.str();
}

inline std::string index_file_name(std::size_t file) {
    std::ostringstream s;
    s << "file-" << std::setw(4) << std::setfill('0') << file << ".tki";
    return s.str();
}

/// Output of one indexing iteration: one index file per layout file in a
/// temporary directory, renamed into place by seal().
class SegmentWriter {
public:
    SegmentWriter(const fs::path& segments_dir, std::uint32_t ordinal, Layout layout, std::uint32_t max_distance)
        : final_(segments_dir / segment_name(ordinal)),
          tmp_(segments_dir / (segment_name(ordinal) + ".tmp")),
          ordinal_(ordinal),
          layout_(std::move(layout)),
          max_distance_(max_distance) {
        std::error_code ec;
        fs::remove_all(tmp_, ec);
        fs::create_directories(tmp_);
    }

    SegmentWriter(const SegmentWriter&) = delete;
    SegmentWriter& operator=(const SegmentWriter&) = delete;

    ~SegmentWriter() {
        if (!sealed_) abort();
    }

    [[nodiscard]] const Layout& layout() const noexcept { return layout_; }
    [[nodiscard]] std::uint32_t ordinal() const noexcept { return ordinal_; }
    [[nodiscard]] std::uint32_t max_distance() const noexcept { return max_distance_; }

    /// Safe to call concurrently for distinct files.
    [[nodiscard]] IndexFileWriter open_file(std::size_t file) const {
        FileHeader h;
        h.max_distance = max_distance_;
        h.ws_count = layout_.ws_count();
        h.layout_fingerprint = layout_.fingerprint();
        h.segment = ordinal_;
        h.file = static_cast<std::uint32_t>(file);
        return IndexFileWriter(tmp_ / index_file_name(file), h, layout_[file]);
    }

    /// Makes the segment visible under its final name. Every layout file
    /// must have been written.
    std::string seal() {
        for (std::size_t i = 0; i < layout_.size(); ++i)
            if (!fs::exists(tmp_ / index_file_name(i)))
                throw Error("segment " + segment_name(ordinal_) + " is missing " + index_file_name(i));
        std::error_code ec;
        fs::remove_all(final_, ec);
        fs::rename(tmp_, final_);
        sealed_ = true;
        return final_.filename().string();
    }

    void abort() noexcept {
        std::error_code ec;
        fs::remove_all(tmp_, ec);
        sealed_ = true;
    }

private:
    fs::path final_;
    fs::path tmp_;
    std::uint32_t ordinal_;
    Layout layout_;
    std::uint32_t max_distance_;
    bool sealed_ = false;
};

namespace detail {

class FileDescriptor {
public:
    explicit FileDescriptor(const fs::path& path) : fd_(::open(path.c_str(), O_RDONLY)) {
        if (fd_ < 0) throw Error("cannot open " + path.string());
    }
    FileDescriptor(const FileDescriptor&) = delete;
    FileDescriptor& operator=(const FileDescriptor&) = delete;
    ~FileDescriptor() {
        if (fd_ >= 0) ::close(fd_);
    }

    void read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
        std::size_t done = 0;
        while (done < out.size()) {
            auto n = ::pread(fd_, out.data() + done, out.size() - done, static_cast<off_t>(offset + done));
            if (n <= 0) throw FormatError("unexpected end of file");
            done += static_cast<std::size_t>(n);
        }
    }

private:
    int fd_;
};

inline std::uint64_t get_varint(std::istream& in) {
    std::uint64_t v = 0;
    for (unsigned shift = 0; shift < 64; shift += 7) {
        int c = in.get();
        if (c == std::char_traits<char>::eof()) throw FormatError("truncated directory");
        v |= std::uint64_t{static_cast<unsigned>(c) & 0x7fu} << shift;
        if ((c & 0x80) == 0) return v;
    }
    throw FormatError("varint too long");
}

inline std::uint32_t get_varint32(std::istream& in) {
    auto v = get_varint(in);
    if (v > 0xffffffffULL) throw FormatError("directory value exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
}

}  // namespace detail

/// Read side of one index file: header and key directories are loaded at
/// open, posting blocks are read on demand.
class IndexFileReader {
public:
    struct Group {
        GroupRange range;
        std::uint64_t blocks_offset = 0;
        std::vector<DirEntry> entries;
    };

    IndexFileReader(fs::path path, std::string label) : path_(std::move(path)), label_(std::move(label)) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw Error("cannot open " + path_.string());
        std::array<std::uint8_t, kHeaderSize> raw{};
        in.read(reinterpret_cast<char*>(raw.data()), raw.size());
        if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw FormatError(label_ + ": truncated header");
        try {
            header_ = FileHeader::decode(raw);
            groups_.resize(header_.group_count);
            for (auto& g : groups_) {
                g.range.group_s = detail::get_varint32(in);
                g.range.group_e = detail::get_varint32(in);
                auto n = detail::get_varint(in);
                if (n > (std::uint64_t{1} << 40)) throw FormatError("implausible key count");
                std::uint64_t offset = 0;
                g.entries.reserve(static_cast<std::size_t>(n));
                for (std::uint64_t i = 0; i < n; ++i) {
                    DirEntry e;
                    e.key.f = detail::get_varint32(in);
                    e.key.s = detail::get_varint32(in);
                    e.key.t = detail::get_varint32(in);
                    e.count = detail::get_varint(in);
                    e.length = detail::get_varint32(in);
                    e.checksum = detail::get_varint32(in);
                    e.offset = offset;
                    offset += e.length;
                    if (!g.entries.empty() && !(g.entries.back().key < e.key))
                        throw FormatError("key directory not sorted");
                    g.entries.push_back(e);
                }
                g.blocks_offset = static_cast<std::uint64_t>(in.tellg());
                in.seekg(static_cast<std::streamoff>(offset), std::ios::cur);
                if (!in) throw FormatError("truncated block area");
            }
        } catch (const FormatError& e) {
            throw FormatError(label_ + ": " + e.what());
        }
        fd_ = std::make_unique<detail::FileDescriptor>(path_);
    }

    [[nodiscard]] const FileHeader& header() const noexcept { return header_; }
    [[nodiscard]] const std::vector<Group>& groups() const noexcept { return groups_; }
    [[nodiscard]] const fs::path& path() const noexcept { return path_; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }

    [[nodiscard]] const DirEntry* find(std::size_t group, const TripleKey& key) const {
        const auto& entries = groups_.at(group).entries;
        auto it = std::lower_bound(entries.begin(), entries.end(), key,
                                   [](const DirEntry& e, const TripleKey& k) { return e.key < k; });
        return it != entries.end() && it->key == key ? &*it : nullptr;
    }

    [[nodiscard]] std::vector<std::uint8_t> read_block(std::size_t group, const DirEntry& e) const {
        std::vector<std::uint8_t> bytes(e.length);
        fd_->read_at(groups_.at(group).blocks_offset + e.offset, bytes);
        return bytes;
    }

    /// Decoded postings of one entry, verified against checksum and count.
    [[nodiscard]] std::vector<TriplePosting> postings(std::size_t group, const DirEntry& e) const {
        auto where = [&] { return label_ + " key " + to_string(e.key) + ": "; };
        std::vector<std::uint8_t> bytes;
        try {
            bytes = read_block(group, e);
        } catch (const FormatError& err) {
            throw FormatError(where() + err.what());
        }
        if (block_checksum(bytes) != e.checksum) throw FormatError(where() + "corrupted block (checksum mismatch)");
        std::vector<TriplePosting> out;
        try {
            out = decode_posting_block(bytes);
        } catch (const FormatError& err) {
            throw FormatError(where() + "corrupted block (" + err.what() + ")");
        }
        if (out.size() != e.count) throw FormatError(where() + "corrupted block (posting count mismatch)");
        return out;
    }

private:
    fs::path path_;
    std::string label_;
    FileHeader header_;
    std::vector<Group> groups_;
    std::unique_ptr<detail::FileDescriptor> fd_;
};

/// Word positions of the three key lemmas of a posting.
struct KeyPositions {
    Position pf = 0;
    Position ps = 0;
    Position pt = 0;

    friend bool operator==(const KeyPositions&, const KeyPositions&) = default;
};

inline KeyPositions resolve_positions(const TripleKey&, const TriplePosting& posting) {
    return {posting.p, static_cast<Position>(static_cast<std::int64_t>(posting.p) + posting.d1),
            static_cast<Position>(static_cast<std::int64_t>(posting.p) + posting.d2)};
}

/// Positions in the caller's component order, given the permutation from
/// canonicalize().
inline std::array<Position, 3> resolve_positions(const Canonical& c, const TriplePosting& posting) {
    auto kp = resolve_positions(c.key, posting);
    std::array<Position, 3> by_key{kp.pf, kp.ps, kp.pt};
    std::array<Position, 3> out{};
    for (std::size_t k = 0; k < 3; ++k) out[c.slot[k]] = by_key[k];
    return out;
}

struct StoreStats {
    struct File {
        std::size_t file = 0;
        LemmaId index_s = 0;
        LemmaId index_e = 0;
        std::size_t groups = 0;
        std::uint64_t keys = 0;
        std::uint64_t postings = 0;
        std::uint64_t bytes = 0;
    };
    std::vector<File> files;
    std::size_t segments = 0;
    std::uint64_t documents = 0;
    std::uint64_t keys = 0;
    std::uint64_t postings = 0;
    std::uint64_t bytes = 0;
};

struct BlockIssue {
    std::string segment;
    std::size_t file = 0;
    TripleKey key;
    std::string message;
};

/// Index directory: store.json, layout.txt, fl_list.tsv, registry.tsv and
/// sealed segments under segments/. Segments are immutable; lookups merge
/// them.
class IndexStore {
public:
    struct Meta {
        std::uint32_t format_version = kFormatVersion;
        std::uint32_t max_distance = 0;
        std::uint32_t ws_count = 0;
        std::uint32_t fu_count = 0;
        std::uint64_t layout_fingerprint = 0;
        std::vector<std::string> segments;
        std::uint32_t next_segment = 0;
        std::uint64_t documents = 0;
    };

    static IndexStore create(const fs::path& dir, const Layout& layout, const BuildConfig& cfg, const FLList& fl) {
        if (fs::exists(dir / "store.json")) throw Error("index already exists: " + dir.string());
        if (layout.ws_count() != cfg.ws_count) throw ConfigError("layout does not match ws_count");
        fs::create_directories(dir / "segments");
        IndexStore store;
        store.dir_ = dir;
        store.layout_ = layout;
        store.fl_ = fl;
        store.meta_.max_distance = cfg.max_distance;
        store.meta_.ws_count = cfg.ws_count;
        store.meta_.fu_count = cfg.fu_count;
        store.meta_.layout_fingerprint = layout.fingerprint();
        write_atomic(dir / "layout.txt", layout.format());
        {
            std::ostringstream fl_text;
            fl.write(fl_text);
            write_atomic(dir / "fl_list.tsv", fl_text.str());
        }
        store.save_registry();
        store.save_meta();
        return store;
    }

    static IndexStore open(const fs::path& dir) {
        IndexStore store;
        store.dir_ = dir;
        auto text = read_file(dir / "store.json");
        if (!text) throw Error("not an index directory (store.json missing): " + dir.string());
        try {
            auto j = nlohmann::json::parse(*text);
            auto& m = store.meta_;
            m.format_version = j.at("format_version").get<std::uint32_t>();
            m.max_distance = j.at("max_distance").get<std::uint32_t>();
            m.ws_count = j.at("ws_count").get<std::uint32_t>();
            m.fu_count = j.at("fu_count").get<std::uint32_t>();
            m.layout_fingerprint = std::stoull(j.at("layout_fingerprint").get<std::string>(), nullptr, 16);
            m.segments = j.at("segments").get<std::vector<std::string>>();
            m.next_segment = j.at("next_segment").get<std::uint32_t>();
            m.documents = j.at("documents").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("store.json: " + std::string(e.what()));
        }
        if (store.meta_.format_version != kFormatVersion)
            throw FormatError("unsupported index format version " + std::to_string(store.meta_.format_version));
        store.layout_ = Layout::load(dir / "layout.txt", store.meta_.ws_count);
        if (store.layout_.fingerprint() != store.meta_.layout_fingerprint)
            throw FormatError("layout.txt does not match the layout fingerprint in store.json");
        store.fl_ = FLList::read(dir / "fl_list.tsv");
        if (auto reg = read_file(dir / "registry.tsv")) {
            std::istringstream in(*reg);
            store.registry_ = DocumentRegistry::read(in);
        }
        if (store.registry_.size() < store.meta_.documents) throw FormatError("registry.tsv is missing documents");
        store.registry_.truncate(store.meta_.documents);
        for (const auto& name : store.meta_.segments) store.load_segment(name);
        return store;
    }

    [[nodiscard]] const fs::path& dir() const noexcept { return dir_; }
    [[nodiscard]] const Layout& layout() const noexcept { return layout_; }
    [[nodiscard]] const FLList& fl() const noexcept { return fl_; }
    [[nodiscard]] const DocumentRegistry& registry() const noexcept { return registry_; }
    [[nodiscard]] const Meta& meta() const noexcept { return meta_; }
    [[nodiscard]] std::uint32_t max_distance() const noexcept { return meta_.max_distance; }
    [[nodiscard]] std::uint32_t ws_count() const noexcept { return meta_.ws_count; }
    [[nodiscard]] std::size_t segment_count() const noexcept { return segments_.size(); }

    [[nodiscard]] BuildConfig config() const {
        BuildConfig cfg;
        cfg.ws_count = meta_.ws_count;
        cfg.fu_count = meta_.fu_count;
        cfg.max_distance = meta_.max_distance;
        return cfg;
    }

    [[nodiscard]] std::unique_ptr<SegmentWriter> begin_segment() const {
        return std::make_unique<SegmentWriter>(dir_ / "segments", meta_.next_segment, layout_, meta_.max_distance);
    }

    /// Seals the segment (if any) and records `registry` as the document set.
    void commit(SegmentWriter* segment, const DocumentRegistry& registry) {
        registry_ = registry;
        save_registry();
        if (segment) {
            auto name = segment->seal();
            meta_.segments.push_back(name);
            meta_.next_segment = segment->ordinal() + 1;
            load_segment(name);
        }
        meta_.documents = registry_.size();
        save_meta();
    }

    [[nodiscard]] std::vector<TriplePosting> get_postings(const TripleKey& key) const {
        auto route = layout_.try_route(key);
        if (!route) return {};
        std::vector<TriplePosting> out;
        for (const auto& seg : segments_) {
            const auto& file = *seg.files[route->file];
            if (const auto* e = file.find(route->group, key)) {
                auto part = file.postings(route->group, *e);
                auto mid = out.size();
                out.insert(out.end(), part.begin(), part.end());
                if (mid > 0 && out[mid] < out[mid - 1])
                    std::inplace_merge(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(mid), out.end());
            }
        }
        return out;
    }

    /// Visits every key of one group of one file in key order with its
    /// merged postings.
    void for_each_key_in_group(std::size_t file, std::size_t group,
                               const std::function<void(const TripleKey&, const std::vector<TriplePosting>&)>& fn)
        const {
        std::vector<TripleKey> keys;
        for (const auto& seg : segments_)
            for (const auto& e : seg.files[file]->groups()[group].entries) keys.push_back(e.key);
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        for (const auto& k : keys) fn(k, get_postings(k));
    }

    void for_each_key(const std::function<void(const TripleKey&, const std::vector<TriplePosting>&)>& fn) const {
        for (std::size_t f = 0; f < layout_.size(); ++f)
            for (std::size_t g = 0; g < layout_[f].groups.size(); ++g) for_each_key_in_group(f, g, fn);
    }

    /// Every key with its postings. Intended for small indexes.
    [[nodiscard]] PostingMap logical_content() const {
        PostingMap out;
        for_each_key([&](const TripleKey& k, const std::vector<TriplePosting>& ps) { out[k] = ps; });
        return out;
    }

    [[nodiscard]] StoreStats stats() const {
        StoreStats st;
        st.segments = segments_.size();
        st.documents = meta_.documents;
        for (std::size_t f = 0; f < layout_.size(); ++f) {
            StoreStats::File fs_;
            fs_.file = f;
            fs_.index_s = layout_[f].index_s;
            fs_.index_e = layout_[f].index_e;
            fs_.groups = layout_[f].groups.size();
            for (std::size_t g = 0; g < fs_.groups; ++g) {
                std::vector<TripleKey> keys;
                for (const auto& seg : segments_)
                    for (const auto& e : seg.files[f]->groups()[g].entries) {
                        keys.push_back(e.key);
                        fs_.postings += e.count;
                    }
                std::sort(keys.begin(), keys.end());
                fs_.keys += static_cast<std::uint64_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
            }
            for (const auto& seg : segments_) fs_.bytes += fs::file_size(seg.files[f]->path());
            st.keys += fs_.keys;
            st.postings += fs_.postings;
            st.bytes += fs_.bytes;
            st.files.push_back(fs_);
        }
        return st;
    }

    /// Reads and verifies every posting block of every segment.
    [[nodiscard]] std::vector<BlockIssue> check_blocks() const {
        std::vector<BlockIssue> issues;
        for (const auto& seg : segments_) {
            for (std::size_t f = 0; f < seg.files.size(); ++f) {
                const auto& file = *seg.files[f];
                for (std::size_t g = 0; g < file.groups().size(); ++g) {
                    for (const auto& e : file.groups()[g].entries) {
                        try {
                            auto ps = file.postings(g, e);
                            if (!layout_.try_route(e.key) || layout_.route(e.key) != Route{f, g})
                                issues.push_back({seg.name, f, e.key, "key stored in the wrong group"});
                            for (const auto& p : ps)
                                if (!valid_posting(p, meta_.max_distance)) {
                                    issues.push_back({seg.name, f, e.key, "posting violates distance invariants"});
                                    break;
                                }
                        } catch (const FormatError& err) {
                            issues.push_back({seg.name, f, e.key, err.what()});
                        }
                    }
                }
            }
        }
        return issues;
    }

    /// Rewrites all segments into one.
    void compact() {
        if (segments_.size() <= 1) return;
        auto writer = begin_segment();
        for (std::size_t f = 0; f < layout_.size(); ++f) {
            auto out = writer->open_file(f);
            for (std::size_t g = 0; g < layout_[f].groups.size(); ++g) {
                out.begin_group(g);
                for_each_key_in_group(f, g, [&](const TripleKey& k, const std::vector<TriplePosting>& ps) {
                    out.append_postings(k, ps);
                });
                out.end_group();
            }
            out.finish();
        }
        auto old = meta_.segments;
        segments_.clear();
        meta_.segments.clear();
        commit(writer.get(), registry_);
        for (const auto& name : old) {
            std::error_code ec;
            fs::remove_all(dir_ / "segments" / name, ec);
        }
    }

private:
    struct Segment {
        std::string name;
        std::vector<std::unique_ptr<IndexFileReader>> files;
    };

    IndexStore() = default;

    static void write_atomic(const fs::path& path, const std::string& content) {
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + tmp.string());
            out << content;
            if (!out) throw Error("write failed: " + tmp.string());
        }
        fs::rename(tmp, path);
    }

    void save_registry() const {
        std::ostringstream out;
        registry_.write(out);
        write_atomic(dir_ / "registry.tsv", out.str());
    }

    void save_meta() const {
        std::ostringstream fp;
        fp << std::hex << std::setw(16) << std::setfill('0') << meta_.layout_fingerprint;
        nlohmann::ordered_json j;
        j["format_version"] = meta_.format_version;
        j["max_distance"] = meta_.max_distance;
        j["ws_count"] = meta_.ws_count;
        j["fu_count"] = meta_.fu_count;
        j["layout_fingerprint"] = fp.str();
        j["segments"] = meta_.segments;
        j["next_segment"] = meta_.next_segment;
        j["documents"] = meta_.documents;
        write_atomic(dir_ / "store.json", j.dump(2) + "\n");
    }

    void load_segment(const std::string& name) {
        Segment seg;
        seg.name = name;
        for (std::size_t f = 0; f < layout_.size(); ++f) {
            auto label = "segment " + name + " file " + std::to_string(f);
            auto reader = std::make_unique<IndexFileReader>(dir_ / "segments" / name / index_file_name(f), label);
            const auto& h = reader->header();
            if (h.max_distance != meta_.max_distance)
                throw FormatError(label + ": max_distance " + std::to_string(h.max_distance) + " does not match " +
                                  std::to_string(meta_.max_distance));
            if (h.layout_fingerprint != meta_.layout_fingerprint || h.ws_count != meta_.ws_count ||
                h.index_s != layout_[f].index_s || h.index_e != layout_[f].index_e ||
                h.group_count != layout_[f].groups.size())
                throw FormatError(label + ": layout does not match the index");
            for (std::size_t g = 0; g < reader->groups().size(); ++g)
                if (reader->groups()[g].range != layout_[f].groups[g])
                    throw FormatError(label + ": group " + std::to_string(g) + " range does not match the layout");
            seg.files.push_back(std::move(reader));
        }
        segments_.push_back(std::move(seg));
    }

    fs::path dir_;
    Meta meta_;
    Layout layout_;
    FLList fl_;
    DocumentRegistry registry_;
    std::vector<Segment> segments_;
};

}  // namespace trikey
