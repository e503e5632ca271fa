#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trikey/group.hpp"
#include "trikey/index_store.hpp"
#include "trikey/ingest.hpp"
#include "trikey/layout.hpp"
#include "trikey/types.hpp"

namespace trikey {

/// One key's postings, encoded as an index block.
struct EncodedKey {
    TripleKey key;
    std::vector<std::uint8_t> block;
    std::uint64_t count = 0;
};

/// Collects the postings of one group, then hands them out key by key.
///
/// Group processing emits each key's postings in nondecreasing (id, p)
/// order, so they are encoded as they arrive; only postings sharing the
/// latest (id, p) are held raw until their order is known. A key that ever
/// receives an earlier posting falls back to a raw vector sorted at drain.
class GroupBuffer {
public:
    void operator()(const TripleKey& key, const TriplePosting& posting) {
        auto& acc = map_[key];
        ++postings_;
        if (acc.unordered) {
            acc.pending.push_back(posting);
            return;
        }
        if (!acc.pending.empty()) {
            const auto& head = acc.pending.front();
            if (posting.id == head.id && posting.p == head.p) {
                acc.pending.push_back(posting);
                return;
            }
            if (std::tie(posting.id, posting.p) < std::tie(head.id, head.p)) {
                acc.make_unordered();
                acc.pending.push_back(posting);
                return;
            }
            acc.flush();
        }
        acc.pending.push_back(posting);
    }

    /// Postings received, before duplicates are removed.
    [[nodiscard]] std::uint64_t postings() const noexcept { return postings_; }
    [[nodiscard]] std::size_t keys() const noexcept { return map_.size(); }

    /// Keys in increasing order, each with its block. Empties the buffer.
    std::vector<EncodedKey> drain_blocks() {
        std::vector<EncodedKey> out;
        out.reserve(map_.size());
        for (auto& [key, acc] : map_) {
            acc.finish();
            out.push_back({key, std::move(acc.block), acc.count});
        }
        map_.clear();
        postings_ = 0;
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
        return out;
    }

    /// Decoded form of drain_blocks: sorted keys with sorted, unique postings.
    std::vector<std::pair<TripleKey, std::vector<TriplePosting>>> drain() {
        std::vector<std::pair<TripleKey, std::vector<TriplePosting>>> out;
        for (auto& e : drain_blocks()) out.emplace_back(e.key, decode_posting_block(e.block));
        return out;
    }

private:
    struct Accumulator {
        std::vector<std::uint8_t> block;
        TriplePosting last{};
        std::uint64_t count = 0;
        std::vector<TriplePosting> pending;
        bool unordered = false;

        void encode(std::vector<TriplePosting>& ps) {
            if (ps.size() > 1) {
                std::sort(ps.begin(), ps.end());
                ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
            }
            BlockEncoder enc(block, last, count);
            for (const auto& p : ps) enc.add(p);
            last = enc.last();
            count = enc.count();
            ps.clear();
        }

        void flush() { encode(pending); }

        void make_unordered() {
            auto decoded = decode_posting_block(block);
            decoded.insert(decoded.end(), pending.begin(), pending.end());
            pending = std::move(decoded);
            block.clear();
            block.shrink_to_fit();
            count = 0;
            unordered = true;
        }

        void finish() {
            encode(pending);
            pending.shrink_to_fit();
        }
    };

    std::unordered_map<TripleKey, Accumulator> map_;
    std::uint64_t postings_ = 0;
};

enum class EventKind { Start, Finish };

/// One RefCount change: `ref_count` is the number of running file tasks
/// during the `delta` seconds that preceded the change.
struct UtilizationEvent {
    std::uint32_t ref_count = 0;
    double delta = 0;
    EventKind kind = EventKind::Start;
    std::size_t file = 0;
};

struct Utilization {
    /// Share of the thread capacity used over the logged time.
    double u = 0;
    /// Share of the logged time with every thread busy.
    double m = 0;
};

inline Utilization utilization(std::span<const UtilizationEvent> events, std::uint32_t max_ref_count) {
    if (max_ref_count == 0) throw Error("MaxRefCount must be positive");
    double busy = 0;
    double full = 0;
    double total = 0;
    for (const auto& e : events) {
        busy += static_cast<double>(e.ref_count) * e.delta;
        if (e.ref_count == max_ref_count) full += e.delta;
        total += e.delta;
    }
    if (total <= 0) throw Error("utilization is undefined for an empty log");
    return {busy / (static_cast<double>(max_ref_count) * total), full / total};
}

/// RefCount change log of one or more builds. The first change has no
/// preceding interval and produces no event.
class UtilizationLog {
public:
    using Clock = std::chrono::steady_clock;

    void change(std::uint32_t ref_count_before, EventKind kind, std::size_t file, Clock::time_point now = Clock::now()) {
        if (last_) events_.push_back({ref_count_before, std::chrono::duration<double>(now - *last_).count(), kind, file});
        last_ = now;
    }

    void append(const UtilizationLog& other) {
        events_.insert(events_.end(), other.events_.begin(), other.events_.end());
    }

    [[nodiscard]] const std::vector<UtilizationEvent>& events() const noexcept { return events_; }

    [[nodiscard]] Utilization utilization(std::uint32_t max_ref_count) const {
        return trikey::utilization(events_, max_ref_count);
    }

private:
    std::vector<UtilizationEvent> events_;
    std::optional<Clock::time_point> last_;
};

struct IterationStats {
    std::uint64_t records = 0;
    std::uint64_t keys = 0;
    std::uint64_t postings = 0;
    std::uint64_t bytes = 0;
    std::vector<FileStats> files;
    /// Wall time of each file task.
    std::vector<double> file_seconds;
    std::size_t phases = 0;
    double seconds = 0;
    UtilizationLog log;
};

/// Phase plan as half-open file index ranges.
inline std::vector<std::pair<std::size_t, std::size_t>> phase_ranges(const BuildConfig& cfg, std::size_t file_count) {
    cfg.validate(file_count);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (cfg.phases.empty()) {
        out.emplace_back(0, file_count);
        return out;
    }
    std::size_t at = 0;
    for (auto n : cfg.phases) {
        out.emplace_back(at, at + n);
        at += n;
    }
    return out;
}

/// Largest lemma that no index file from `first_file` on can use as a key
/// component: every such key has all components >= the smallest index_s.
inline std::int64_t reconstruction_threshold(const Layout& layout, std::size_t first_file) {
    LemmaId lo = layout.ws_count();
    for (std::size_t i = first_file; i < layout.size(); ++i) lo = std::min(lo, layout[i].index_s);
    return static_cast<std::int64_t>(lo) - 1;
}

/// Writes one index file: every group in layout order.
inline FileStats build_file(const DArray& d, const Layout& layout, std::size_t file, const BuildConfig& cfg,
                            const SegmentWriter& segment) {
    auto out = segment.open_file(file);
    const auto& config = layout[file];
    for (std::size_t g = 0; g < config.groups.size(); ++g) {
        GroupBuffer buffer;
        process_group(d, GroupTask::of(config, g, cfg.variant), cfg.max_distance, buffer);
        out.begin_group(g);
        for (auto& e : buffer.drain_blocks()) {
            out.append_block(e.key, e.block, e.count);
            std::vector<std::uint8_t>().swap(e.block);
        }
        out.end_group();
    }
    return out.finish();
}

/// Stage 2 for one iteration: builds every index file of the layout into
/// `segment`. Files run as concurrent tasks, at most cfg.thread_limit at a
/// time, phase by phase; between phases records that later files cannot use
/// are dropped from the occurrence array. The first task failure stops new
/// launches and is rethrown once running tasks finish.
inline IterationStats build_iteration(const DArray& d, const Layout& layout, const BuildConfig& cfg,
                                      const SegmentWriter& segment) {
    const auto started = std::chrono::steady_clock::now();
    IterationStats stats;
    stats.records = d.size();
    stats.files.resize(layout.size());
    stats.file_seconds.resize(layout.size());
    auto phases = phase_ranges(cfg, layout.size());
    stats.phases = phases.size();

    std::mutex mu;
    std::condition_variable cv;
    std::uint32_t ref_count = 0;
    std::exception_ptr failure;

    DArray reduced;
    const DArray* current = &d;
    for (std::size_t ph = 0; ph < phases.size(); ++ph) {
        if (ph > 0) {
            reduced = reconstruct_d(*current, reconstruction_threshold(layout, phases[ph].first));
            current = &reduced;
        }
        std::vector<std::thread> workers;
        for (std::size_t f = phases[ph].first; f < phases[ph].second; ++f) {
            {
                std::unique_lock lock(mu);
                cv.wait(lock, [&] { return ref_count < cfg.thread_limit; });
                if (failure) break;
                stats.log.change(ref_count, EventKind::Start, f);
                ++ref_count;
            }
            workers.emplace_back([&, f, data = current] {
                const auto t0 = std::chrono::steady_clock::now();
                std::exception_ptr err;
                FileStats fs_;
                try {
                    fs_ = build_file(*data, layout, f, cfg, segment);
                } catch (...) {
                    err = std::current_exception();
                }
                std::lock_guard lock(mu);
                if (err && !failure) failure = err;
                stats.files[f] = fs_;
                stats.file_seconds[f] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                stats.log.change(ref_count, EventKind::Finish, f);
                --ref_count;
                cv.notify_all();
            });
        }
        for (auto& w : workers) w.join();
        if (failure) std::rethrow_exception(failure);
    }
    for (const auto& f : stats.files) {
        stats.keys += f.keys;
        stats.postings += f.postings;
        stats.bytes += f.bytes;
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return stats;
}

}  // namespace trikey
