#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "trikey/layout.hpp"
#include "trikey/queue.hpp"
#include "trikey/types.hpp"

namespace trikey {

/// One group of one index file: keys with f in [index_s, index_e] and s in
/// [group_s, group_e].
struct GroupTask {
    LemmaId index_s = 0;
    LemmaId index_e = 0;
    LemmaId group_s = 0;
    LemmaId group_e = 0;
    Variant variant = Variant::Optimized;

    static GroupTask of(const IndexFileConfig& file, std::size_t group, Variant v = Variant::Optimized) {
        const auto& g = file.groups.at(group);
        return {file.index_s, file.index_e, g.group_s, g.group_e, v};
    }

    [[nodiscard]] bool in_index(LemmaId lem) const noexcept { return index_s <= lem && lem <= index_e; }
    [[nodiscard]] bool in_group(LemmaId lem) const noexcept { return group_s <= lem && lem <= group_e; }

    /// A record that can be neither f nor s, and is too small to be t.
    [[nodiscard]] bool skips(LemmaId lem) const noexcept { return !in_index(lem) && !in_group(lem) && lem < group_s; }
};

/// Queue element: the record plus its ordinal in the group's input, which
/// identifies the same record across queues.
struct QueueElement {
    DRecord rec;
    std::uint64_t seq = 0;
    bool processed = false;
};

using Queue = OccurrenceQueue<QueueElement>;

/// Three-queue state of the optimized algorithm.
struct QueueSet {
    Queue f;
    Queue s;
    Queue t;

    [[nodiscard]] bool empty() const noexcept { return t.empty(); }
};

/// Hooks called by the group processors. The default does nothing.
struct NullObserver {
    void on_append(const Queue&) {}
    void on_extract(const QueueSet&) {}
    void on_extract(const Queue&) {}
};

namespace detail {

/// Tie rule for equal second and third lemmas: only the ordering with the
/// third word after the second is kept.
inline bool third_accepts(const DRecord& s, const DRecord& t) noexcept {
    return t.lem > s.lem || (t.lem == s.lem && t.p > s.p);
}

inline std::int64_t span(const DRecord& from, const DRecord& to) noexcept {
    return static_cast<std::int64_t>(to.p) - static_cast<std::int64_t>(from.p);
}

template <typename Sink>
inline void emit(Sink& sink, const DRecord& f, const DRecord& s, const DRecord& t) {
    sink(TripleKey{f.lem, s.lem, t.lem},
         TriplePosting{f.id, f.p, static_cast<Distance>(span(f, s)), static_cast<Distance>(span(f, t))});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Optimized algorithm: QueueF holds candidates for f, QueueS for s, QueueT
// every record that can take part in a key of this group.

/// Places a record into the queues it qualifies for. Returns false if the
/// record is skipped entirely.
inline bool enqueue(QueueSet& qs, const GroupTask& task, const DRecord& r, std::uint64_t seq) {
    if (task.skips(r.lem)) return false;
    QueueElement e{r, seq, false};
    if (task.in_index(r.lem)) qs.f.push_back(e);
    if (task.in_group(r.lem)) qs.s.push_back(e);
    qs.t.push_back(e);
    return true;
}

/// Emits every posting whose f-word is a QueueF element within max_distance
/// of QueueT's head, drops those elements from QueueF, then removes the head
/// from QueueT (and from QueueS / QueueF where it is also the head).
template <typename Sink>
std::uint64_t extract_first(QueueSet& qs, const GroupTask&, std::uint32_t max_distance, Sink& sink) {
    const auto head = qs.t.front();
    const std::int64_t md = max_distance;
    const std::int64_t f_limit = static_cast<std::int64_t>(head.rec.p) + md;
    std::uint64_t emitted = 0;
    std::size_t processed = 0;
    for (const auto& fe : qs.f) {
        const auto& f = fe.rec;
        if (f.p > f_limit) break;
        ++processed;
        for (const auto& se : qs.s) {
            const auto& s = se.rec;
            if (detail::span(f, s) > md) break;
            if (s.p == f.p || s.lem < f.lem) continue;
            for (const auto& te : qs.t) {
                const auto& t = te.rec;
                if (detail::span(f, t) > md) break;
                if (t.p == f.p || t.p == s.p || t.lem < f.lem || !detail::third_accepts(s, t)) continue;
                detail::emit(sink, f, s, t);
                ++emitted;
            }
        }
    }
    for (; processed > 0; --processed) qs.f.pop_front();
    qs.t.pop_front();
    if (!qs.s.empty() && qs.s.front().seq == head.seq) qs.s.pop_front();
    if (!qs.f.empty() && qs.f.front().seq == head.seq) qs.f.pop_front();
    return emitted;
}

template <typename Sink, typename Observer = NullObserver>
std::uint64_t flush_queues(QueueSet& qs, const GroupTask& task, std::uint32_t max_distance, Sink& sink,
                           Observer& obs) {
    std::uint64_t emitted = 0;
    while (!qs.t.empty()) {
        obs.on_extract(qs);
        emitted += extract_first(qs, task, max_distance, sink);
    }
    qs.s.clear();
    qs.f.clear();
    return emitted;
}

template <typename Sink>
std::uint64_t flush_queues(QueueSet& qs, const GroupTask& task, std::uint32_t max_distance, Sink& sink) {
    NullObserver obs;
    return flush_queues(qs, task, max_distance, sink, obs);
}

template <typename Records, typename Sink, typename Observer = NullObserver>
std::uint64_t process_group_optimized(const Records& d, const GroupTask& task, std::uint32_t max_distance,
                                      Sink& sink, Observer& obs) {
    QueueSet qs;
    const std::int64_t window = 2 * static_cast<std::int64_t>(max_distance);
    std::uint64_t emitted = 0;
    std::uint64_t seq = 0;
    for (const DRecord& r : d) {
        const auto this_seq = seq++;
        if (task.skips(r.lem)) continue;
        if (!qs.t.empty() && qs.t.front().rec.id != r.id) emitted += flush_queues(qs, task, max_distance, sink, obs);
        while (!qs.t.empty() && detail::span(qs.t.front().rec, r) > window) {
            obs.on_extract(qs);
            emitted += extract_first(qs, task, max_distance, sink);
        }
        enqueue(qs, task, r, this_seq);
        obs.on_append(qs.t);
    }
    emitted += flush_queues(qs, task, max_distance, sink, obs);
    return emitted;
}

template <typename Records, typename Sink>
std::uint64_t process_group_optimized(const Records& d, const GroupTask& task, std::uint32_t max_distance,
                                      Sink& sink) {
    NullObserver obs;
    return process_group_optimized(d, task, max_distance, sink, obs);
}

// ---------------------------------------------------------------------------
// Simplified algorithm: one queue holding every record, a Processed flag per
// element.

template <typename Sink>
std::uint64_t extract_first_simplified(Queue& q, const GroupTask& task, std::uint32_t max_distance, Sink& sink) {
    const auto head = q.front().rec;
    const std::int64_t md = max_distance;
    const std::int64_t f_limit = static_cast<std::int64_t>(head.p) + md;
    std::uint64_t emitted = 0;
    for (auto& fe : q) {
        const auto& f = fe.rec;
        if (f.p > f_limit) break;
        if (fe.processed || !task.in_index(f.lem)) continue;
        for (const auto& se : q) {
            const auto& s = se.rec;
            auto ds = detail::span(f, s);
            if (ds > md) break;
            if (ds < -md || s.p == f.p || s.lem < f.lem || !task.in_group(s.lem)) continue;
            for (const auto& te : q) {
                const auto& t = te.rec;
                auto dt = detail::span(f, t);
                if (dt > md) break;
                if (dt < -md || t.p == f.p || t.p == s.p || t.lem < s.lem || !detail::third_accepts(s, t)) continue;
                detail::emit(sink, f, s, t);
                ++emitted;
            }
        }
        fe.processed = true;
    }
    q.pop_front();
    return emitted;
}

template <typename Sink, typename Observer = NullObserver>
std::uint64_t flush_queue_simplified(Queue& q, const GroupTask& task, std::uint32_t max_distance, Sink& sink,
                                     Observer& obs) {
    std::uint64_t emitted = 0;
    while (!q.empty()) {
        obs.on_extract(q);
        emitted += extract_first_simplified(q, task, max_distance, sink);
    }
    return emitted;
}

template <typename Records, typename Sink, typename Observer = NullObserver>
std::uint64_t process_group_simplified(const Records& d, const GroupTask& task, std::uint32_t max_distance,
                                       Sink& sink, Observer& obs) {
    Queue q;
    const std::int64_t window = 2 * static_cast<std::int64_t>(max_distance);
    std::uint64_t emitted = 0;
    std::uint64_t seq = 0;
    for (const DRecord& r : d) {
        if (!q.empty() && q.front().rec.id != r.id) emitted += flush_queue_simplified(q, task, max_distance, sink, obs);
        while (!q.empty() && detail::span(q.front().rec, r) > window) {
            obs.on_extract(q);
            emitted += extract_first_simplified(q, task, max_distance, sink);
        }
        q.push_back({r, seq++, false});
        obs.on_append(q);
    }
    emitted += flush_queue_simplified(q, task, max_distance, sink, obs);
    return emitted;
}

template <typename Records, typename Sink>
std::uint64_t process_group_simplified(const Records& d, const GroupTask& task, std::uint32_t max_distance,
                                       Sink& sink) {
    NullObserver obs;
    return process_group_simplified(d, task, max_distance, sink, obs);
}

template <typename Records, typename Sink, typename Observer = NullObserver>
std::uint64_t process_group(const Records& d, const GroupTask& task, std::uint32_t max_distance, Sink& sink,
                            Observer& obs) {
    return task.variant == Variant::Simplified ? process_group_simplified(d, task, max_distance, sink, obs)
                                               : process_group_optimized(d, task, max_distance, sink, obs);
}

template <typename Records, typename Sink>
std::uint64_t process_group(const Records& d, const GroupTask& task, std::uint32_t max_distance, Sink& sink) {
    NullObserver obs;
    return process_group(d, task, max_distance, sink, obs);
}

// ---------------------------------------------------------------------------

/// Instrumented observer. At every extraction it checks, for each element
/// eligible as f (within max_distance of the queue head), that every input
/// record of the same document within max_distance of it and eligible for
/// the queues is present in QueueT. At every append it checks the window
/// bound QueueT.End.P - QueueT.Start.P <= 2 * max_distance.
class InvariantChecker {
public:
    InvariantChecker(std::vector<DRecord> input, const GroupTask& task, std::uint32_t max_distance)
        : input_(std::move(input)), task_(task), md_(max_distance) {}

    void on_append(const Queue& t) {
        ++span_checks_;
        if (detail::span(t.front().rec, t.back().rec) > 2 * static_cast<std::int64_t>(md_)) ++span_violations_;
    }

    void on_extract(const QueueSet& qs) {
        collect(qs.t);
        const auto limit = static_cast<std::int64_t>(qs.t.front().rec.p) + md_;
        for (const auto& f : qs.f) {
            if (f.rec.p > limit) break;
            check_around(f.seq);
        }
    }

    void on_extract(const Queue& q) {
        collect(q);
        const auto limit = static_cast<std::int64_t>(q.front().rec.p) + md_;
        for (const auto& f : q) {
            if (f.rec.p > limit) break;
            if (!f.processed && task_.in_index(f.rec.lem)) check_around(f.seq);
        }
    }

    [[nodiscard]] std::uint64_t containment_checks() const noexcept { return containment_checks_; }
    [[nodiscard]] std::uint64_t containment_violations() const noexcept { return containment_violations_; }
    [[nodiscard]] std::uint64_t span_checks() const noexcept { return span_checks_; }
    [[nodiscard]] std::uint64_t span_violations() const noexcept { return span_violations_; }

private:
    void collect(const Queue& t) {
        in_t_.clear();
        for (const auto& e : t) in_t_.push_back(e.seq);
    }

    [[nodiscard]] bool eligible(const DRecord& r) const noexcept {
        return task_.variant == Variant::Simplified || !task_.skips(r.lem);
    }

    void check_around(std::uint64_t seq) {
        ++containment_checks_;
        const auto& f = input_.at(seq);
        auto near = [&](const DRecord& r) {
            return r.id == f.id && std::abs(detail::span(f, r)) <= static_cast<std::int64_t>(md_);
        };
        auto present = [&](std::uint64_t j) { return std::binary_search(in_t_.begin(), in_t_.end(), j); };
        for (std::uint64_t j = seq + 1; j-- > 0 && near(input_[j]);)
            if (eligible(input_[j]) && !present(j)) ++containment_violations_;
        for (std::uint64_t j = seq + 1; j < input_.size() && near(input_[j]); ++j)
            if (eligible(input_[j]) && !present(j)) ++containment_violations_;
    }

    std::vector<DRecord> input_;
    GroupTask task_;
    std::uint32_t md_;
    std::vector<std::uint64_t> in_t_;
    std::uint64_t containment_checks_ = 0;
    std::uint64_t containment_violations_ = 0;
    std::uint64_t span_checks_ = 0;
    std::uint64_t span_violations_ = 0;
};

}  // namespace trikey
