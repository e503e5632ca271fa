#pragma once

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trikey/builder.hpp"
#include "trikey/corpus.hpp"
#include "trikey/index_store.hpp"
#include "trikey/ingest.hpp"
#include "trikey/layout.hpp"
#include "trikey/lexicon.hpp"

namespace trikey {

struct IndexOptions {
    BuildConfig config;
    Encoding encoding = Encoding::Utf8;
    /// Explicit layout; planned from the FL-list when absent.
    std::optional<Layout> layout;
    /// Precomputed FL-list; counted over the corpus when absent.
    std::optional<FLList> fl;
    PlanOptions plan;
    /// Add documents to an existing index instead of creating one.
    bool append = false;
};

struct IterationSummary {
    std::size_t documents = 0;
    std::uint64_t records = 0;
    std::uint64_t d_bytes = 0;
    std::uint64_t postings = 0;
    std::uint64_t bytes = 0;
    double seconds = 0;
};

struct FileReport {
    std::uint64_t postings = 0;
    std::uint64_t bytes = 0;
    double seconds = 0;
};

struct BuildReport {
    std::size_t documents = 0;
    std::size_t skipped = 0;
    std::uint64_t records = 0;
    std::uint64_t d_bytes = 0;
    std::uint64_t keys = 0;
    std::uint64_t postings = 0;
    std::uint64_t bytes = 0;
    std::size_t files = 0;
    double seconds = 0;
    std::uint32_t max_ref_count = 0;
    std::optional<Utilization> utilization;
    std::vector<FileReport> per_file;
    std::vector<IterationSummary> iterations;
    UtilizationLog log;

    [[nodiscard]] double bytes_per_record() const noexcept {
        return records == 0 ? 0.0 : static_cast<double>(d_bytes) / static_cast<double>(records);
    }

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["documents"] = documents;
        j["skipped"] = skipped;
        j["records"] = records;
        j["record_bytes"] = d_bytes;
        j["keys"] = keys;
        j["postings"] = postings;
        j["index_bytes"] = bytes;
        j["files"] = files;
        j["seconds"] = seconds;
        j["max_ref_count"] = max_ref_count;
        double total_delta = 0;
        for (const auto& e : log.events()) total_delta += e.delta;
        j["total_delta"] = total_delta;
        if (utilization) {
            j["utilization"] = utilization->u;
            j["full_utilization"] = utilization->m;
        } else {
            j["utilization"] = nullptr;
            j["full_utilization"] = nullptr;
        }
        auto& pf = j["per_file"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < per_file.size(); ++i)
            pf.push_back({{"file", i},
                          {"postings", per_file[i].postings},
                          {"index_bytes", per_file[i].bytes},
                          {"seconds", per_file[i].seconds}});
        auto& its = j["iterations"] = nlohmann::ordered_json::array();
        for (const auto& it : iterations)
            its.push_back({{"documents", it.documents},
                           {"records", it.records},
                           {"record_bytes", it.d_bytes},
                           {"postings", it.postings},
                           {"index_bytes", it.bytes},
                           {"seconds", it.seconds}});
        return j;
    }
};

/// Builds (or extends) the index at `index_dir` from a corpus directory or
/// manifest. Each iteration ingests documents up to the RAM budget, builds a
/// segment from them and commits it; a failed iteration leaves the index as
/// of the previous commit.
inline BuildReport build_index(const fs::path& corpus, const fs::path& index_dir, const IndexOptions& options,
                               const Lemmatizer& lemmatizer, std::ostream* diag = &std::cerr) {
    const auto started = std::chrono::steady_clock::now();
    auto docs = DocumentSource::open(fs::absolute(corpus), options.encoding);
    BuildConfig cfg = options.config;

    std::optional<IndexStore> store;
    if (options.append) {
        store.emplace(IndexStore::open(index_dir));
        auto stored = store->config();
        cfg.ws_count = stored.ws_count;
        cfg.fu_count = stored.fu_count;
        cfg.max_distance = stored.max_distance;
        if (options.config.max_distance != stored.max_distance)
            throw ConfigError("index was built with max_distance " + std::to_string(stored.max_distance));
        cfg.validate(store->layout().size());
    } else {
        cfg.validate();
        auto fl = options.fl ? *options.fl : build_fl_list(docs, lemmatizer, diag);
        Layout layout = options.layout ? *options.layout : plan_layout(fl, cfg, options.plan);
        if (layout.ws_count() != cfg.ws_count)
            throw ConfigError("layout covers " + std::to_string(layout.ws_count()) + " stop lemmas, expected " +
                              std::to_string(cfg.ws_count));
        cfg.validate(layout.size());
        store.emplace(IndexStore::create(index_dir, layout, cfg, fl));
    }

    BuildReport report;
    report.files = store->layout().size();
    report.per_file.resize(report.files);
    report.max_ref_count = cfg.thread_limit;
    auto registry = store->registry();
    std::size_t cursor = 0;
    while (cursor < docs.size()) {
        auto ing = ingest_iteration(docs, cursor, store->fl(), cfg, lemmatizer, registry, diag);
        cursor = ing.cursor;
        report.skipped += ing.skipped;
        IterationSummary summary;
        summary.documents = ing.documents;
        summary.records = ing.d.size();
        summary.d_bytes = ing.d.byte_size();
        if (ing.d.empty()) {
            store->commit(nullptr, registry);
        } else {
            auto segment = store->begin_segment();
            auto stats = build_iteration(ing.d, store->layout(), cfg, *segment);
            store->commit(segment.get(), registry);
            summary.postings = stats.postings;
            summary.bytes = stats.bytes;
            summary.seconds = stats.seconds;
            report.log.append(stats.log);
            for (std::size_t f = 0; f < report.files; ++f) {
                report.per_file[f].postings += stats.files[f].postings;
                report.per_file[f].bytes += stats.files[f].bytes;
                report.per_file[f].seconds += stats.file_seconds[f];
            }
        }
        report.documents += summary.documents;
        report.records += summary.records;
        report.d_bytes += summary.d_bytes;
        report.postings += summary.postings;
        report.bytes += summary.bytes;
        report.iterations.push_back(summary);
    }
    report.keys = store->stats().keys;
    if (!report.log.events().empty()) {
        try {
            report.utilization = report.log.utilization(cfg.thread_limit);
        } catch (const Error&) {
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ofstream(index_dir / "build_report.json") << report.to_json().dump(2) << '\n';
    return report;
}

}  // namespace trikey
