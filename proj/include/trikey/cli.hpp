#pragma once

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trikey/differential.hpp"
#include "trikey/index_store.hpp"
#include "trikey/lexicon.hpp"
#include "trikey/pipeline.hpp"
#include "trikey/query.hpp"

namespace trikey::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// "256M", "64k", "1G" or a plain byte count.
inline std::size_t parse_size(const std::string& text) {
    if (text.empty()) throw ConfigError("empty size");
    std::size_t idx = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &idx);
    } catch (const std::exception&) {
        throw ConfigError("bad size: " + text);
    }
    std::string suffix = text.substr(idx);
    std::transform(suffix.begin(), suffix.end(), suffix.begin(), [](unsigned char c) { return std::toupper(c); });
    if (suffix == "" || suffix == "B") return v;
    if (suffix == "K" || suffix == "KB") return v << 10;
    if (suffix == "M" || suffix == "MB") return v << 20;
    if (suffix == "G" || suffix == "GB") return v << 30;
    throw ConfigError("bad size suffix: " + text);
}

/// "2,2,3" -> {2, 2, 3}.
inline std::vector<std::size_t> parse_phases(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ',');) {
        try {
            std::size_t idx = 0;
            auto n = std::stoull(part, &idx);
            if (idx != part.size()) throw std::invalid_argument(part);
            out.push_back(n);
        } catch (const std::exception&) {
            throw ConfigError("bad phase list: " + text);
        }
    }
    return out;
}

/// Source settings remembered next to the index so that query and verify
/// see documents the way build did.
struct SourceSettings {
    Encoding encoding = Encoding::Utf8;
    bool dictionary = false;

    static constexpr const char* kFile = "source.json";
    static constexpr const char* kDictionary = "lemmas.tsv";

    void save(const fs::path& dir) const {
        nlohmann::ordered_json j;
        j["encoding"] = encoding == Encoding::Latin1 ? "latin1" : "utf-8";
        j["dictionary"] = dictionary;
        std::ofstream(dir / kFile) << j.dump(2) << '\n';
    }

    static SourceSettings load(const fs::path& dir) {
        SourceSettings s;
        if (auto text = read_file(dir / kFile)) {
            auto j = nlohmann::json::parse(*text);
            s.encoding = parse_encoding(j.value("encoding", "utf-8"));
            s.dictionary = j.value("dictionary", false);
        }
        return s;
    }
};

inline std::unique_ptr<Lemmatizer> make_lemmatizer(const std::optional<fs::path>& dictionary) {
    if (!dictionary) return std::make_unique<IdentityLemmatizer>();
    return std::make_unique<DictionaryLemmatizer>(DictionaryLemmatizer::load(*dictionary));
}

inline std::unique_ptr<Lemmatizer> index_lemmatizer(const fs::path& index, const SourceSettings& s) {
    if (!s.dictionary) return std::make_unique<IdentityLemmatizer>();
    return make_lemmatizer(index / SourceSettings::kDictionary);
}

inline std::string join_positions(const std::vector<Position>& ps) {
    std::string out;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(ps[i]);
    }
    return out;
}

struct Options {
    std::string corpus;
    std::string index;
    std::string out;
    std::string fl_list;
    std::string layout;
    std::string phases;
    std::string variant = "optimized";
    std::string encoding = "utf-8";
    std::string dictionary;
    std::string ram_limit = "256M";
    std::uint32_t max_distance = 5;
    std::uint32_t ws_count = 700;
    std::uint32_t fu_count = 2100;
    std::uint32_t threads = 4;
    std::size_t files = 8;
    bool append = false;
    bool json = false;
    bool all_hits = false;
    std::size_t limit = 0;
    std::vector<std::string> words;
    std::size_t windows = 1000;
    std::size_t random_cases = 0;
    std::uint64_t seed = 1;
    std::size_t oracle_limit = 200000;
};

inline BuildConfig build_config(const Options& o) {
    BuildConfig cfg;
    cfg.max_distance = o.max_distance;
    cfg.ws_count = o.ws_count;
    cfg.fu_count = o.fu_count;
    cfg.thread_limit = o.threads;
    cfg.ram_limit = parse_size(o.ram_limit);
    if (!o.phases.empty()) cfg.phases = parse_phases(o.phases);
    cfg.variant = parse_variant(o.variant);
    cfg.validate();
    return cfg;
}

inline int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err) {
    auto lemmatizer = make_lemmatizer(o.dictionary.empty() ? std::nullopt : std::optional<fs::path>(o.dictionary));
    auto docs = DocumentSource::open(o.corpus, parse_encoding(o.encoding));
    if (docs.size() == 0) err << "warning: corpus " << o.corpus << " has no documents\n";
    auto fl = build_fl_list(docs, *lemmatizer, &err);
    if (fl.empty() && docs.size() > 0) err << "warning: corpus " << o.corpus << " has no words\n";
    if (o.out.empty()) {
        fl.write(out);
    } else {
        fl.write(fs::path(o.out));
    }
    if (!o.out.empty()) {
        BuildConfig cfg;
        cfg.ws_count = o.ws_count;
        cfg.fu_count = o.fu_count;
        std::size_t classes[3] = {0, 0, 0};
        for (LemmaId i = 0; i < fl.size(); ++i) ++classes[static_cast<int>(classify(i, cfg))];
        if (o.json) {
            nlohmann::ordered_json j{{"documents", docs.size()},
                                     {"lemmas", fl.size()},
                                     {"stop", classes[static_cast<int>(LemmaClass::Stop)]},
                                     {"frequently_used", classes[static_cast<int>(LemmaClass::FrequentlyUsed)]},
                                     {"ordinary", classes[static_cast<int>(LemmaClass::Ordinary)]}};
            out << j.dump(2) << '\n';
        } else {
            out << "documents\t" << docs.size() << "\nlemmas\t" << fl.size() << "\nstop\t"
                << classes[static_cast<int>(LemmaClass::Stop)] << "\nfrequently_used\t"
                << classes[static_cast<int>(LemmaClass::FrequentlyUsed)] << "\nordinary\t"
                << classes[static_cast<int>(LemmaClass::Ordinary)] << '\n';
        }
    }
    return kExitOk;
}

inline int cmd_build(const Options& o, std::ostream& out, std::ostream& err) {
    IndexOptions opts;
    opts.config = build_config(o);
    opts.encoding = parse_encoding(o.encoding);
    opts.append = o.append;
    opts.plan.file_count_hint = o.files;
    fs::path index(o.index);
    std::unique_ptr<Lemmatizer> lemmatizer;
    if (o.append) {
        if (!o.dictionary.empty() || !o.fl_list.empty() || !o.layout.empty())
            throw ConfigError("--dictionary, --fl-list and --layout are fixed when the index is created");
        auto settings = SourceSettings::load(index);
        lemmatizer = index_lemmatizer(index, settings);
        opts.encoding = settings.encoding;
        // An appended batch must use the index's own distance unless the
        // caller insists on another (which is then rejected).
        auto stored = IndexStore::open(index).config();
        if (o.max_distance == Options{}.max_distance) opts.config.max_distance = stored.max_distance;
    } else {
        if (fs::exists(index / "store.json"))
            throw ConfigError("index already exists at " + index.string() + " (use --append to add documents)");
        lemmatizer = make_lemmatizer(o.dictionary.empty() ? std::nullopt : std::optional<fs::path>(o.dictionary));
        if (!o.layout.empty()) opts.layout = Layout::load(o.layout, opts.config.ws_count);
        if (!o.fl_list.empty()) opts.fl = FLList::read(fs::path(o.fl_list));
    }
    auto report = build_index(o.corpus, index, opts, *lemmatizer, &err);
    if (!o.append) {
        SourceSettings s{opts.encoding, !o.dictionary.empty()};
        if (s.dictionary) fs::copy_file(o.dictionary, index / SourceSettings::kDictionary,
                                        fs::copy_options::overwrite_existing);
        s.save(index);
    }
    if (o.json) {
        out << report.to_json().dump(2) << '\n';
    } else {
        out << "documents\t" << report.documents << "\nskipped\t" << report.skipped << "\niterations\t"
            << report.iterations.size() << "\nrecords\t" << report.records << "\nrecord_bytes\t" << report.d_bytes
            << "\nkeys\t" << report.keys << "\npostings\t" << report.postings << "\nindex_bytes\t" << report.bytes
            << "\nseconds\t" << std::fixed << std::setprecision(3) << report.seconds << '\n';
        if (report.utilization)
            out << "utilization\t" << report.utilization->u << "\nfull_utilization\t" << report.utilization->m
                << '\n';
        out.unsetf(std::ios::floatfield);
    }
    return kExitOk;
}

inline int cmd_query(const Options& o, std::ostream& out, std::ostream&) {
    fs::path index(o.index);
    auto store = IndexStore::open(index);
    auto lemmatizer = index_lemmatizer(index, SourceSettings::load(index));
    auto q = make_query(o.words, *lemmatizer, store.fl(), store.ws_count());
    auto hits = o.all_hits ? evaluate_raw(store, q) : evaluate(store, q);
    if (o.limit > 0 && hits.size() > o.limit) hits.resize(o.limit);
    if (o.json) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& h : hits)
            arr.push_back({{"id", h.id}, {"path", store.registry()[h.id].path}, {"tp", h.tp}, {"positions", h.positions}});
        out << arr.dump(2) << '\n';
    } else {
        for (const auto& h : hits)
            out << store.registry()[h.id].path << '\t' << h.tp << '\t' << join_positions(h.positions) << '\n';
    }
    return kExitOk;
}

inline int cmd_stats(const Options& o, std::ostream& out, std::ostream&) {
    auto store = IndexStore::open(o.index);
    auto st = store.stats();
    if (o.json) {
        nlohmann::ordered_json j;
        j["documents"] = st.documents;
        j["segments"] = st.segments;
        j["max_distance"] = store.max_distance();
        j["ws_count"] = store.ws_count();
        j["keys"] = st.keys;
        j["postings"] = st.postings;
        j["bytes"] = st.bytes;
        auto& files = j["files"] = nlohmann::ordered_json::array();
        for (const auto& f : st.files)
            files.push_back({{"file", f.file},
                             {"index_s", f.index_s},
                             {"index_e", f.index_e},
                             {"groups", f.groups},
                             {"keys", f.keys},
                             {"postings", f.postings},
                             {"bytes", f.bytes}});
        out << j.dump(2) << '\n';
    } else {
        out << "documents\t" << st.documents << "\nsegments\t" << st.segments << "\nmax_distance\t"
            << store.max_distance() << "\nws_count\t" << store.ws_count() << "\nkeys\t" << st.keys << "\npostings\t"
            << st.postings << "\nbytes\t" << st.bytes << '\n';
        out << "file\trange\tgroups\tkeys\tpostings\tbytes\n";
        for (const auto& f : st.files)
            out << f.file << '\t' << f.index_s << '-' << f.index_e << '\t' << f.groups << '\t' << f.keys << '\t'
                << f.postings << '\t' << f.bytes << '\n';
    }
    return kExitOk;
}

/// Differential run over random small inputs: both queue variants against
/// the oracle.
inline int verify_random(const Options& o, std::ostream& out) {
    std::mt19937_64 rng(o.seed);
    for (std::size_t i = 0; i < o.random_cases; ++i) {
        auto c = random_case(rng);
        auto expected = oracle_postings(c.d, oracle_config(c.task, c.max_distance));
        for (auto v : {Variant::Simplified, Variant::Optimized}) {
            auto actual = run_variant(c.d, c.task, v, c.max_distance);
            if (auto div = first_divergence(expected, actual)) {
                out << "divergence in case " << i << " (" << to_string(v) << ", max_distance " << c.max_distance
                    << ", index " << c.task.index_s << "-" << c.task.index_e << ", group " << c.task.group_s << "-"
                    << c.task.group_e << ") key " << to_string(div->key) << ": oracle " << describe(div->expected)
                    << ", variant " << describe(div->actual) << '\n';
                return kExitFailure;
            }
        }
    }
    out << "random cases\t" << o.random_cases << "\ndivergences\t0\n";
    return kExitOk;
}

inline int verify_index(const Options& o, std::ostream& out) {
    fs::path index(o.index);
    auto store = IndexStore::open(index);
    auto settings = SourceSettings::load(index);
    auto lemmatizer = index_lemmatizer(index, settings);
    bool ok = true;

    auto issues = store.check_blocks();
    for (const auto& issue : issues)
        out << "corrupt\tsegment " << issue.segment << " file " << issue.file << " key " << to_string(issue.key)
            << ": " << issue.message << '\n';
    ok = ok && issues.empty();
    out << "blocks\t" << (issues.empty() ? "ok" : "FAILED") << '\n';

    // Oracle differential over the re-read corpus, when it is small.
    std::vector<DRecord> d;
    bool oracle_run = true;
    for (DocId id = 0; id < store.registry().size(); ++id) {
        auto raw = read_file(store.registry()[id].path);
        if (!raw) throw Error("cannot re-read indexed document " + store.registry()[id].path);
        auto text = settings.encoding == Encoding::Latin1 ? latin1_to_utf8(*raw) : *raw;
        auto recs = document_records(text, id, *lemmatizer, store.fl(), store.ws_count());
        d.insert(d.end(), recs.records.begin(), recs.records.end());
        if (d.size() > o.oracle_limit) {
            oracle_run = false;
            break;
        }
    }
    if (oracle_run && issues.empty()) {
        const auto& layout = store.layout();
        bool same = true;
        for (std::size_t f = 0; f < layout.size() && same; ++f) {
            for (std::size_t g = 0; g < layout[f].groups.size() && same; ++g) {
                auto expected = oracle_postings(d, oracle_config(GroupTask::of(layout[f], g), store.max_distance()));
                PostingMap actual;
                store.for_each_key_in_group(f, g, [&](const TripleKey& k, const std::vector<TriplePosting>& ps) {
                    actual[k] = ps;
                });
                if (auto div = first_divergence(expected, actual)) {
                    out << "divergence\tfile " << f << " group " << g << " key " << to_string(div->key) << ": oracle "
                        << describe(div->expected) << ", index " << describe(div->actual) << '\n';
                    same = false;
                }
            }
        }
        ok = ok && same;
        out << "oracle\t" << (same ? "ok" : "FAILED") << '\n';
    } else {
        out << "oracle\tskipped\n";
    }

    if (issues.empty()) {
        auto rt = roundtrip_random(store, *lemmatizer, settings.encoding, o.windows, o.seed);
        for (const auto& w : rt.missed)
            out << "missed\tdocument " << w.id << " positions " << w.positions[0] << ',' << w.positions[1] << ','
                << w.positions[2] << '\n';
        out << "roundtrip\t" << rt.checked << " windows, " << rt.missed.size() << " missed\n";
        ok = ok && rt.missed.empty();
    }
    return ok ? kExitOk : kExitFailure;
}

inline int cmd_verify(const Options& o, std::ostream& out, std::ostream&) {
    if (o.index.empty() && o.random_cases == 0) throw ConfigError("verify needs --index or --random");
    int rc = kExitOk;
    if (o.random_cases > 0) rc = std::max(rc, verify_random(o, out));
    if (!o.index.empty()) rc = std::max(rc, verify_index(o, out));
    return rc;
}

inline int cmd_compact(const Options& o, std::ostream& out, std::ostream&) {
    auto store = IndexStore::open(o.index);
    auto before = store.segment_count();
    store.compact();
    out << "segments\t" << before << " -> " << store.segment_count() << '\n';
    return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Options o;
    CLI::App app{"Three-component key index for stop-lemma proximity search", "trikey"};
    app.require_subcommand(1);

    auto add_source = [&](CLI::App* cmd) {
        cmd->add_option("--encoding", o.encoding, "Document encoding: utf-8 or latin1")->envname("TRIKEY_ENCODING");
        cmd->add_option("--dictionary", o.dictionary, "Lemma dictionary (word TAB lemma[,lemma...])")
            ->envname("TRIKEY_DICTIONARY");
    };
    auto add_classes = [&](CLI::App* cmd) {
        cmd->add_option("--ws-count", o.ws_count, "Number of stop lemmas")->envname("TRIKEY_WS_COUNT");
        cmd->add_option("--fu-count", o.fu_count, "Number of frequently used lemmas")->envname("TRIKEY_FU_COUNT");
    };

    auto* analyze = app.add_subcommand("analyze", "Count lemmas and write the FL-list");
    analyze->add_option("corpus", o.corpus, "Corpus directory or manifest")->required();
    analyze->add_option("-o,--out", o.out, "FL-list output file (stdout if omitted)");
    analyze->add_flag("--json", o.json, "Summary as JSON");
    add_source(analyze);
    add_classes(analyze);

    auto* build = app.add_subcommand("build", "Build or extend an index");
    build->add_option("corpus", o.corpus, "Corpus directory or manifest")->required();
    build->add_option("index", o.index, "Index directory")->required();
    build->add_option("--fl-list", o.fl_list, "FL-list from analyze (counted from the corpus if omitted)");
    build->add_option("--layout", o.layout, "Layout file (planned if omitted)")->envname("TRIKEY_LAYOUT");
    build->add_option("--files", o.files, "Index file count hint for layout planning")->envname("TRIKEY_FILES");
    build->add_option("--max-distance", o.max_distance, "MaxDistance")->envname("TRIKEY_MAX_DISTANCE");
    build->add_option("--threads", o.threads, "Concurrent file tasks")->envname("TRIKEY_THREADS");
    build->add_option("--ram-limit", o.ram_limit, "Occurrence array budget per iteration, e.g. 256M")
        ->envname("TRIKEY_RAM_LIMIT");
    build->add_option("--phases", o.phases, "Files per phase, e.g. 2,2,4")->envname("TRIKEY_PHASES");
    build->add_option("--variant", o.variant, "simplified or optimized")->envname("TRIKEY_VARIANT");
    build->add_flag("--append", o.append, "Add the corpus to an existing index");
    build->add_flag("--json", o.json, "Report as JSON");
    add_source(build);
    add_classes(build);

    auto* query = app.add_subcommand("query", "Search stop-word queries");
    query->add_option("index", o.index, "Index directory")->required();
    query->add_option("words", o.words, "Query words")->required();
    query->add_option("--limit", o.limit, "Maximum hits (0 = all)");
    query->add_flag("--all", o.all_hits, "Every match instead of the best per document");
    query->add_flag("--json", o.json, "Hits as JSON");

    auto* stats = app.add_subcommand("stats", "Index statistics");
    stats->add_option("index", o.index, "Index directory")->required();
    stats->add_flag("--json", o.json, "Statistics as JSON");

    auto* verify = app.add_subcommand("verify", "Check an index or run random differential cases");
    verify->add_option("--index", o.index, "Index directory to check");
    verify->add_option("--random", o.random_cases, "Number of random differential cases");
    verify->add_option("--seed", o.seed, "Random seed");
    verify->add_option("--windows", o.windows, "Round-trip windows to search");
    verify->add_option("--oracle-limit", o.oracle_limit, "Largest occurrence count for the oracle comparison");

    auto* compact = app.add_subcommand("compact", "Merge all segments into one");
    compact->add_option("index", o.index, "Index directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(o, out, err);
        if (build->parsed()) return cmd_build(o, out, err);
        if (query->parsed()) return cmd_query(o, out, err);
        if (stats->parsed()) return cmd_stats(o, out, err);
        if (verify->parsed()) return cmd_verify(o, out, err);
        if (compact->parsed()) return cmd_compact(o, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const QueryError& e) {
        err << "error: " << e.what() << " (only stop-word queries of three or more words are supported)\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace trikey::cli
