#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trikey/lexicon.hpp"
#include "trikey/types.hpp"

namespace trikey {

/// Inclusive range of second key components.
struct GroupRange {
    LemmaId group_s = 0;
    LemmaId group_e = 0;

    [[nodiscard]] bool contains(LemmaId v) const noexcept { return group_s <= v && v <= group_e; }
    friend bool operator==(const GroupRange&, const GroupRange&) = default;
};

/// One index file: a first-component range and its ordered groups.
struct IndexFileConfig {
    LemmaId index_s = 0;
    LemmaId index_e = 0;
    std::vector<GroupRange> groups;

    [[nodiscard]] bool contains(LemmaId f) const noexcept { return index_s <= f && f <= index_e; }
    friend bool operator==(const IndexFileConfig&, const IndexFileConfig&) = default;
};

/// Slot permutation produced by canonicalize: key component k came from
/// query slot `slot[k]`.
struct Canonical {
    TripleKey key;
    std::array<std::size_t, 3> slot{0, 1, 2};
};

inline Canonical canonicalize(LemmaId a, LemmaId b, LemmaId c) {
    std::array<std::pair<LemmaId, std::size_t>, 3> v{{{a, 0}, {b, 1}, {c, 2}}};
    std::stable_sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    return {{v[0].first, v[1].first, v[2].first}, {v[0].second, v[1].second, v[2].second}};
}

struct Route {
    std::size_t file = 0;
    std::size_t group = 0;

    friend bool operator==(const Route&, const Route&) = default;
};

/// Partition of the canonical key space into index files and groups.
///
/// Files are listed in increasing first-component order. Consecutive files
/// may share the same first-component range (a file split by groups); such
/// a run of files is a family, and the concatenation of its groups must
/// cover [index_s, ws_count - 1] contiguously.
class Layout {
public:
    Layout() = default;

    Layout(std::vector<IndexFileConfig> files, std::uint32_t ws_count) : files_(std::move(files)), ws_count_(ws_count) {
        validate();
    }

    [[nodiscard]] const std::vector<IndexFileConfig>& files() const noexcept { return files_; }
    [[nodiscard]] std::size_t size() const noexcept { return files_.size(); }
    [[nodiscard]] const IndexFileConfig& operator[](std::size_t i) const { return files_.at(i); }
    [[nodiscard]] std::uint32_t ws_count() const noexcept { return ws_count_; }

    [[nodiscard]] std::optional<Route> try_route(const TripleKey& key) const noexcept {
        if (!key.canonical() || key.t >= ws_count_) return std::nullopt;
        auto fam = std::lower_bound(families_.begin(), families_.end(), key.f,
                                    [](const Family& fm, LemmaId f) { return fm.index_e < f; });
        if (fam == families_.end() || fam->index_s > key.f) return std::nullopt;
        auto g = std::lower_bound(fam->slots.begin(), fam->slots.end(), key.s,
                                  [](const GroupSlot& gs, LemmaId s) { return gs.group_e < s; });
        if (g == fam->slots.end() || files_[g->file].groups[g->group].group_s > key.s) return std::nullopt;
        return Route{g->file, g->group};
    }

    [[nodiscard]] Route route(const TripleKey& key) const {
        if (auto r = try_route(key)) return *r;
        throw ConfigError("key " + to_string(key) + " is not covered by the layout");
    }

    /// One line per file: "index_s-index_e : group_s-group_e, ...".
    [[nodiscard]] std::string format() const {
        std::ostringstream out;
        for (const auto& f : files_) {
            out << f.index_s << '-' << f.index_e << " :";
            for (std::size_t g = 0; g < f.groups.size(); ++g)
                out << (g ? ", " : " ") << f.groups[g].group_s << '-' << f.groups[g].group_e;
            out << '\n';
        }
        return out.str();
    }

    /// FNV-1a over the canonical text form.
    [[nodiscard]] std::uint64_t fingerprint() const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : format()) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    /// Parses the text form. ws_count is the last group end plus one and must
    /// match `expected_ws` when given.
    static Layout parse(std::string_view text, std::optional<std::uint32_t> expected_ws = std::nullopt) {
        std::vector<IndexFileConfig> files;
        std::istringstream in{std::string(text)};
        std::size_t line_no = 0;
        LemmaId max_e = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto fail = [&](const std::string& why) {
                return FormatError("layout line " + std::to_string(line_no) + ": " + why);
            };
            auto colon = line.find(':');
            if (colon == std::string::npos) throw fail("missing ':'");
            IndexFileConfig file;
            if (!parse_range(line.substr(0, colon), file.index_s, file.index_e)) throw fail("bad index range");
            std::string_view rest(line);
            rest.remove_prefix(colon + 1);
            while (!rest.empty()) {
                auto comma = rest.find(',');
                GroupRange g;
                if (!parse_range(rest.substr(0, comma), g.group_s, g.group_e)) throw fail("bad group range");
                file.groups.push_back(g);
                max_e = std::max(max_e, g.group_e);
                if (comma == std::string_view::npos) break;
                rest.remove_prefix(comma + 1);
            }
            if (file.groups.empty()) throw fail("no groups");
            files.push_back(std::move(file));
        }
        if (files.empty()) throw FormatError("layout is empty");
        std::uint32_t ws = max_e + 1;
        if (expected_ws && *expected_ws != ws)
            throw ConfigError("layout covers " + std::to_string(ws) + " stop lemmas but ws_count is " +
                              std::to_string(*expected_ws));
        return Layout(std::move(files), ws);
    }

    static Layout load(const fs::path& path, std::optional<std::uint32_t> expected_ws = std::nullopt) {
        auto text = read_file(path);
        if (!text) throw Error("cannot read layout: " + path.string());
        return parse(*text, expected_ws);
    }

    friend bool operator==(const Layout& a, const Layout& b) {
        return a.ws_count_ == b.ws_count_ && a.files_ == b.files_;
    }

private:
    struct GroupSlot {
        LemmaId group_e;
        std::size_t file;
        std::size_t group;
    };
    struct Family {
        LemmaId index_s;
        LemmaId index_e;
        std::vector<GroupSlot> slots;
    };

    static bool parse_range(std::string_view text, LemmaId& lo, LemmaId& hi) {
        std::string s(text);
        s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
        auto dash = s.find('-');
        if (dash == std::string::npos || dash == 0 || dash + 1 == s.size()) return false;
        try {
            std::size_t used = 0;
            auto a = std::stoull(s.substr(0, dash), &used);
            if (used != dash) return false;
            auto b = std::stoull(s.substr(dash + 1), &used);
            if (used != s.size() - dash - 1) return false;
            if (a > std::numeric_limits<LemmaId>::max() || b > std::numeric_limits<LemmaId>::max()) return false;
            lo = static_cast<LemmaId>(a);
            hi = static_cast<LemmaId>(b);
        } catch (const std::exception&) {
            return false;
        }
        return true;
    }

    void validate() {
        if (ws_count_ == 0) throw ConfigError("ws_count must be positive");
        if (files_.empty()) throw ConfigError("layout has no index files");
        families_.clear();
        const LemmaId last = ws_count_ - 1;
        LemmaId next_index = 0;
        LemmaId next_group = 0;
        for (std::size_t i = 0; i < files_.size(); ++i) {
            const auto& file = files_[i];
            auto where = "index file " + std::to_string(i) + ": ";
            if (file.index_s > file.index_e) throw ConfigError(where + "index_s > index_e");
            if (file.groups.empty()) throw ConfigError(where + "no groups");
            bool continues = !families_.empty() && families_.back().index_s == file.index_s &&
                             families_.back().index_e == file.index_e && next_group <= last &&
                             families_.back().slots.back().group_e != last;
            if (!continues) {
                if (!families_.empty() && families_.back().slots.back().group_e != last)
                    throw ConfigError("index file " + std::to_string(i - 1) + ": groups must extend to " +
                                      std::to_string(last));
                if (file.index_s != next_index)
                    throw ConfigError(where + "first-component range must start at " + std::to_string(next_index));
                if (file.index_e > last) throw ConfigError(where + "index_e exceeds ws_count - 1");
                families_.push_back({file.index_s, file.index_e, {}});
                next_index = file.index_e + 1;
                next_group = file.index_s;
            }
            for (std::size_t g = 0; g < file.groups.size(); ++g) {
                const auto& gr = file.groups[g];
                auto gw = where + "group " + std::to_string(g) + ": ";
                if (gr.group_s > gr.group_e) throw ConfigError(gw + "group_s > group_e");
                if (gr.group_s != next_group)
                    throw ConfigError(gw + "expected group_s " + std::to_string(next_group) + ", got " +
                                      std::to_string(gr.group_s));
                if (gr.group_e > last) throw ConfigError(gw + "group_e exceeds ws_count - 1");
                families_.back().slots.push_back({gr.group_e, i, g});
                next_group = gr.group_e + 1;
            }
        }
        if (families_.back().slots.back().group_e != last)
            throw ConfigError("last index file: groups must extend to " + std::to_string(last));
        if (next_index != ws_count_)
            throw ConfigError("index files cover [0, " + std::to_string(next_index - 1) + "], expected [0, " +
                              std::to_string(last) + "]");
    }

    std::vector<IndexFileConfig> files_;
    std::uint32_t ws_count_ = 0;
    std::vector<Family> families_;
};

/// Splits a file into `parts` files with the same first-component range and
/// contiguous runs of its groups (earlier parts take the remainder).
inline std::vector<IndexFileConfig> split_file_by_groups(const IndexFileConfig& config, std::size_t parts) {
    if (parts == 0) throw ConfigError("cannot split into zero parts");
    if (parts > config.groups.size())
        throw ConfigError("cannot split " + std::to_string(config.groups.size()) + " groups into " +
                          std::to_string(parts) + " files");
    std::vector<IndexFileConfig> out;
    std::size_t base = config.groups.size() / parts;
    std::size_t extra = config.groups.size() % parts;
    auto it = config.groups.begin();
    for (std::size_t i = 0; i < parts; ++i) {
        auto n = static_cast<std::ptrdiff_t>(base + (i < extra ? 1 : 0));
        out.push_back({config.index_s, config.index_e, {it, it + n}});
        it += n;
    }
    return out;
}

/// The four-file, 150-stop-lemma layout used as a reference fixture.
inline Layout example_layout() {
    return Layout::parse(
        "0-4 : 0-54, 55-149\n"
        "5-15 : 5-32, 33-60, 61-104, 105-149\n"
        "16-52 : 16-37, 38-47, 48-56, 57-66, 67-77, 78-90, 91-107, 108-143, 144-149\n"
        "53-149 : 53-80, 81-94, 95-107, 108-121, 122-149\n");
}

struct PlanOptions {
    std::size_t file_count_hint = 8;
    /// Upper bound on the number of possible keys handled by one group.
    std::uint64_t max_keys_per_group = std::uint64_t{1} << 22;
};

namespace detail {

/// Contiguous split of `weights` into exactly `k` non-empty parts minimizing
/// the sum of squared part weights. Returns the end index of each part.
inline std::vector<std::size_t> balanced_split(const std::vector<double>& weights, std::size_t k) {
    const std::size_t n = weights.size();
    k = std::clamp<std::size_t>(k, 1, n);
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + weights[i];
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> cost(k + 1, std::vector<double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> cut(k + 1, std::vector<std::size_t>(n + 1, 0));
    cost[0][0] = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
        for (std::size_t i = j; i <= n - (k - j); ++i) {
            for (std::size_t m = j - 1; m < i; ++m) {
                if (cost[j - 1][m] == inf) continue;
                double w = prefix[i] - prefix[m];
                double c = cost[j - 1][m] + w * w;
                if (c < cost[j][i]) {
                    cost[j][i] = c;
                    cut[j][i] = m;
                }
            }
        }
    }
    std::vector<std::size_t> ends(k);
    std::size_t i = n;
    for (std::size_t j = k; j > 0; --j) {
        ends[j - 1] = i;
        i = cut[j][i];
    }
    return ends;
}

}  // namespace detail

/// Estimated work of the keys with f in [index_s, index_e] and s in
/// [s_lo, s_hi]: sum over f <= s of count(f) * count(s).
inline double estimated_weight(const std::vector<double>& counts, LemmaId index_s, LemmaId index_e, LemmaId s_lo,
                               LemmaId s_hi) {
    double total = 0.0;
    double f_mass = 0.0;
    for (LemmaId s = index_s; s <= s_hi && s < counts.size(); ++s) {
        if (s <= index_e) f_mass += counts[s];
        if (s >= s_lo) total += counts[s] * f_mass;
    }
    return total;
}

/// Per-lemma counts used by the planner: FL-list counts of the first
/// ws_count lemmas, padded with 1 when the list is shorter.
inline std::vector<double> planning_counts(const FLList& fl, std::uint32_t ws_count) {
    std::vector<double> counts(ws_count, 1.0);
    for (std::size_t i = 0; i < ws_count && i < fl.size(); ++i)
        counts[i] = std::max<double>(1.0, static_cast<double>(fl[static_cast<LemmaId>(i)].count));
    return counts;
}

/// Weight-balanced layout: contiguous first-component ranges, heavy ranges
/// split by second component into several files, groups bounded by key count.
inline Layout plan_layout(const FLList& fl, const BuildConfig& cfg, const PlanOptions& opts = {}) {
    const std::uint32_t ws = cfg.ws_count;
    if (ws == 0) throw ConfigError("ws_count must be positive");
    const auto counts = planning_counts(fl, ws);
    const std::size_t hint = std::max<std::size_t>(1, opts.file_count_hint);

    std::vector<double> f_weight(ws);
    {
        double suffix = 0.0;
        for (std::size_t f = ws; f-- > 0;) {
            suffix += counts[f];
            f_weight[f] = counts[f] * suffix;
        }
    }
    double total = 0.0;
    for (double w : f_weight) total += w;

    struct Part {
        LemmaId index_s, index_e, s_lo, s_hi;
        double weight;
    };

    auto plan_with = [&](std::size_t k_first) {
        const double target = total / static_cast<double>(hint);
        std::vector<Part> parts;
        std::size_t begin = 0;
        for (auto end : detail::balanced_split(f_weight, k_first)) {
            auto is = static_cast<LemmaId>(begin), ie = static_cast<LemmaId>(end - 1);
            double w = 0.0;
            for (std::size_t f = begin; f < end; ++f) w += f_weight[f];
            auto m = static_cast<std::size_t>(std::max(1.0, std::round(w / target)));
            if (m == 1) {
                parts.push_back({is, ie, is, ws - 1, w});
            } else {
                // Per-s weight restricted to this first-component range.
                std::vector<double> s_weight(ws - is, 0.0);
                double f_mass = 0.0;
                for (LemmaId s = is; s < ws; ++s) {
                    if (s <= ie) f_mass += counts[s];
                    s_weight[s - is] = counts[s] * f_mass;
                }
                std::size_t sb = 0;
                for (auto se : detail::balanced_split(s_weight, m)) {
                    double pw = 0.0;
                    for (std::size_t i = sb; i < se; ++i) pw += s_weight[i];
                    parts.push_back({is, ie, static_cast<LemmaId>(is + sb), static_cast<LemmaId>(is + se - 1), pw});
                    sb = se;
                }
            }
            begin = end;
        }
        return parts;
    };

    auto ratio_of = [](const std::vector<Part>& parts) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& p : parts) {
            lo = std::min(lo, p.weight);
            hi = std::max(hi, p.weight);
        }
        return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    };

    std::vector<Part> best;
    double best_ratio = std::numeric_limits<double>::infinity();
    std::size_t best_gap = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 1; k <= std::min<std::size_t>(ws, hint + 1); ++k) {
        auto parts = plan_with(k);
        double ratio = ratio_of(parts);
        std::size_t gap = parts.size() > hint ? parts.size() - hint : hint - parts.size();
        bool ok = ratio <= 2.0 && gap <= 1;
        bool best_ok = best_ratio <= 2.0 && best_gap <= 1;
        bool better = best.empty() || (ok && !best_ok) ||
                      (ok == best_ok && (ok ? (gap < best_gap || (gap == best_gap && ratio < best_ratio))
                                            : ratio < best_ratio));
        if (better) {
            best = std::move(parts);
            best_ratio = ratio;
            best_gap = gap;
        }
    }

    std::vector<IndexFileConfig> files;
    for (const auto& part : best) {
        IndexFileConfig file{part.index_s, part.index_e, {}};
        LemmaId gs = part.s_lo;
        std::uint64_t keys = 0;
        for (LemmaId s = part.s_lo; s <= part.s_hi; ++s) {
            std::uint64_t firsts = std::min(s, part.index_e) - part.index_s + 1;
            std::uint64_t k = firsts * (ws - s);
            if (s > gs && keys + k > opts.max_keys_per_group) {
                file.groups.push_back({gs, s - 1});
                gs = s;
                keys = 0;
            }
            keys += k;
        }
        file.groups.push_back({gs, part.s_hi});
        files.push_back(std::move(file));
    }
    return Layout(std::move(files), ws);
}

}  // namespace trikey
