#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trikey/types.hpp"

namespace trikey {

namespace fs = std::filesystem;

enum class Encoding { Utf8, Latin1 };

inline Encoding parse_encoding(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == "utf-8" || name == "utf8") return Encoding::Utf8;
    if (name == "latin1" || name == "latin-1" || name == "iso-8859-1") return Encoding::Latin1;
    throw ConfigError("unsupported encoding: " + name);
}

inline std::string latin1_to_utf8(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (unsigned char c : in) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

inline std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) return std::nullopt;
    return text;
}

/// Ordered list of source documents: a directory (walked recursively, paths
/// sorted) or a manifest file with one path per line.
class DocumentSource {
public:
    DocumentSource() = default;
    explicit DocumentSource(std::vector<fs::path> paths, Encoding enc = Encoding::Utf8)
        : paths_(std::move(paths)), encoding_(enc) {}

    static DocumentSource open(const fs::path& corpus, Encoding enc = Encoding::Utf8) {
        std::error_code ec;
        if (fs::is_directory(corpus, ec)) {
            std::vector<fs::path> paths;
            for (const auto& entry : fs::recursive_directory_iterator(corpus))
                if (entry.is_regular_file()) paths.push_back(entry.path());
            std::sort(paths.begin(), paths.end());
            return DocumentSource(std::move(paths), enc);
        }
        if (!fs::is_regular_file(corpus, ec)) throw Error("corpus not found: " + corpus.string());
        std::ifstream in(corpus);
        if (!in) throw Error("cannot read manifest: " + corpus.string());
        std::vector<fs::path> paths;
        auto base = corpus.parent_path();
        for (std::string line; std::getline(in, line);) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            fs::path p(line);
            paths.push_back(p.is_relative() ? base / p : p);
        }
        return DocumentSource(std::move(paths), enc);
    }

    [[nodiscard]] std::size_t size() const noexcept { return paths_.size(); }
    [[nodiscard]] const fs::path& path(std::size_t i) const { return paths_.at(i); }
    [[nodiscard]] Encoding encoding() const noexcept { return encoding_; }

    /// Document text converted to UTF-8, or nullopt if unreadable.
    [[nodiscard]] std::optional<std::string> read(std::size_t i) const {
        auto text = read_file(paths_.at(i));
        if (text && encoding_ == Encoding::Latin1) return latin1_to_utf8(*text);
        return text;
    }

private:
    std::vector<fs::path> paths_;
    Encoding encoding_ = Encoding::Utf8;
};

}  // namespace trikey
