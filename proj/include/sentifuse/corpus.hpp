#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "label.hpp"
#include "rational.hpp"
#include "registry.hpp"

namespace sentifuse {

struct Post {
    std::string id;
    std::string text;
    Language language;
    Topic topic;
    std::optional<SentimentLabel> gold_label;

    friend bool operator==(const Post&, const Post&) = default;
};

enum class CorpusFormat { csv, jsonl };

inline CorpusFormat format_from_path(const std::filesystem::path& path) {
    const std::string ext = ascii_lower(path.extension().string());
    if (ext == ".csv") return CorpusFormat::csv;
    if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::jsonl;
    throw DataError("cannot infer corpus format from extension '" + ext + "' (expected .csv or .jsonl)");
}

namespace detail {

inline bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

inline bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool starts_with_icase(std::string_view s, std::size_t pos, std::string_view prefix) {
    if (s.size() - pos < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[pos + i])) != prefix[i]) return false;
    }
    return true;
}

inline std::string replace_urls(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const bool boundary = i == 0 || !is_word_char(static_cast<unsigned char>(s[i - 1]));
        if (boundary && (starts_with_icase(s, i, "http://") || starts_with_icase(s, i, "https://") ||
                         starts_with_icase(s, i, "www."))) {
            while (i < s.size() && !is_ascii_space(static_cast<unsigned char>(s[i]))) ++i;
            out += "<url>";
            continue;
        }
        out.push_back(s[i++]);
    }
    return out;
}

// '>' also blocks a mention so that "<user>@x" (from "@a@x") stays put on a second pass.
inline std::string replace_mentions(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] == '@' && i + 1 < s.size() && is_word_char(static_cast<unsigned char>(s[i + 1]))) {
            const bool boundary =
                i == 0 || (!is_word_char(static_cast<unsigned char>(s[i - 1])) && s[i - 1] != '>');
            if (boundary) {
                ++i;
                while (i < s.size() && is_word_char(static_cast<unsigned char>(s[i]))) ++i;
                out += "<user>";
                continue;
            }
        }
        out.push_back(s[i++]);
    }
    return out;
}

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_ascii_space(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

inline bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        if (len == 0 || i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        }
        i += len;
    }
    return true;
}

}  // namespace detail

// Replaces URLs with "<url>" and @-mentions with "<user>", collapses whitespace runs and
// trims. Case, emoji and hashtags are kept. Idempotent.
inline std::string normalize_text(std::string_view raw) {
    return detail::collapse_whitespace(detail::replace_mentions(detail::replace_urls(raw)));
}

inline std::size_t count_words(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = detail::is_ascii_space(static_cast<unsigned char>(c));
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

namespace detail {

struct RawRow {
    std::string id, text, language, topic;
    std::optional<std::string> gold;
};

inline Post make_post(RawRow raw, std::size_t row, const Schema& schema, std::unordered_set<std::string>& seen) {
    if (raw.id.empty()) throw DataError("empty id", row);
    if (!valid_utf8(raw.text) || !valid_utf8(raw.id)) throw DataError("text is not valid UTF-8", row);
    if (!seen.insert(raw.id).second) throw DataError("duplicate id '" + raw.id + "'", row);

    Post post;
    post.id = std::move(raw.id);
    post.text = normalize_text(raw.text);
    if (post.text.empty()) throw DataError("text of '" + post.id + "' is empty after normalization", row);

    auto language = schema.languages.find(raw.language);
    if (!language) throw DataError("unknown language '" + raw.language + "'", row);
    post.language = *language;

    auto topic = schema.topics.find(raw.topic);
    if (!topic) throw DataError("unknown topic '" + raw.topic + "'", row);
    post.topic = *topic;

    if (raw.gold && !trim(*raw.gold).empty()) {
        auto label = parse_label(*raw.gold);
        if (!label) throw DataError("unknown gold_label '" + *raw.gold + "'", row);
        post.gold_label = label;
    }
    return post;
}

inline std::vector<Post> read_csv_corpus(std::istream& in, const Schema& schema) {
    csv::Reader reader(in);
    auto header_row = reader.next();
    if (!header_row) return {};
    const csv::Header header(*header_row);
    const std::size_t id_col = header.require("id");
    const std::size_t text_col = header.require("text");
    const std::size_t lang_col = header.require("language");
    const std::size_t topic_col = header.require("topic");
    const std::optional<std::size_t> gold_col = header.find("gold_label");

    std::vector<Post> posts;
    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    while (auto fields = reader.next()) {
        ++row;
        const std::size_t needed = std::max({id_col, text_col, lang_col, topic_col}) + 1;
        if (fields->size() < needed) {
            throw DataError("expected " + std::to_string(header_row->size()) + " fields, got " +
                                std::to_string(fields->size()),
                            row);
        }
        RawRow raw{(*fields)[id_col], (*fields)[text_col], (*fields)[lang_col], (*fields)[topic_col], {}};
        if (gold_col && *gold_col < fields->size()) raw.gold = (*fields)[*gold_col];
        posts.push_back(make_post(std::move(raw), row, schema, seen));
    }
    return posts;
}

inline std::vector<Post> read_jsonl_corpus(std::istream& in, const Schema& schema) {
    std::vector<Post> posts;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("invalid JSON: ") + e.what(), row);
        }
        if (!obj.is_object()) throw DataError("expected a JSON object", row);
        auto field = [&](const char* key) -> std::string {
            auto it = obj.find(key);
            if (it == obj.end()) throw DataError(std::string("missing required key '") + key + "'", row);
            if (!it->is_string()) throw DataError(std::string("key '") + key + "' must be a string", row);
            return it->get<std::string>();
        };
        RawRow raw{field("id"), field("text"), field("language"), field("topic"), {}};
        if (auto it = obj.find("gold_label"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) throw DataError("key 'gold_label' must be a string", row);
            raw.gold = it->get<std::string>();
        }
        posts.push_back(make_post(std::move(raw), row, schema, seen));
    }
    return posts;
}

}  // namespace detail

inline std::vector<Post> read_corpus(std::istream& in, CorpusFormat format, const Schema& schema = {}) {
    return format == CorpusFormat::csv ? detail::read_csv_corpus(in, schema) : detail::read_jsonl_corpus(in, schema);
}

// Loads a csv or jsonl corpus; row order is preserved and every text is normalized.
inline std::vector<Post> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                     const Schema& schema = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file '" + path.string() + "'");
    try {
        return read_corpus(in, format, schema);
    } catch (const DataError& e) {
        throw DataError(path.filename().string() + ": " + e.what());
    }
}

inline void write_corpus(std::ostream& out, const std::vector<Post>& posts, CorpusFormat format) {
    if (format == CorpusFormat::csv) {
        out << "id,text,language,topic,gold_label\n";
        for (const auto& p : posts) {
            out << csv::join({p.id, p.text, p.language.name, p.topic.name,
                              p.gold_label ? std::string(to_string(*p.gold_label)) : std::string()})
                << '\n';
        }
        return;
    }
    for (const auto& p : posts) {
        nlohmann::ordered_json obj;
        obj["id"] = p.id;
        obj["text"] = p.text;
        obj["language"] = p.language.name;
        obj["topic"] = p.topic.name;
        if (p.gold_label) obj["gold_label"] = std::string(to_string(*p.gold_label));
        out << obj.dump() << '\n';
    }
}

inline std::vector<Post> filter_by_topic(const std::vector<Post>& posts, const Topic& topic) {
    std::vector<Post> out;
    for (const auto& p : posts) {
        if (p.topic == topic) out.push_back(p);
    }
    return out;
}

struct CorpusStats {
    std::map<std::pair<Language, Topic>, std::size_t> post_count;
    std::map<Language, Rational> mean_word_tokens;
    std::size_t total = 0;

    std::size_t count(const Language& language, const Topic& topic) const {
        auto it = post_count.find({language, topic});
        return it == post_count.end() ? 0 : it->second;
    }
};

inline CorpusStats corpus_stats(const std::vector<Post>& posts) {
    CorpusStats stats;
    std::map<Language, std::pair<std::int64_t, std::int64_t>> words;  // (tokens, posts)
    for (const auto& p : posts) {
        ++stats.post_count[{p.language, p.topic}];
        auto& w = words[p.language];
        w.first += static_cast<std::int64_t>(count_words(p.text));
        w.second += 1;
    }
    for (const auto& [language, w] : words) stats.mean_word_tokens[language] = Rational(w.first, w.second);
    stats.total = posts.size();
    return stats;
}

inline nlohmann::ordered_json to_json(const CorpusStats& stats) {
    nlohmann::ordered_json j;
    j["total"] = stats.total;
    auto& cells = j["post_count"] = nlohmann::ordered_json::array();
    for (const auto& [key, n] : stats.post_count) {
        cells.push_back({{"language", key.first.name}, {"topic", key.second.name}, {"posts", n}});
    }
    auto& means = j["mean_word_tokens"] = nlohmann::ordered_json::object();
    for (const auto& [language, mean] : stats.mean_word_tokens) {
        means[language.name] = {{"exact", to_fraction_string(mean)}, {"value", format_fixed(mean, 2)}};
    }
    return j;
}

}  // namespace sentifuse
