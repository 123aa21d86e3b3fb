#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "fusion.hpp"
#include "rational.hpp"
#include "registry.hpp"

namespace sentifuse {

class UndefinedScoreError : public DataError {
public:
    using DataError::DataError;
};

struct SentimentCounts {
    std::int64_t negative = 0;
    std::int64_t neutral = 0;
    std::int64_t positive = 0;

    std::int64_t total() const noexcept { return negative + neutral + positive; }
    std::int64_t& operator[](SentimentLabel l) {
        return l == SentimentLabel::negative ? negative : l == SentimentLabel::neutral ? neutral : positive;
    }
    SentimentCounts& operator+=(const SentimentCounts& o) {
        negative += o.negative;
        neutral += o.neutral;
        positive += o.positive;
        return *this;
    }
    friend bool operator==(const SentimentCounts&, const SentimentCounts&) = default;
};

// (#positive - #negative) / (#positive + #negative + w * #neutral); w = 1 is the plain
// overall sentiment score. Throws when the denominator is zero.
inline Rational overall_sentiment_score(const SentimentCounts& counts, const Rational& neutral_weight = Rational(1)) {
    if (counts.negative < 0 || counts.neutral < 0 || counts.positive < 0) {
        throw DataError("sentiment counts must be non-negative");
    }
    if (neutral_weight < Rational(0)) throw DataError("neutral weight must be non-negative");
    const Rational denominator = Rational(counts.positive + counts.negative) + neutral_weight * counts.neutral;
    if (denominator.numerator() == 0) throw UndefinedScoreError("overall sentiment score is undefined for an empty group");
    return Rational(counts.positive - counts.negative) / denominator;
}

enum class GroupBy { topic, language, topic_language };

struct GroupKey {
    std::optional<Topic> topic;
    std::optional<Language> language;

    std::string str() const {
        if (topic && language) return language->name + "/" + topic->name;
        if (topic) return topic->name;
        if (language) return language->name;
        return "all";
    }
    friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

namespace detail {

inline std::vector<GroupKey> enumerate_groups(GroupBy by, const Schema& schema) {
    std::vector<GroupKey> keys;
    if (by == GroupBy::topic) {
        for (const auto& t : schema.topics.values()) keys.push_back({t, std::nullopt});
    } else if (by == GroupBy::language) {
        for (const auto& l : schema.languages.values()) keys.push_back({std::nullopt, l});
    } else {
        for (const auto& l : schema.languages.values()) {
            for (const auto& t : schema.topics.values()) keys.push_back({t, l});
        }
    }
    return keys;
}

inline GroupKey key_of(const Post& p, GroupBy by) {
    if (by == GroupBy::topic) return {p.topic, std::nullopt};
    if (by == GroupBy::language) return {std::nullopt, p.language};
    return {p.topic, p.language};
}

struct Tally {
    std::map<std::string, SentimentCounts> counts;  // by GroupKey::str()
    std::size_t quorum_failed = 0;
};

inline Tally tally(const std::vector<FusedVerdict>& fused, const std::vector<Post>& posts, GroupBy by) {
    std::unordered_map<std::string, const Post*> meta;
    for (const auto& p : posts) meta.emplace(p.id, &p);
    Tally t;
    for (const auto& f : fused) {
        auto it = meta.find(f.post_id);
        if (it == meta.end()) throw DataError("fused verdict for unknown post '" + f.post_id + "'");
        if (!f.quorum_met) {
            ++t.quorum_failed;
            continue;
        }
        ++t.counts[key_of(*it->second, by).str()][f.label];
    }
    return t;
}

}  // namespace detail

struct DistributionRow {
    GroupKey key;
    SentimentCounts counts;
    std::array<Rational, 3> proportions;  // indexed by SentimentLabel
    bool majority_negative = false;       // more than half negative
};

struct DistributionTable {
    std::vector<DistributionRow> rows;
    std::size_t quorum_failed = 0;
    std::vector<std::string> notes;
};

// Class proportions per group. Quorum-failed posts are left out and counted; groups without
// posts are omitted with a note.
inline DistributionTable distribution(const std::vector<FusedVerdict>& fused, const std::vector<Post>& posts,
                                      GroupBy by, const Schema& schema = {}) {
    const auto t = detail::tally(fused, posts, by);
    DistributionTable table;
    table.quorum_failed = t.quorum_failed;
    for (const auto& key : detail::enumerate_groups(by, schema)) {
        auto it = t.counts.find(key.str());
        if (it == t.counts.end() || it->second.total() == 0) {
            table.notes.push_back("group '" + key.str() + "' has no posts; omitted");
            continue;
        }
        DistributionRow row{key, it->second, {}, false};
        const auto total = row.counts.total();
        row.proportions = {Rational(row.counts.negative, total), Rational(row.counts.neutral, total),
                           Rational(row.counts.positive, total)};
        row.majority_negative = row.proportions[0] > Rational(1, 2);
        table.rows.push_back(std::move(row));
    }
    return table;
}

struct SentimentScore {
    GroupKey key;
    SentimentCounts counts;
    std::optional<Rational> value;  // nullopt: empty group
};

struct LanguageMean {
    Language language;
    std::optional<Rational> mean;
    std::size_t topics_used = 0;
    std::vector<std::string> undefined_topics;
};

struct ScoreOptions {
    Rational neutral_weight{1};
    // false: unweighted mean of topic scores; true: weighted by each topic's post count.
    bool count_weighted_language_mean = false;
};

struct ScoreTable {
    std::vector<SentimentScore> rows;
    std::vector<LanguageMean> language_means;
    std::size_t quorum_failed = 0;
};

inline ScoreTable score_table(const std::vector<FusedVerdict>& fused, const std::vector<Post>& posts, GroupBy by,
                              const Schema& schema = {}, const ScoreOptions& options = {}) {
    ScoreTable table;
    const auto t = detail::tally(fused, posts, by);
    table.quorum_failed = t.quorum_failed;
    for (const auto& key : detail::enumerate_groups(by, schema)) {
        SentimentScore s{key, {}, std::nullopt};
        if (auto it = t.counts.find(key.str()); it != t.counts.end()) s.counts = it->second;
        if (s.counts.total() > 0) s.value = overall_sentiment_score(s.counts, options.neutral_weight);
        table.rows.push_back(std::move(s));
    }

    const auto cells = by == GroupBy::topic_language ? t : detail::tally(fused, posts, GroupBy::topic_language);
    for (const auto& language : schema.languages.values()) {
        LanguageMean lm{language, std::nullopt, 0, {}};
        Rational sum(0);
        std::int64_t weight_sum = 0;
        for (const auto& topic : schema.topics.values()) {
            const GroupKey key{topic, language};
            auto it = cells.counts.find(key.str());
            if (it == cells.counts.end() || it->second.total() == 0) {
                lm.undefined_topics.push_back(topic.name);
                continue;
            }
            const Rational score = overall_sentiment_score(it->second, options.neutral_weight);
            const std::int64_t w = options.count_weighted_language_mean ? it->second.total() : 1;
            sum += score * w;
            weight_sum += w;
            ++lm.topics_used;
        }
        if (weight_sum > 0) lm.mean = sum / weight_sum;
        table.language_means.push_back(std::move(lm));
    }
    return table;
}

struct RankEntry {
    GroupKey key;
    Rational value;
};

// Most negative first; equal scores ordered by group key. Undefined scores are skipped.
inline std::vector<RankEntry> need_for_action_ranking(const std::vector<SentimentScore>& scores) {
    std::vector<RankEntry> out;
    for (const auto& s : scores) {
        if (s.value) out.push_back({s.key, *s.value});
    }
    std::sort(out.begin(), out.end(), [](const RankEntry& a, const RankEntry& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.key.str() < b.key.str();
    });
    return out;
}

// ---- emission -------------------------------------------------------------------------

inline void write_scores_csv(std::ostream& out, const ScoreTable& table) {
    out << "group,topic,language,negative,neutral,positive,total,score,score_exact\n";
    for (const auto& r : table.rows) {
        out << csv::join({r.key.str(), r.key.topic ? r.key.topic->name : "", r.key.language ? r.key.language->name : "",
                          std::to_string(r.counts.negative), std::to_string(r.counts.neutral),
                          std::to_string(r.counts.positive), std::to_string(r.counts.total()),
                          r.value ? format_fixed(*r.value, 2) : "undefined",
                          r.value ? to_fraction_string(*r.value) : ""})
            << '\n';
    }
    for (const auto& m : table.language_means) {
        out << csv::join({"mean/" + m.language.name, "", m.language.name, "", "", "", "",
                          m.mean ? format_fixed(*m.mean, 2) : "undefined", m.mean ? to_fraction_string(*m.mean) : ""})
            << '\n';
    }
}

inline nlohmann::ordered_json to_json(const ScoreTable& table) {
    nlohmann::ordered_json j;
    auto& rows = j["scores"] = nlohmann::ordered_json::array();
    for (const auto& r : table.rows) {
        nlohmann::ordered_json row;
        row["group"] = r.key.str();
        if (r.key.topic) row["topic"] = r.key.topic->name;
        if (r.key.language) row["language"] = r.key.language->name;
        row["counts"] = {{"negative", r.counts.negative}, {"neutral", r.counts.neutral}, {"positive", r.counts.positive}};
        if (r.value) {
            row["score"] = format_fixed(*r.value, 2);
            row["score_exact"] = to_fraction_string(*r.value);
        } else {
            row["score"] = nullptr;
        }
        rows.push_back(std::move(row));
    }
    auto& means = j["language_means"] = nlohmann::ordered_json::array();
    for (const auto& m : table.language_means) {
        nlohmann::ordered_json row;
        row["language"] = m.language.name;
        row["mean"] = m.mean ? nlohmann::ordered_json(format_fixed(*m.mean, 2)) : nlohmann::ordered_json(nullptr);
        row["topics_used"] = m.topics_used;
        row["undefined_topics"] = m.undefined_topics;
        means.push_back(std::move(row));
    }
    j["quorum_failed"] = table.quorum_failed;
    return j;
}

inline void write_distribution_csv(std::ostream& out, const DistributionTable& table) {
    out << "group,topic,language,negative,neutral,positive,total,p_negative,p_neutral,p_positive,majority_negative\n";
    for (const auto& r : table.rows) {
        out << csv::join({r.key.str(), r.key.topic ? r.key.topic->name : "", r.key.language ? r.key.language->name : "",
                          std::to_string(r.counts.negative), std::to_string(r.counts.neutral),
                          std::to_string(r.counts.positive), std::to_string(r.counts.total()),
                          format_fixed(r.proportions[0], 4), format_fixed(r.proportions[1], 4),
                          format_fixed(r.proportions[2], 4), r.majority_negative ? "true" : "false"})
            << '\n';
    }
}

inline nlohmann::ordered_json to_json(const DistributionTable& table) {
    nlohmann::ordered_json j;
    auto& rows = j["groups"] = nlohmann::ordered_json::array();
    for (const auto& r : table.rows) {
        nlohmann::ordered_json row;
        row["group"] = r.key.str();
        row["counts"] = {{"negative", r.counts.negative}, {"neutral", r.counts.neutral}, {"positive", r.counts.positive}};
        row["proportions"] = {{"negative", to_fraction_string(r.proportions[0])},
                              {"neutral", to_fraction_string(r.proportions[1])},
                              {"positive", to_fraction_string(r.proportions[2])}};
        row["majority_negative"] = r.majority_negative;
        rows.push_back(std::move(row));
    }
    j["quorum_failed"] = table.quorum_failed;
    j["notes"] = table.notes;
    return j;
}

inline void write_ranking_csv(std::ostream& out, const std::vector<RankEntry>& ranking) {
    out << "rank,group,score\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        out << csv::join({std::to_string(i + 1), ranking[i].key.str(), format_fixed(ranking[i].value, 2)}) << '\n';
    }
}

// Stacked-bar data: one row per topic with class proportions.
inline void write_topic_plot_csv(std::ostream& out, const DistributionTable& by_topic) {
    out << "topic,negative,neutral,positive\n";
    for (const auto& r : by_topic.rows) {
        out << csv::join({r.key.str(), format_fixed(r.proportions[0], 4), format_fixed(r.proportions[1], 4),
                          format_fixed(r.proportions[2], 4)})
            << '\n';
    }
}

// Grouped-bar data: one row per topic, one column per language, plus a mean row.
inline void write_language_plot_csv(std::ostream& out, const ScoreTable& by_cell, const Schema& schema) {
    std::map<std::string, const SentimentScore*> cell;
    for (const auto& r : by_cell.rows) cell[r.key.str()] = &r;
    csv::Row header{"topic"};
    for (const auto& l : schema.languages.values()) header.push_back(l.name);
    out << csv::join(header) << '\n';
    for (const auto& t : schema.topics.values()) {
        csv::Row row{t.name};
        for (const auto& l : schema.languages.values()) {
            auto it = cell.find(GroupKey{t, l}.str());
            row.push_back(it != cell.end() && it->second->value ? format_fixed(*it->second->value, 2) : "");
        }
        out << csv::join(row) << '\n';
    }
    csv::Row mean{"mean"};
    for (const auto& m : by_cell.language_means) mean.push_back(m.mean ? format_fixed(*m.mean, 2) : "");
    out << csv::join(mean) << '\n';
}

}  // namespace sentifuse
