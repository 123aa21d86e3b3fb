#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <sentifuse/backends.hpp>
#include <sentifuse/corpus.hpp>
#include <sentifuse/label.hpp>
#include <sentifuse/random.hpp>

namespace fixtures {

using sentifuse::Language;
using sentifuse::Post;
using sentifuse::SentimentLabel;
using sentifuse::Topic;
using sentifuse::Verdict;

inline Post post(std::string id, std::string text, std::string language, std::string topic,
                 std::optional<SentimentLabel> gold = std::nullopt) {
    return Post{std::move(id), std::move(text), Language(std::move(language)), Topic(std::move(topic)), gold};
}

inline std::vector<std::string> words_pool() {
    return {"service", "clinic", "queue", "water", "jobs", "taxi", "farmers", "school", "police",
            "permit",  "grant",  "road",  "pula",  "mmuso", "thuto", "bophelo", "mošomo", "#SONA2021",
            "😡",      "🙏",     "great", "slow",  "again", "today"};
}

// Deterministic synthetic corpus spread over the default languages and topics.
inline std::vector<Post> synthetic_corpus(std::size_t n, std::uint64_t seed, bool with_gold = true,
                                          std::array<double, 3> prior = {1.0 / 3, 1.0 / 3, 1.0 / 3}) {
    const auto languages = sentifuse::default_languages().values();
    const auto topics = sentifuse::default_topics().values();
    const auto pool = words_pool();
    sentifuse::SplitMix64 rng(seed);
    std::vector<Post> out;
    for (std::size_t i = 0; i < n; ++i) {
        Post p;
        p.id = "s" + std::to_string(seed) + "_" + std::to_string(i);
        p.language = languages[i % languages.size()];
        p.topic = topics[(i / languages.size()) % topics.size()];
        const std::size_t words = 3 + rng.below(20);
        for (std::size_t w = 0; w < words; ++w) {
            if (w) p.text += ' ';
            p.text += pool[rng.below(pool.size())];
        }
        if (with_gold) {
            const double u = rng.uniform();
            p.gold_label = u < prior[0] ? SentimentLabel::negative
                           : u < prior[0] + prior[1] ? SentimentLabel::neutral
                                                     : SentimentLabel::positive;
        }
        out.push_back(std::move(p));
    }
    return out;
}

// Independent majority counter: tallies label names in a map, picks the unique maximum,
// otherwise neutral. Returns (label, tie, quorum_met).
struct OracleVote {
    SentimentLabel label;
    bool tie;
    bool quorum_met;
};

inline OracleVote brute_force_vote(const std::vector<SentimentLabel>& votes, int quorum) {
    if (static_cast<int>(votes.size()) < quorum) return {SentimentLabel::neutral, false, false};
    std::map<std::string, int> tally{{"negative", 0}, {"neutral", 0}, {"positive", 0}};
    for (auto v : votes) tally[std::string(sentifuse::to_string(v))] += 1;
    int best = -1;
    for (const auto& [name, n] : tally) best = std::max(best, n);
    std::vector<std::string> winners;
    for (const auto& [name, n] : tally) {
        if (n == best) winners.push_back(name);
    }
    if (winners.size() != 1) return {SentimentLabel::neutral, true, true};
    return {*sentifuse::parse_label(winners.front()), false, true};
}

// Table 1 language rows (error rates in tenths of a percent) for the five models and the
// fused column.
struct LanguageRow {
    std::string language;
    std::array<int, 5> backend_permille;
    int fused_permille;
};

inline const std::array<std::string, 5>& table1_backends() {
    static const std::array<std::string, 5> ids{"gpt-3.5", "gpt-4", "llama-2", "palm-2", "dolly-2"};
    return ids;
}

inline const std::array<LanguageRow, 3>& table1_language_rows() {
    static const std::array<LanguageRow, 3> rows{{
        {"English", {128, 86, 119, 95, 120}, 4},
        {"Sepedi", {123, 70, 97, 80, 100}, 7},
        {"Setswana", {100, 73, 122, 88, 118}, 6},
    }};
    return rows;
}

// Table 1 per-topic error rates (percent) in default topic order.
inline const std::map<std::string, std::vector<double>>& table1_topic_columns() {
    static const std::map<std::string, std::vector<double>> columns{
        {"gpt-3.5", {11.2, 13.0, 10.6, 13.5, 12.4, 12.9, 13.8, 12.5, 12.6, 12.5}},
        {"gpt-4", {6.5, 8.4, 6.7, 8.5, 8.6, 9.0, 6.3, 7.0, 7.5, 10.9}},
        {"llama-2", {10.9, 9.9, 10.0, 11.0, 12.7, 12.6, 10.5, 11.5, 13.0, 11.7}},
        {"palm-2", {8.4, 8.9, 6.5, 8.7, 10.3, 10.0, 12.6, 8.9, 10.4, 8.8}},
        {"dolly-2", {11.9, 12.1, 10.3, 12.5, 12.1, 11.0, 11.9, 11.3, 11.2, 12.1}},
    };
    return columns;
}

struct TranscribedStore {
    std::vector<Post> posts;
    std::vector<Verdict> verdicts;
};

// 1000 gold-labeled posts per language with verdicts whose per-backend error counts equal
// the Table 1 language rows exactly and whose majority vote is wrong on exactly the fused
// count. Fused-wrong posts get three backends agreeing on one wrong label; every other
// post gets at most two wrong backends, which can never outvote the three correct ones.
inline TranscribedStore table1_transcription() {
    TranscribedStore store;
    const auto topics = sentifuse::default_topics().values();
    const auto& ids = table1_backends();
    for (const auto& row : table1_language_rows()) {
        const int n = 1000;
        std::array<int, 5> remaining = row.backend_permille;
        std::vector<std::array<bool, 5>> wrong(n, std::array<bool, 5>{});
        for (int i = 0; i < row.fused_permille; ++i) {
            // The three backends with the most errors left.
            std::array<int, 5> order{0, 1, 2, 3, 4};
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remaining[a] > remaining[b]; });
            for (int k = 0; k < 3; ++k) {
                wrong[i][order[k]] = true;
                --remaining[order[k]];
            }
        }
        for (int i = row.fused_permille; i < n; ++i) {
            std::array<int, 5> order{0, 1, 2, 3, 4};
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remaining[a] > remaining[b]; });
            for (int k = 0; k < 2; ++k) {
                if (remaining[order[k]] > 0) {
                    wrong[i][order[k]] = true;
                    --remaining[order[k]];
                }
            }
        }
        for (int r : remaining) {
            if (r != 0) throw std::logic_error("transcription could not place every error");
        }
        for (int i = 0; i < n; ++i) {
            const auto gold = static_cast<SentimentLabel>(i % 3);
            const auto mistake = static_cast<SentimentLabel>((i % 3 + 1) % 3);
            Post p = post(row.language + "_" + std::to_string(i), "post text " + std::to_string(i), row.language,
                          topics[static_cast<std::size_t>(i) % topics.size()].name, gold);
            for (int b = 0; b < 5; ++b) {
                // Non-fused posts with two wrong backends use two different wrong labels.
                SentimentLabel label = gold;
                if (wrong[i][b]) {
                    label = mistake;
                    if (i >= row.fused_permille) {
                        int first = -1;
                        for (int k = 0; k < 5; ++k) {
                            if (wrong[i][k]) {
                                first = k;
                                break;
                            }
                        }
                        if (b != first) label = static_cast<SentimentLabel>((i % 3 + 2) % 3);
                    }
                }
                store.verdicts.push_back({p.id, ids[b], label, std::nullopt});
            }
            store.posts.push_back(std::move(p));
        }
    }
    return store;
}

class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sentifuse_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace fixtures
