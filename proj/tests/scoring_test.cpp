#include <sstream>

#include <gtest/gtest.h>

#include <sentifuse/scoring.hpp>

#include "support/fixtures.hpp"

namespace sentifuse {
namespace {

using L = SentimentLabel;

// Appends fused verdicts (and their posts) realizing the given counts for one cell.
void add_cell(std::vector<FusedVerdict>& fused, std::vector<Post>& posts, const std::string& language,
              const std::string& topic, SentimentCounts counts) {
    for (auto label : kAllLabels) {
        for (std::int64_t i = 0; i < counts[label]; ++i) {
            const auto id = language + "/" + topic + "/" + std::string(to_string(label)) + std::to_string(i);
            posts.push_back(fixtures::post(id, "x", language, topic));
            FusedVerdict f;
            f.post_id = id;
            f.label = label;
            f.quorum_met = true;
            ++f.vote_counts[index_of(label)];
            fused.push_back(f);
        }
    }
}

TEST(OverallScore, Endpoints) {
    EXPECT_EQ(overall_sentiment_score({0, 0, 7}), Rational(1));
    EXPECT_EQ(overall_sentiment_score({7, 0, 0}), Rational(-1));
    EXPECT_EQ(overall_sentiment_score({5, 10, 5}), Rational(0));
    EXPECT_EQ(overall_sentiment_score({0, 3, 0}), Rational(0));
    EXPECT_THROW(overall_sentiment_score({0, 0, 0}), UndefinedScoreError);
    EXPECT_THROW(overall_sentiment_score({-1, 0, 2}), DataError);
}

TEST(OverallScore, SpotValues) {
    // Setswana agriculture 0.64 and Sepedi police service -0.84.
    EXPECT_EQ(overall_sentiment_score({6, 24, 70}), Rational(16, 25));
    EXPECT_EQ(format_fixed(overall_sentiment_score({6, 24, 70}), 2), "0.64");
    EXPECT_EQ(overall_sentiment_score({88, 8, 4}), Rational(-21, 25));
    EXPECT_EQ(format_fixed(overall_sentiment_score({88, 8, 4}), 2), "-0.84");
}

TEST(OverallScore, NeutralWeight) {
    EXPECT_EQ(overall_sentiment_score({1, 2, 3}, Rational(1, 2)), Rational(2, 5));
    EXPECT_EQ(overall_sentiment_score({1, 2, 3}, Rational(0)), Rational(1, 2));
    EXPECT_THROW(overall_sentiment_score({0, 4, 0}, Rational(0)), UndefinedScoreError);
}

TEST(OverallScore, AlgebraOnRandomTriples) {
    SplitMix64 rng(31);
    for (int i = 0; i < 1000; ++i) {
        SentimentCounts c{static_cast<std::int64_t>(rng.below(1000)), static_cast<std::int64_t>(rng.below(1000)),
                          static_cast<std::int64_t>(rng.below(1000))};
        if (c.total() == 0) continue;
        const auto s = overall_sentiment_score(c);
        EXPECT_GE(s, Rational(-1));
        EXPECT_LE(s, Rational(1));
        const std::int64_t k = 1 + static_cast<std::int64_t>(rng.below(50));
        EXPECT_EQ(overall_sentiment_score({c.negative * k, c.neutral * k, c.positive * k}), s);
        EXPECT_EQ(overall_sentiment_score({c.positive, c.neutral, c.negative}), -s);
        SentimentCounts d{static_cast<std::int64_t>(rng.below(1000)), static_cast<std::int64_t>(rng.below(1000)),
                          static_cast<std::int64_t>(1 + rng.below(1000))};
        SentimentCounts merged = c;
        merged += d;
        const Rational expected = (s * c.total() + overall_sentiment_score(d) * d.total()) / merged.total();
        EXPECT_EQ(overall_sentiment_score(merged), expected);
    }
}

TEST(Distribution, ProportionsForOneGroup) {
    std::vector<FusedVerdict> fused;
    std::vector<Post> posts;
    add_cell(fused, posts, "English", "health", {2, 1, 1});
    const auto table = distribution(fused, posts, GroupBy::topic);
    ASSERT_EQ(table.rows.size(), 1u);
    EXPECT_EQ(table.rows[0].key.str(), "health");
    EXPECT_EQ(table.rows[0].proportions[0], Rational(1, 2));
    EXPECT_EQ(table.rows[0].proportions[1], Rational(1, 4));
    EXPECT_EQ(table.rows[0].proportions[2], Rational(1, 4));
    EXPECT_FALSE(table.rows[0].majority_negative);  // exactly half is not "more than half"
    EXPECT_EQ(table.notes.size(), 9u);              // the other nine topics are empty
}

TEST(Distribution, QuorumFailuresAreExcludedAndCounted) {
    std::vector<FusedVerdict> fused;
    std::vector<Post> posts;
    add_cell(fused, posts, "Sepedi", "transport", {1, 0, 1});
    fused[0].quorum_met = false;
    const auto table = distribution(fused, posts, GroupBy::language);
    EXPECT_EQ(table.quorum_failed, 1u);
    ASSERT_EQ(table.rows.size(), 1u);
    EXPECT_EQ(table.rows[0].counts.total(), 1);
    fused.push_back(FusedVerdict{"ghost", L::neutral, {}, {}, false, true});
    EXPECT_THROW(distribution(fused, posts, GroupBy::topic), DataError);
}

// Proportions shaped like the topic distribution plot: employment, police service,
// education and health more than half negative, the other topics less.
struct PaperShape {
    std::vector<FusedVerdict> fused;
    std::vector<Post> posts;
};

PaperShape paper_shaped() {
    const std::map<std::string, SentimentCounts> by_topic{
        {"agriculture", {30, 35, 35}},  {"education", {55, 30, 15}},         {"employment", {70, 20, 10}},
        {"health", {52, 30, 18}},       {"home affairs", {45, 35, 20}},       {"police service", {66, 22, 12}},
        {"rural development", {35, 40, 25}}, {"sanitation", {48, 32, 20}},   {"small business", {25, 40, 35}},
        {"transport", {40, 35, 25}}};
    PaperShape s;
    for (const auto& language : {"English", "Sepedi", "Setswana"}) {
        for (const auto& [topic, counts] : by_topic) add_cell(s.fused, s.posts, language, topic, counts);
    }
    return s;
}

TEST(Distribution, MajorityNegativeTopics) {
    const auto s = paper_shaped();
    const auto table = distribution(s.fused, s.posts, GroupBy::topic);
    std::set<std::string> flagged;
    for (const auto& r : table.rows) {
        if (r.majority_negative) flagged.insert(r.key.str());
    }
    EXPECT_EQ(flagged, (std::set<std::string>{"education", "employment", "health", "police service"}));
    EXPECT_TRUE(table.notes.empty());
}

TEST(ScoreTable, LanguageMeanOfSetswanaTopics) {
    // 100 posts per topic; topic scores sum to -0.10 over ten topics.
    const std::vector<std::pair<std::string, SentimentCounts>> cells{
        {"agriculture", {6, 24, 70}},   {"education", {40, 40, 20}},      {"employment", {50, 30, 20}},
        {"health", {35, 45, 20}},       {"home affairs", {25, 45, 30}},   {"police service", {45, 35, 20}},
        {"rural development", {20, 50, 30}}, {"sanitation", {35, 40, 25}}, {"small business", {20, 45, 35}},
        {"transport", {32, 40, 28}}};
    std::vector<FusedVerdict> fused;
    std::vector<Post> posts;
    for (const auto& [topic, counts] : cells) add_cell(fused, posts, "Setswana", topic, counts);
    const auto table = score_table(fused, posts, GroupBy::topic_language);
    EXPECT_EQ(table.rows.size(), 30u);
    const auto& setswana = table.language_means[2];
    EXPECT_EQ(setswana.language.name, "Setswana");
    EXPECT_EQ(setswana.mean, Rational(-1, 100));
    EXPECT_EQ(format_fixed(*setswana.mean, 2), "-0.01");
    EXPECT_EQ(setswana.topics_used, 10u);
    EXPECT_FALSE(table.language_means[0].mean.has_value());
    EXPECT_EQ(table.language_means[0].undefined_topics.size(), 10u);
}

TEST(ScoreTable, CountWeightedLanguageMean) {
    std::vector<FusedVerdict> fused;
    std::vector<Post> posts;
    add_cell(fused, posts, "English", "health", {3, 0, 0});   // -1 over 3 posts
    add_cell(fused, posts, "English", "transport", {0, 0, 1});  // +1 over 1 post
    ScoreOptions weighted;
    weighted.count_weighted_language_mean = true;
    EXPECT_EQ(score_table(fused, posts, GroupBy::topic).language_means[0].mean, Rational(0));
    EXPECT_EQ(score_table(fused, posts, GroupBy::topic, {}, weighted).language_means[0].mean, Rational(-1, 2));
}

TEST(ScoreTable, AllNeutralScoresZero) {
    std::vector<FusedVerdict> fused;
    std::vector<Post> posts;
    for (const auto& t : default_topics().values()) add_cell(fused, posts, "Sepedi", t.name, {0, 4, 0});
    for (const auto& row : score_table(fused, posts, GroupBy::topic).rows) EXPECT_EQ(row.value, Rational(0));
}

TEST(ScoreTable, EmptyGroupsAreUndefinedNotZero) {
    std::vector<FusedVerdict> fused;
    std::vector<Post> posts;
    add_cell(fused, posts, "Sepedi", "health", {1, 0, 0});
    const auto table = score_table(fused, posts, GroupBy::topic);
    for (const auto& r : table.rows) EXPECT_EQ(r.value.has_value(), r.key.str() == "health");
    std::ostringstream out;
    write_scores_csv(out, table);
    EXPECT_NE(out.str().find("transport,transport,,0,0,0,0,undefined"), std::string::npos);
}

TEST(Ranking, OrderAndLexicographicTies) {
    std::vector<SentimentScore> scores{{{Topic("a"), std::nullopt}, {}, Rational(-1, 2)},
                                       {{Topic("b"), std::nullopt}, {}, Rational(1, 5)},
                                       {{Topic("c"), std::nullopt}, {}, Rational(-1, 2)},
                                       {{Topic("d"), std::nullopt}, {}, std::nullopt}};
    const auto ranking = need_for_action_ranking(scores);
    ASSERT_EQ(ranking.size(), 3u);
    EXPECT_EQ(ranking[0].key.str(), "a");
    EXPECT_EQ(ranking[1].key.str(), "c");
    EXPECT_EQ(ranking[2].key.str(), "b");
    EXPECT_EQ(need_for_action_ranking({scores[1]}).size(), 1u);
}

TEST(Ranking, PaperShapedTopicsNeedingActionRankLow) {
    const auto s = paper_shaped();
    const auto ranking = need_for_action_ranking(score_table(s.fused, s.posts, GroupBy::topic).rows);
    ASSERT_EQ(ranking.size(), 10u);
    std::set<std::string> bottom_half;
    for (std::size_t i = 0; i < 5; ++i) bottom_half.insert(ranking[i].key.str());
    for (const auto& t : {"employment", "police service", "education", "health"}) EXPECT_TRUE(bottom_half.count(t)) << t;
    EXPECT_EQ(ranking.front().key.str(), "employment");
}

TEST(ScoreTable, FullGridCoversAllCells) {
    const auto s = paper_shaped();
    const auto table = score_table(s.fused, s.posts, GroupBy::topic_language);
    ASSERT_EQ(table.rows.size(), 30u);
    for (const auto& r : table.rows) EXPECT_TRUE(r.value.has_value()) << r.key.str();
    std::ostringstream plot;
    write_language_plot_csv(plot, table, Schema{});
    EXPECT_EQ(plot.str().substr(0, plot.str().find('\n')), "topic,English,Sepedi,Setswana");
}

}  // namespace
}  // namespace sentifuse
