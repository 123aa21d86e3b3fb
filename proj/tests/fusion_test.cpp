#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <sentifuse/backends.hpp>
#include <sentifuse/fusion.hpp>

#include "support/fixtures.hpp"

namespace sentifuse {
namespace {

using L = SentimentLabel;

std::vector<Verdict> votes(const std::vector<L>& labels, const std::string& post = "p") {
    std::vector<Verdict> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({post, "b" + std::to_string(i), labels[i], std::nullopt});
    return out;
}

TEST(Fuse, StrictMajority) {
    const auto f = fuse(votes({L::positive, L::positive, L::negative, L::neutral, L::positive}), 3);
    EXPECT_EQ(f.label, L::positive);
    EXPECT_EQ(f.votes(L::positive), 3);
    EXPECT_EQ(f.votes(L::negative), 1);
    EXPECT_EQ(f.votes(L::neutral), 1);
    EXPECT_FALSE(f.tie_broken);
    EXPECT_TRUE(f.quorum_met);
    EXPECT_EQ(f.contributing_backends.size(), 5u);
}

TEST(Fuse, TwoTwoOneTieGoesNeutral) {
    const auto f = fuse(votes({L::positive, L::positive, L::negative, L::negative, L::neutral}), 3);
    EXPECT_EQ(f.label, L::neutral);
    EXPECT_TRUE(f.tie_broken);
}

TEST(Fuse, PluralityWithoutAbsoluteMajority) {
    const auto f = fuse(votes({L::negative, L::negative, L::positive, L::neutral}), 3);
    EXPECT_EQ(f.label, L::negative);
    EXPECT_FALSE(f.tie_broken);
}

TEST(Fuse, BelowQuorum) {
    const auto f = fuse(votes({L::negative, L::negative}), 3);
    EXPECT_EQ(f.label, L::neutral);
    EXPECT_FALSE(f.quorum_met);
    EXPECT_FALSE(f.tie_broken);
    EXPECT_EQ(f.votes(L::negative), 2);
}

TEST(Fuse, RejectsBadInput) {
    EXPECT_THROW(fuse(votes({L::negative}), 0), DataError);
    auto mixed = votes({L::negative, L::positive});
    mixed[1].post_id = "q";
    EXPECT_THROW(fuse(mixed, 1), DataError);
    auto dup = votes({L::negative, L::positive});
    dup[1].backend_id = dup[0].backend_id;
    EXPECT_THROW(fuse(dup, 1), DataError);
}

TEST(Fuse, BackendPriorityTiePolicy) {
    FusionConfig config;
    config.quorum = 2;
    config.tie_policy = TiePolicy::backend_priority;
    config.priority = {"b3", "b0"};
    // b3 voted negative, which is among the tied leaders.
    auto f = fuse(votes({L::positive, L::positive, L::negative, L::negative}), config);
    EXPECT_EQ(f.label, L::negative);
    EXPECT_TRUE(f.tie_broken);
    // b3 abstains here, so b0 decides.
    auto v = votes({L::positive, L::negative});
    f = fuse(v, config);
    EXPECT_EQ(f.label, L::positive);
}

TEST(Fuse, WeightedVotes) {
    FusionConfig config;
    config.quorum = 1;
    config.weights = {{"b0", 0.9}, {"b1", 0.5}, {"b2", 0.5}};
    EXPECT_EQ(fuse(votes({L::positive, L::negative, L::negative}), config).label, L::negative);
    config.weights["b0"] = 1.2;
    EXPECT_EQ(fuse(votes({L::positive, L::negative, L::negative}), config).label, L::positive);
}

TEST(Fuse, AllCombinationsOfFiveMatchOracle) {
    for (int code = 0; code < 243; ++code) {
        std::vector<L> labels;
        for (int k = 0, c = code; k < 5; ++k, c /= 3) labels.push_back(static_cast<L>(c % 3));
        const auto oracle = fixtures::brute_force_vote(labels, 3);
        const auto f = fuse(votes(labels), 3);
        EXPECT_EQ(f.label, oracle.label) << code;
        EXPECT_EQ(f.tie_broken, oracle.tie) << code;
        EXPECT_EQ(f.quorum_met, oracle.quorum_met) << code;
    }
}

VerdictMatrix random_matrix(std::size_t rows, std::size_t cols, SplitMix64& rng, double absent) {
    std::vector<std::string> posts, backends;
    for (std::size_t i = 0; i < rows; ++i) posts.push_back("p" + std::to_string(i));
    for (std::size_t j = 0; j < cols; ++j) backends.push_back("m" + std::to_string(j));
    VerdictMatrix m(posts, backends);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (rng.uniform() >= absent) m.set(i, j, static_cast<L>(rng.below(3)));
        }
    }
    return m;
}

TEST(FuseAll, RandomMatrixMatchesOracle) {
    SplitMix64 rng(1234);
    const auto m = random_matrix(10000, 5, rng, 0.2);
    const auto fused = fuse_all(m, 3);
    ASSERT_EQ(fused.size(), 10000u);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::vector<L> labels;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (m.at(i, j)) labels.push_back(*m.at(i, j));
        }
        const auto oracle = fixtures::brute_force_vote(labels, 3);
        ASSERT_EQ(fused[i].post_id, m.post_ids()[i]);
        ASSERT_EQ(fused[i].label, oracle.label) << i;
        ASSERT_EQ(fused[i].tie_broken, oracle.tie) << i;
        ASSERT_EQ(fused[i].quorum_met, oracle.quorum_met) << i;
    }
}

TEST(FuseAll, UnanimityReturnsTheColumn) {
    SplitMix64 rng(5);
    VerdictMatrix m({"a", "b", "c", "d"}, {"x", "y", "z"});
    for (std::size_t i = 0; i < 4; ++i) {
        const auto l = static_cast<L>(rng.below(3));
        for (std::size_t j = 0; j < 3; ++j) m.set(i, j, l);
    }
    const auto fused = fuse_all(m, 3);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(fused[i].label, *m.at(i, 0));
}

TEST(FuseAll, ColumnPermutationInvariance) {
    SplitMix64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = random_matrix(50, 5, rng, 0.1);
        std::vector<std::size_t> perm{0, 1, 2, 3, 4};
        for (std::size_t k = perm.size() - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(k + 1)]);
        std::vector<std::string> ids;
        for (auto p : perm) ids.push_back(m.backend_ids()[p]);
        VerdictMatrix permuted(m.post_ids(), ids);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < 5; ++j) permuted.set(i, j, m.at(i, perm[j]));
        }
        EXPECT_EQ(fuse_all(m, 3), fuse_all(permuted, 3));
    }
}

TEST(VerdictMatrix, FromVerdictsIgnoresStrangersAndRejectsDuplicates) {
    std::vector<Verdict> vs{{"p1", "a", L::positive, std::nullopt},
                            {"p2", "a", L::negative, std::nullopt},
                            {"p9", "a", L::negative, std::nullopt},
                            {"p1", "zz", L::negative, std::nullopt}};
    const auto m = VerdictMatrix::from_verdicts({"p1", "p2", "p3"}, {"a", "b"}, vs);
    EXPECT_EQ(m.at(0, 0), L::positive);
    EXPECT_EQ(m.at(1, 0), L::negative);
    EXPECT_FALSE(m.at(2, 0));
    EXPECT_FALSE(m.at(0, 1));
    vs.push_back({"p1", "a", L::neutral, std::nullopt});
    EXPECT_THROW(VerdictMatrix::from_verdicts({"p1"}, {"a"}, vs), DataError);
}

TEST(FusedStore, WriteReadRoundTrip) {
    SplitMix64 rng(8);
    const auto fused = fuse_all(random_matrix(200, 5, rng, 0.3), 3);
    std::ostringstream out;
    write_fused(out, fused);
    std::istringstream in("# provenance line\n" + out.str());
    const auto back = read_fused(in);
    ASSERT_EQ(back.size(), fused.size());
    for (std::size_t i = 0; i < fused.size(); ++i) {
        EXPECT_EQ(back[i].post_id, fused[i].post_id);
        EXPECT_EQ(back[i].label, fused[i].label);
        EXPECT_EQ(back[i].vote_counts, fused[i].vote_counts);
        EXPECT_EQ(back[i].tie_broken, fused[i].tie_broken);
        EXPECT_EQ(back[i].quorum_met, fused[i].quorum_met);
    }
}

VerdictMatrix two_columns(const std::vector<L>& a, const std::vector<std::optional<L>>& b) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) ids.push_back("p" + std::to_string(i));
    VerdictMatrix m(ids, {"a", "b"});
    for (std::size_t i = 0; i < a.size(); ++i) {
        m.set(i, 0, a[i]);
        m.set(i, 1, b[i]);
    }
    return m;
}

TEST(PairwiseCorrelation, IdenticalAndInvertedColumns) {
    const std::vector<L> col{L::negative, L::positive, L::positive, L::negative, L::positive};
    std::vector<std::optional<L>> same(col.begin(), col.end()), inverted;
    for (auto l : col) inverted.push_back(l == L::positive ? L::negative : L::positive);
    auto r = pairwise_correlation(two_columns(col, same));
    EXPECT_DOUBLE_EQ(*r.at({"a", "b"}).r, 1.0);
    r = pairwise_correlation(two_columns(col, inverted));
    EXPECT_DOUBLE_EQ(*r.at({"a", "b"}).r, -1.0);
    EXPECT_DOUBLE_EQ(*r.at({"b", "a"}).r, -1.0);
}

TEST(PairwiseCorrelation, HandComputedAndSharedSupportOnly) {
    // x = (-1, 0, 1), y = (-1, 1, 1): r = 2 / sqrt(2 * 24/9) = sqrt(3)/2. The fourth row is
    // missing from b and must not count.
    const auto m = two_columns({L::negative, L::neutral, L::positive, L::negative},
                               {L::negative, L::positive, L::positive, std::nullopt});
    const auto pc = pairwise_correlation(m).at({"a", "b"});
    EXPECT_EQ(pc.shared_posts, 3u);
    EXPECT_NEAR(*pc.r, std::sqrt(3.0) / 2, 1e-12);
}

TEST(PairwiseCorrelation, ConstantColumnIsUndefined) {
    const auto m = two_columns({L::negative, L::positive, L::neutral}, {L::neutral, L::neutral, L::neutral});
    EXPECT_FALSE(pairwise_correlation(m).at({"a", "b"}).r);
    const auto mean = mean_of_pairs(m);
    EXPECT_FALSE(mean.mean);
    ASSERT_EQ(mean.undefined_pairs.size(), 1u);
}

TEST(PairwiseCorrelation, BoundedAndSymmetricOnRandomMatrices) {
    SplitMix64 rng(10);
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = random_matrix(1 + rng.below(30), 4, rng, 0.2);
        const auto pairs = pairwise_correlation(m);
        for (const auto& [key, pc] : pairs) {
            EXPECT_EQ(pc.r.has_value(), pairs.at({key.second, key.first}).r.has_value());
            if (pc.r) {
                EXPECT_GE(*pc.r, -1.0);
                EXPECT_LE(*pc.r, 1.0);
                EXPECT_EQ(*pc.r, *pairs.at({key.second, key.first}).r);
            }
        }
    }
}

TEST(MeanCorrelation, SinglePairAndAllOnes) {
    const std::vector<L> col{L::negative, L::positive, L::neutral};
    const auto single = two_columns(col, {L::negative, L::positive, L::positive});
    EXPECT_DOUBLE_EQ(*mean_of_pairs(single).mean, *pairwise_correlation(single).at({"a", "b"}).r);

    VerdictMatrix m({"p0", "p1", "p2"}, {"a", "b", "c", "d"});
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) m.set(i, j, col[i]);
    }
    EXPECT_DOUBLE_EQ(*mean_of_pairs(m).mean, 1.0);
    EXPECT_EQ(mean_of_pairs(m).defined_pairs, 6u);
}

TEST(MeanCorrelation, PerLanguageFixture) {
    // English rows: a = b, c inverted -> pairs (1, -1, -1), mean -1/3.
    // Sepedi rows: the sqrt(3)/2 pattern for a vs b, c = a -> (sqrt3/2, 1, sqrt3/2).
    std::vector<Post> posts;
    VerdictMatrix m({"e0", "e1", "e2", "s0", "s1", "s2"}, {"a", "b", "c"});
    const std::vector<std::array<L, 3>> rows{
        {L::negative, L::negative, L::positive}, {L::positive, L::positive, L::negative},
        {L::positive, L::positive, L::negative}, {L::negative, L::negative, L::negative},
        {L::neutral, L::positive, L::neutral},   {L::positive, L::positive, L::positive}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < 3; ++j) m.set(i, j, rows[i][j]);
        posts.push_back(fixtures::post(m.post_ids()[i], "x", i < 3 ? "English" : "Sepedi", "health"));
    }
    const auto by_language = mean_correlation(CorrelationGrouping::language, m, posts);
    EXPECT_NEAR(*by_language.at("English").mean, -1.0 / 3, 1e-12);
    EXPECT_NEAR(*by_language.at("Sepedi").mean, (std::sqrt(3.0) + 1) / 3, 1e-12);
    const auto overall = mean_correlation(CorrelationGrouping::overall, m, posts);
    ASSERT_EQ(overall.count("overall"), 1u);
    EXPECT_TRUE(overall.at("overall").mean.has_value());
}

// Five independent noise backends at the Table 1 overall error rates. On a balanced prior
// with errors uniform over the wrong labels, the expected r of a pair is
// (1 - 1.5 e_i)(1 - 1.5 e_j), and its mean over the ten pairs is 0.7071.
TEST(MeanCorrelation, IndependentNoiseBackendsAtTableOneRates) {
    const std::array<double, 5> rates{0.125, 0.082, 0.115, 0.092, 0.116};
    const auto corpus = fixtures::synthetic_corpus(50000, 21);
    std::vector<Verdict> all;
    std::vector<std::string> ids;
    for (std::size_t b = 0; b < rates.size(); ++b) {
        BackendProfile p;
        p.backend_id = fixtures::table1_backends()[b];
        p.kind = BackendKind::noise_sim;
        p.error_rates = {rates[b], rates[b], rates[b]};
        p.seed = 1000 + b;
        NoiseSimBackend backend(p);
        auto r = backend.classify_batch("", Batch{Topic("health"), corpus, 0});
        all.insert(all.end(), r.verdicts.begin(), r.verdicts.end());
        ids.push_back(p.backend_id);
    }
    std::vector<std::string> post_ids;
    for (const auto& p : corpus) post_ids.push_back(p.id);
    const auto m = VerdictMatrix::from_verdicts(post_ids, ids, all);
    const auto mean = *mean_of_pairs(m).mean;
    double expected = 0;
    for (std::size_t a = 0; a < 5; ++a) {
        for (std::size_t b = a + 1; b < 5; ++b) expected += (1 - 1.5 * rates[a]) * (1 - 1.5 * rates[b]) / 10;
    }
    EXPECT_NEAR(expected, 0.707133, 1e-6);
    EXPECT_NEAR(mean, expected, 0.006);
    EXPECT_GE(mean, 0.70);
    EXPECT_LE(mean, 0.90);
}

}  // namespace
}  // namespace sentifuse
