#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "backends.hpp"
#include "error.hpp"
#include "label.hpp"
#include "stats.hpp"

namespace sentifuse {

enum class TiePolicy {
    neutral,           // ties fall back to neutral
    backend_priority,  // the tied label voted by the earliest-listed backend wins
};

struct FusionConfig {
    int quorum = 3;
    TiePolicy tie_policy = TiePolicy::neutral;
    // Optional per-backend vote weights (e.g. accuracies). Empty means one vote each.
    std::map<std::string, double> weights;
    // Backend order for TiePolicy::backend_priority.
    std::vector<std::string> priority;
};

struct FusedVerdict {
    std::string post_id;
    SentimentLabel label = SentimentLabel::neutral;
    std::array<int, 3> vote_counts{0, 0, 0};
    std::set<std::string> contributing_backends;
    bool tie_broken = false;
    bool quorum_met = false;

    int votes(SentimentLabel l) const { return vote_counts[index_of(l)]; }
    friend bool operator==(const FusedVerdict&, const FusedVerdict&) = default;
};

// Majority vote over one post's verdicts.
inline FusedVerdict fuse(const std::vector<Verdict>& verdicts, const FusionConfig& config) {
    if (config.quorum < 1) throw DataError("quorum must be at least 1");
    FusedVerdict out;
    if (!verdicts.empty()) out.post_id = verdicts.front().post_id;
    for (const auto& v : verdicts) {
        if (v.post_id != out.post_id) throw DataError("fuse() got verdicts for '" + out.post_id + "' and '" + v.post_id + "'");
        if (!out.contributing_backends.insert(v.backend_id).second) {
            throw DataError("duplicate verdict from backend '" + v.backend_id + "' for post '" + v.post_id + "'");
        }
        ++out.vote_counts[index_of(v.label)];
    }
    if (static_cast<int>(verdicts.size()) < config.quorum) return out;
    out.quorum_met = true;

    std::array<double, 3> score{};
    for (const auto& v : verdicts) {
        double w = 1.0;
        if (!config.weights.empty()) {
            auto it = config.weights.find(v.backend_id);
            w = it == config.weights.end() ? 0.0 : it->second;
        }
        score[index_of(v.label)] += w;
    }
    const double best = *std::max_element(score.begin(), score.end());
    std::vector<SentimentLabel> leaders;
    for (auto l : kAllLabels) {
        if (score[index_of(l)] == best) leaders.push_back(l);
    }
    if (leaders.size() == 1) {
        out.label = leaders.front();
        return out;
    }

    out.tie_broken = true;
    out.label = SentimentLabel::neutral;
    if (config.tie_policy == TiePolicy::backend_priority) {
        for (const auto& backend : config.priority) {
            auto it = std::find_if(verdicts.begin(), verdicts.end(), [&](const Verdict& v) { return v.backend_id == backend; });
            if (it != verdicts.end() && std::find(leaders.begin(), leaders.end(), it->label) != leaders.end()) {
                out.label = it->label;
                break;
            }
        }
    }
    return out;
}

inline FusedVerdict fuse(const std::vector<Verdict>& verdicts, int quorum) {
    FusionConfig config;
    config.quorum = quorum;
    return fuse(verdicts, config);
}

// Posts × backends table of optional labels.
class VerdictMatrix {
public:
    VerdictMatrix(std::vector<std::string> post_ids, std::vector<std::string> backend_ids)
        : posts_(std::move(post_ids)), backends_(std::move(backend_ids)), cells_(posts_.size() * backends_.size()) {
        for (std::size_t i = 0; i < posts_.size(); ++i) {
            if (!post_index_.emplace(posts_[i], i).second) throw DataError("duplicate post id '" + posts_[i] + "'");
        }
        for (std::size_t j = 0; j < backends_.size(); ++j) {
            if (!backend_index_.emplace(backends_[j], j).second) {
                throw DataError("duplicate backend id '" + backends_[j] + "'");
            }
        }
    }

    // Verdicts for posts or backends outside the matrix are ignored; a second verdict for a
    // filled cell is an error.
    static VerdictMatrix from_verdicts(std::vector<std::string> post_ids, std::vector<std::string> backend_ids,
                                       const std::vector<Verdict>& verdicts) {
        VerdictMatrix m(std::move(post_ids), std::move(backend_ids));
        for (const auto& v : verdicts) {
            auto p = m.post_index_.find(v.post_id);
            auto b = m.backend_index_.find(v.backend_id);
            if (p == m.post_index_.end() || b == m.backend_index_.end()) continue;
            if (m.at(p->second, b->second)) {
                throw DataError("two verdicts from '" + v.backend_id + "' for post '" + v.post_id + "'");
            }
            m.set(p->second, b->second, v.label);
        }
        return m;
    }

    std::size_t rows() const noexcept { return posts_.size(); }
    std::size_t cols() const noexcept { return backends_.size(); }
    const std::vector<std::string>& post_ids() const noexcept { return posts_; }
    const std::vector<std::string>& backend_ids() const noexcept { return backends_; }

    const std::optional<SentimentLabel>& at(std::size_t row, std::size_t col) const { return cells_[row * cols() + col]; }
    void set(std::size_t row, std::size_t col, std::optional<SentimentLabel> label) { cells_[row * cols() + col] = label; }

    std::optional<std::size_t> row_of(const std::string& post_id) const {
        auto it = post_index_.find(post_id);
        return it == post_index_.end() ? std::nullopt : std::optional(it->second);
    }

    std::vector<Verdict> row_verdicts(std::size_t row) const {
        std::vector<Verdict> out;
        for (std::size_t j = 0; j < cols(); ++j) {
            if (const auto& cell = at(row, j)) out.push_back({posts_[row], backends_[j], *cell, std::nullopt});
        }
        return out;
    }

    // Same cells restricted to the given rows (in the given order).
    VerdictMatrix select_rows(const std::vector<std::size_t>& rows) const {
        std::vector<std::string> ids;
        for (auto r : rows) ids.push_back(posts_[r]);
        VerdictMatrix m(std::move(ids), backends_);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < cols(); ++j) m.set(i, j, at(rows[i], j));
        }
        return m;
    }

private:
    std::vector<std::string> posts_;
    std::vector<std::string> backends_;
    std::vector<std::optional<SentimentLabel>> cells_;
    std::unordered_map<std::string, std::size_t> post_index_;
    std::unordered_map<std::string, std::size_t> backend_index_;
};

inline std::vector<FusedVerdict> fuse_all(const VerdictMatrix& matrix, const FusionConfig& config) {
    std::vector<FusedVerdict> out;
    out.reserve(matrix.rows());
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        auto fused = fuse(matrix.row_verdicts(i), config);
        fused.post_id = matrix.post_ids()[i];
        out.push_back(std::move(fused));
    }
    return out;
}

inline std::vector<FusedVerdict> fuse_all(const VerdictMatrix& matrix, int quorum) {
    FusionConfig config;
    config.quorum = quorum;
    return fuse_all(matrix, config);
}

struct PairCorrelation {
    std::optional<double> r;  // nullopt: undefined (constant column or < 2 shared posts)
    std::size_t shared_posts = 0;
};

using BackendPair = std::pair<std::string, std::string>;

// Pearson r on the -1/0/+1 label encoding over posts both backends classified. The map
// holds both (a,b) and (b,a).
inline std::map<BackendPair, PairCorrelation> pairwise_correlation(const VerdictMatrix& matrix) {
    std::map<BackendPair, PairCorrelation> out;
    const auto& ids = matrix.backend_ids();
    for (std::size_t a = 0; a < matrix.cols(); ++a) {
        for (std::size_t b = a + 1; b < matrix.cols(); ++b) {
            std::vector<double> xa, xb;
            for (std::size_t i = 0; i < matrix.rows(); ++i) {
                const auto& ca = matrix.at(i, a);
                const auto& cb = matrix.at(i, b);
                if (ca && cb) {
                    xa.push_back(encode(*ca));
                    xb.push_back(encode(*cb));
                }
            }
            PairCorrelation pc{pearson(xa, xb), xa.size()};
            out[{ids[a], ids[b]}] = pc;
            out[{ids[b], ids[a]}] = pc;
        }
    }
    return out;
}

struct MeanCorrelation {
    std::optional<double> mean;  // nullopt when no pair is defined
    std::size_t defined_pairs = 0;
    std::vector<BackendPair> undefined_pairs;
};

inline MeanCorrelation mean_of_pairs(const VerdictMatrix& matrix) {
    MeanCorrelation out;
    const auto pairs = pairwise_correlation(matrix);
    double sum = 0;
    const auto& ids = matrix.backend_ids();
    for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
            const auto& pc = pairs.at({ids[a], ids[b]});
            if (pc.r) {
                sum += *pc.r;
                ++out.defined_pairs;
            } else {
                out.undefined_pairs.emplace_back(ids[a], ids[b]);
            }
        }
    }
    if (out.defined_pairs) out.mean = sum / static_cast<double>(out.defined_pairs);
    return out;
}

// Mean pairwise r per group; `group_of` maps a post id to its group key (e.g. language).
// The "overall" entry covers every row.
template <class GroupOf>
std::map<std::string, MeanCorrelation> mean_correlation_by(const VerdictMatrix& matrix, GroupOf group_of) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < matrix.rows(); ++i) groups[group_of(matrix.post_ids()[i])].push_back(i);
    std::map<std::string, MeanCorrelation> out;
    for (const auto& [key, rows] : groups) out[key] = mean_of_pairs(matrix.select_rows(rows));
    return out;
}

enum class CorrelationGrouping { language, overall };

inline std::map<std::string, MeanCorrelation> mean_correlation(CorrelationGrouping by, const VerdictMatrix& matrix,
                                                               const std::vector<Post>& posts) {
    if (by == CorrelationGrouping::overall) return {{"overall", mean_of_pairs(matrix)}};
    std::unordered_map<std::string, std::string> language;
    for (const auto& p : posts) language.emplace(p.id, p.language.name);
    return mean_correlation_by(matrix, [&](const std::string& id) {
        auto it = language.find(id);
        if (it == language.end()) throw DataError("no metadata for post '" + id + "'");
        return it->second;
    });
}

inline void write_fused(std::ostream& out, const std::vector<FusedVerdict>& fused) {
    out << "post_id,label,votes_neg,votes_neu,votes_pos,tie_broken,quorum_met\n";
    for (const auto& f : fused) {
        out << csv::join({f.post_id, std::string(to_string(f.label)), std::to_string(f.vote_counts[0]),
                          std::to_string(f.vote_counts[1]), std::to_string(f.vote_counts[2]),
                          f.tie_broken ? "true" : "false", f.quorum_met ? "true" : "false"})
            << '\n';
    }
}

// Reads the fused csv; '#' provenance lines are skipped. Contributing backends are not stored.
inline std::vector<FusedVerdict> read_fused(std::istream& in) {
    csv::Reader reader(in, true);
    std::vector<FusedVerdict> out;
    auto header_row = reader.next();
    if (!header_row) return out;
    const csv::Header h(*header_row);
    const std::size_t cols[7] = {h.require("post_id"),   h.require("label"),      h.require("votes_neg"),
                                 h.require("votes_neu"), h.require("votes_pos"),  h.require("tie_broken"),
                                 h.require("quorum_met")};
    std::size_t row = 0;
    auto flag = [&](const std::string& s) {
        if (s == "true") return true;
        if (s == "false") return false;
        throw DataError("expected true/false, got '" + s + "'", row);
    };
    while (auto f = reader.next()) {
        ++row;
        if (f->size() < 7) throw DataError("short fused row", row);
        FusedVerdict v;
        v.post_id = (*f)[cols[0]];
        auto label = parse_label((*f)[cols[1]]);
        if (!label) throw DataError("unknown label '" + (*f)[cols[1]] + "'", row);
        v.label = *label;
        try {
            for (int k = 0; k < 3; ++k) v.vote_counts[k] = std::stoi((*f)[cols[2 + k]]);
        } catch (const std::exception&) {
            throw DataError("vote counts must be integers", row);
        }
        v.tie_broken = flag((*f)[cols[5]]);
        v.quorum_met = flag((*f)[cols[6]]);
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace sentifuse
