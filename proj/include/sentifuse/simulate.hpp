#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "fusion.hpp"
#include "label.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace sentifuse {

struct SimulationConfig {
    std::int64_t n_posts = 10000;
    std::vector<double> error_rates;
    // Probability that a post draws one shared error event for all backends.
    double correlation = 0.0;
    std::array<double, 3> prior{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::uint64_t seed = 0;
    int quorum = 1;

    void validate() const {
        if (n_posts < 1) throw DataError("n_posts must be at least 1");
        if (error_rates.empty()) throw DataError("simulation needs at least one backend error rate");
        for (double e : error_rates) {
            if (!(e >= 0.0 && e < 1.0)) throw DataError("error rates must lie in [0, 1)");
        }
        if (!(correlation >= 0.0 && correlation <= 1.0)) throw DataError("correlation must lie in [0, 1]");
        double sum = 0;
        for (double p : prior) {
            if (p < 0) throw DataError("class prior must be non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw DataError("class prior must sum to 1");
        if (quorum < 1) throw DataError("quorum must be at least 1");
    }
};

struct SimulationResult {
    std::vector<double> backend_error;    // realized, per backend
    double fused_error = 0.0;
    double tie_rate = 0.0;
    std::optional<double> mean_label_r;   // mean pairwise r of encoded labels
    std::optional<double> mean_error_r;   // mean pairwise r of 0/1 error indicators
};

// Draws gold labels from the prior and corrupts them per backend. With probability
// `correlation` a post gets one shared uniform draw and one shared wrong label, so every
// backend whose rate exceeds the draw makes the same mistake; otherwise backends err
// independently. Marginal error rates are unchanged by the mechanism.
inline SimulationResult run_simulation(const SimulationConfig& config) {
    config.validate();
    const std::size_t k = config.error_rates.size();
    const auto n = static_cast<std::size_t>(config.n_posts);
    SplitMix64 rng(config.seed);

    std::vector<std::string> post_ids(n), backend_ids(k);
    for (std::size_t i = 0; i < n; ++i) post_ids[i] = "p" + std::to_string(i);
    for (std::size_t b = 0; b < k; ++b) backend_ids[b] = "b" + std::to_string(b);
    VerdictMatrix matrix(post_ids, backend_ids);
    std::vector<SentimentLabel> gold(n);
    std::vector<std::vector<double>> wrong(k, std::vector<double>(n, 0.0));

    auto wrong_label = [&](SentimentLabel g) {
        const int shift = rng.uniform() < 0.5 ? 1 : 2;
        return static_cast<SentimentLabel>((static_cast<int>(g) + shift) % 3);
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        gold[i] = u < config.prior[0] ? SentimentLabel::negative
                  : u < config.prior[0] + config.prior[1] ? SentimentLabel::neutral
                                                          : SentimentLabel::positive;
        if (rng.uniform() < config.correlation) {
            const double shared = rng.uniform();
            const SentimentLabel mistake = wrong_label(gold[i]);
            for (std::size_t b = 0; b < k; ++b) {
                const bool err = shared < config.error_rates[b];
                matrix.set(i, b, err ? mistake : gold[i]);
                wrong[b][i] = err ? 1.0 : 0.0;
            }
        } else {
            for (std::size_t b = 0; b < k; ++b) {
                const bool err = rng.uniform() < config.error_rates[b];
                matrix.set(i, b, err ? wrong_label(gold[i]) : gold[i]);
                wrong[b][i] = err ? 1.0 : 0.0;
            }
        }
    }

    SimulationResult result;
    for (std::size_t b = 0; b < k; ++b) {
        double s = 0;
        for (double w : wrong[b]) s += w;
        result.backend_error.push_back(s / static_cast<double>(n));
    }

    const auto fused = fuse_all(matrix, config.quorum);
    std::size_t fused_wrong = 0, ties = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (fused[i].label != gold[i]) ++fused_wrong;
        if (fused[i].tie_broken) ++ties;
    }
    result.fused_error = static_cast<double>(fused_wrong) / static_cast<double>(n);
    result.tie_rate = static_cast<double>(ties) / static_cast<double>(n);
    result.mean_label_r = mean_of_pairs(matrix).mean;

    double sum = 0;
    std::size_t defined = 0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            if (auto r = pearson(wrong[a], wrong[b])) {
                sum += *r;
                ++defined;
            }
        }
    }
    if (defined) result.mean_error_r = sum / static_cast<double>(defined);
    return result;
}

inline void write_simulation_header(std::ostream& out) {
    out << "seed,n_posts,correlation,error_rates,realized_errors,fused_error,tie_rate,mean_label_r,mean_error_r\n";
}

inline void write_simulation_row(std::ostream& out, const SimulationConfig& config, const SimulationResult& r) {
    auto fmt = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", x);
        return std::string(buf);
    };
    auto join = [&](const std::vector<double>& xs) {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ";" : "") + fmt(xs[i]);
        return s;
    };
    out << csv::join({std::to_string(config.seed), std::to_string(config.n_posts), fmt(config.correlation),
                      join(config.error_rates), join(r.backend_error), fmt(r.fused_error), fmt(r.tie_rate),
                      r.mean_label_r ? fmt(*r.mean_label_r) : "undefined",
                      r.mean_error_r ? fmt(*r.mean_error_r) : "undefined"})
        << '\n';
}

}  // namespace sentifuse
