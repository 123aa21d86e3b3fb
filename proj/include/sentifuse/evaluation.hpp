#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "backends.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "fusion.hpp"
#include "rational.hpp"
#include "registry.hpp"
#include "stats.hpp"

namespace sentifuse {

using Prediction = std::pair<std::string, SentimentLabel>;
using GoldLabels = std::unordered_map<std::string, SentimentLabel>;

// (# predictions that differ from gold) / (# predictions).
inline Rational error_rate(const std::vector<Prediction>& predictions, const GoldLabels& gold) {
    if (predictions.empty()) throw DataError("error rate is undefined without predictions");
    std::int64_t wrong = 0;
    for (const auto& [id, label] : predictions) {
        auto it = gold.find(id);
        if (it == gold.end()) throw DataError("no gold label for post '" + id + "'");
        if (it->second != label) ++wrong;
    }
    return Rational(wrong, static_cast<std::int64_t>(predictions.size()));
}

struct ConfusionMatrix {
    // counts[gold][predicted]
    std::array<std::array<std::int64_t, 3>, 3> counts{};

    void add(SentimentLabel gold, SentimentLabel predicted, std::int64_t n = 1) {
        counts[index_of(gold)][index_of(predicted)] += n;
    }
    std::int64_t total() const {
        std::int64_t t = 0;
        for (const auto& row : counts) {
            for (auto c : row) t += c;
        }
        return t;
    }
    std::int64_t gold_count(SentimentLabel l) const {
        const auto& row = counts[index_of(l)];
        return row[0] + row[1] + row[2];
    }
    std::int64_t predicted_count(SentimentLabel l) const {
        return counts[0][index_of(l)] + counts[1][index_of(l)] + counts[2][index_of(l)];
    }
    std::int64_t correct() const { return counts[0][0] + counts[1][1] + counts[2][2]; }
};

struct F1Scores {
    // nullopt: class has neither gold members nor predictions; excluded from the macro mean.
    std::array<std::optional<double>, 3> per_class;
    std::array<std::optional<double>, 3> precision;
    std::array<std::optional<double>, 3> recall;
    double macro = 0.0;
    double micro = 0.0;
};

inline F1Scores f1_scores(const ConfusionMatrix& m) {
    if (m.total() == 0) throw DataError("F1 is undefined for an empty confusion matrix");
    F1Scores out;
    std::int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
    double macro_sum = 0;
    int defined = 0;
    for (auto l : kAllLabels) {
        const auto k = index_of(l);
        const std::int64_t tp = m.counts[k][k];
        const std::int64_t fp = m.predicted_count(l) - tp;
        const std::int64_t fn = m.gold_count(l) - tp;
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn;
        if (tp + fp > 0) out.precision[k] = to_double(Rational(tp, tp + fp));
        if (tp + fn > 0) out.recall[k] = to_double(Rational(tp, tp + fn));
        if (2 * tp + fp + fn > 0) {
            out.per_class[k] = to_double(Rational(2 * tp, 2 * tp + fp + fn));
            macro_sum += *out.per_class[k];
            ++defined;
        }
    }
    out.macro = macro_sum / defined;
    out.micro = to_double(Rational(2 * tp_sum, 2 * tp_sum + fp_sum + fn_sum));
    return out;
}

struct ErrorCell {
    std::int64_t errors = 0;
    std::int64_t n = 0;
    std::optional<Rational> rate;  // nullopt when n == 0
};

struct F1Cell {
    std::int64_t n = 0;
    std::optional<F1Scores> scores;
};

enum class RowKind { topic, language, overall };

struct ReportRow {
    std::string name;
    RowKind kind;
};

struct PairTTest {
    std::string a, b;
    WelchResult result;
};

struct EvaluationReport {
    std::vector<std::string> columns;        // backends, then "fused"
    std::vector<ReportRow> error_rows;       // topics, languages, overall
    std::vector<ReportRow> f1_rows;          // languages, overall
    std::map<std::string, std::map<std::string, ErrorCell>> errors;  // [row][column]
    std::map<std::string, std::map<std::string, F1Cell>> f1;         // [row][column]
    std::map<std::string, MeanCorrelation> correlation;              // language groups + "overall"
    std::vector<PairTTest> t_tests;          // per-topic error rates, each backend pair
    std::size_t excluded_without_gold = 0;
    std::size_t fused_quorum_failed = 0;
    std::string annotator_note;

    // "row/column" names of cells that could not be computed.
    std::vector<std::string> incomputable() const {
        std::vector<std::string> out;
        for (const auto& row : error_rows) {
            for (const auto& col : columns) {
                if (!errors.at(row.name).at(col).rate) out.push_back("errors:" + row.name + "/" + col);
            }
        }
        for (const auto& row : f1_rows) {
            for (const auto& col : columns) {
                if (!f1.at(row.name).at(col).scores) out.push_back("f1:" + row.name + "/" + col);
            }
        }
        return out;
    }
};

inline constexpr std::string_view kFusedColumn = "fused";
inline constexpr std::string_view kDefaultAnnotatorNote =
    "All annotators disagree on 0.6% of a 1k-post subset; posts without an adjudicated gold label are excluded.";

// Error rates per topic/language/overall and F1 per language/overall for every backend and
// the fused labels, plus inter-backend correlations and per-topic t-tests. Only posts with a
// gold label are scored; "overall" pools all scored verdicts.
inline EvaluationReport build_report(const std::vector<Verdict>& verdicts, const std::vector<FusedVerdict>& fused,
                                     const std::vector<Post>& posts, const std::vector<std::string>& backend_order,
                                     const Schema& schema = {}, std::string annotator_note = std::string(kDefaultAnnotatorNote)) {
    EvaluationReport report;
    report.annotator_note = std::move(annotator_note);
    report.columns = backend_order;
    report.columns.emplace_back(kFusedColumn);
    for (const auto& t : schema.topics.values()) report.error_rows.push_back({t.name, RowKind::topic});
    for (const auto& l : schema.languages.values()) {
        report.error_rows.push_back({l.name, RowKind::language});
        report.f1_rows.push_back({l.name, RowKind::language});
    }
    report.error_rows.push_back({"overall", RowKind::overall});
    report.f1_rows.push_back({"overall", RowKind::overall});

    GoldLabels gold;
    std::unordered_map<std::string, const Post*> meta;
    for (const auto& p : posts) {
        meta.emplace(p.id, &p);
        if (p.gold_label) {
            gold.emplace(p.id, *p.gold_label);
        } else {
            ++report.excluded_without_gold;
        }
    }

    // predictions[column][row]
    std::map<std::string, std::map<std::string, std::vector<Prediction>>> predictions;
    auto add = [&](const std::string& column, const std::string& post_id, SentimentLabel label) {
        auto it = meta.find(post_id);
        if (it == meta.end()) throw DataError("verdict for unknown post '" + post_id + "'");
        if (!gold.count(post_id)) return;
        auto& by_row = predictions[column];
        by_row[it->second->topic.name].emplace_back(post_id, label);
        by_row[it->second->language.name].emplace_back(post_id, label);
        by_row["overall"].emplace_back(post_id, label);
    };
    for (const auto& v : verdicts) {
        if (std::find(backend_order.begin(), backend_order.end(), v.backend_id) != backend_order.end()) {
            add(v.backend_id, v.post_id, v.label);
        }
    }
    for (const auto& f : fused) {
        if (!f.quorum_met) {
            ++report.fused_quorum_failed;
            continue;
        }
        add(std::string(kFusedColumn), f.post_id, f.label);
    }

    for (const auto& column : report.columns) {
        const auto& by_row = predictions[column];
        for (const auto& row : report.error_rows) {
            ErrorCell cell;
            if (auto it = by_row.find(row.name); it != by_row.end() && !it->second.empty()) {
                cell.n = static_cast<std::int64_t>(it->second.size());
                cell.rate = error_rate(it->second, gold);
                for (const auto& [id, label] : it->second) cell.errors += gold.at(id) != label ? 1 : 0;
            }
            report.errors[row.name][column] = cell;
        }
        for (const auto& row : report.f1_rows) {
            F1Cell cell;
            if (auto it = by_row.find(row.name); it != by_row.end() && !it->second.empty()) {
                ConfusionMatrix m;
                for (const auto& [id, label] : it->second) m.add(gold.at(id), label);
                cell.n = m.total();
                cell.scores = f1_scores(m);
            }
            report.f1[row.name][column] = cell;
        }
    }

    std::vector<std::string> post_ids;
    for (const auto& p : posts) post_ids.push_back(p.id);
    const auto matrix = VerdictMatrix::from_verdicts(post_ids, backend_order, verdicts);
    report.correlation = mean_correlation(CorrelationGrouping::language, matrix, posts);
    report.correlation["overall"] = mean_of_pairs(matrix);

    for (std::size_t i = 0; i < backend_order.size(); ++i) {
        for (std::size_t j = i + 1; j < backend_order.size(); ++j) {
            std::vector<double> a, b;
            for (const auto& row : report.error_rows) {
                if (row.kind != RowKind::topic) continue;
                const auto& ca = report.errors[row.name][backend_order[i]];
                const auto& cb = report.errors[row.name][backend_order[j]];
                if (ca.rate) a.push_back(to_double(*ca.rate));
                if (cb.rate) b.push_back(to_double(*cb.rate));
            }
            report.t_tests.push_back({backend_order[i], backend_order[j], welch_t_test(a, b)});
        }
    }
    return report;
}

// ---- emission -------------------------------------------------------------------------

inline std::string percent(const Rational& r) { return format_fixed(r * 100, 1); }
inline std::string percent(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", x * 100.0);
    return buf;
}

namespace detail {

inline nlohmann::ordered_json optional_number(const std::optional<double>& x) {
    return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
}

inline std::string_view to_string(RowKind k) {
    return k == RowKind::topic ? "topic" : k == RowKind::language ? "language" : "overall";
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["columns"] = r.columns;
    auto& errors = j["error_rates"] = nlohmann::ordered_json::array();
    for (const auto& row : r.error_rows) {
        nlohmann::ordered_json jr;
        jr["row"] = row.name;
        jr["kind"] = detail::to_string(row.kind);
        for (const auto& col : r.columns) {
            const auto& c = r.errors.at(row.name).at(col);
            jr["cells"][col] = {{"errors", c.errors},
                                {"n", c.n},
                                {"rate", c.rate ? nlohmann::ordered_json(to_fraction_string(*c.rate))
                                                : nlohmann::ordered_json(nullptr)},
                                {"percent", c.rate ? nlohmann::ordered_json(percent(*c.rate))
                                                   : nlohmann::ordered_json(nullptr)}};
        }
        errors.push_back(std::move(jr));
    }
    auto& f1 = j["f1"] = nlohmann::ordered_json::array();
    for (const auto& row : r.f1_rows) {
        nlohmann::ordered_json jr;
        jr["row"] = row.name;
        for (const auto& col : r.columns) {
            const auto& c = r.f1.at(row.name).at(col);
            nlohmann::ordered_json cell;
            cell["n"] = c.n;
            if (c.scores) {
                cell["macro"] = c.scores->macro;
                cell["micro"] = c.scores->micro;
                for (auto l : kAllLabels) {
                    cell["per_class"][std::string(to_string(l))] = detail::optional_number(c.scores->per_class[index_of(l)]);
                }
            } else {
                cell["macro"] = nullptr;
                cell["micro"] = nullptr;
            }
            jr["cells"][col] = std::move(cell);
        }
        f1.push_back(std::move(jr));
    }
    auto& corr = j["correlation"] = nlohmann::ordered_json::object();
    for (const auto& [group, m] : r.correlation) {
        nlohmann::ordered_json undefined = nlohmann::ordered_json::array();
        for (const auto& [a, b] : m.undefined_pairs) undefined.push_back({a, b});
        corr[group] = {{"mean_r", detail::optional_number(m.mean)},
                       {"defined_pairs", m.defined_pairs},
                       {"undefined_pairs", undefined}};
    }
    auto& tt = j["t_tests"] = nlohmann::ordered_json::array();
    for (const auto& t : r.t_tests) {
        nlohmann::ordered_json jt;
        jt["a"] = t.a;
        jt["b"] = t.b;
        jt["degenerate"] = t.result.degenerate;
        if (!t.result.degenerate) {
            jt["t"] = t.result.t;
            jt["df"] = t.result.degrees_of_freedom;
            jt["p_two_sided"] = t.result.p_two_sided;
        }
        tt.push_back(std::move(jt));
    }
    j["excluded_without_gold"] = r.excluded_without_gold;
    j["fused_quorum_failed"] = r.fused_quorum_failed;
    j["annotator_note"] = r.annotator_note;
    return j;
}

}  // namespace sentifuse
