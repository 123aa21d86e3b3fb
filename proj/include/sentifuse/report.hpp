#pragma once

#include <algorithm>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csv.hpp"

namespace sentifuse {

namespace detail {

using Json = nlohmann::ordered_json;

inline std::string cell_text(const Json& v) { return v.is_null() ? "n/a" : v.get<std::string>() + "%"; }

inline std::string f1_text(const Json& v) {
    if (v.is_null()) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", v.get<double>() * 100.0);
    return buf;
}

inline void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
        width.resize(std::max(width.size(), r.size()));
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const std::string pad(width[i] - r[i].size(), ' ');
            line += i == 0 ? r[i] + pad : "  " + pad + r[i];
        }
        out << line << '\n';
    }
}

}  // namespace detail

// Human-readable error-rate and F1 tables from an evaluation json document.
inline void render_report_text(std::ostream& out, const nlohmann::ordered_json& evaluation) {
    const auto& columns = evaluation.at("columns");
    std::vector<std::string> header{""};
    for (const auto& c : columns) header.push_back(c.get<std::string>());

    out << "Error rates (lower is better)\n";
    std::vector<std::vector<std::string>> rows{header};
    std::string last_kind;
    for (const auto& row : evaluation.at("error_rates")) {
        std::vector<std::string> r{row.at("row").get<std::string>()};
        for (const auto& c : columns) r.push_back(detail::cell_text(row.at("cells").at(c.get<std::string>()).at("percent")));
        rows.push_back(std::move(r));
    }
    detail::print_table(out, rows);

    out << "\nMacro F1 (micro F1 in parentheses)\n";
    rows = {header};
    for (const auto& row : evaluation.at("f1")) {
        std::vector<std::string> r{row.at("row").get<std::string>()};
        for (const auto& c : columns) {
            const auto& cell = row.at("cells").at(c.get<std::string>());
            r.push_back(detail::f1_text(cell.at("macro")) + " (" + detail::f1_text(cell.at("micro")) + ")");
        }
        rows.push_back(std::move(r));
    }
    detail::print_table(out, rows);

    out << "\nMean pairwise Pearson r between backends\n";
    rows = {};
    for (const auto& [group, c] : evaluation.at("correlation").items()) {
        char buf[32] = "n/a";
        if (!c.at("mean_r").is_null()) std::snprintf(buf, sizeof buf, "%.3f", c.at("mean_r").get<double>());
        rows.push_back({group, buf, std::to_string(c.at("defined_pairs").get<std::size_t>()) + " pairs"});
    }
    detail::print_table(out, rows);

    out << "\nWelch t-tests on per-topic error rates\n";
    rows = {{"pair", "t", "df", "p"}};
    for (const auto& t : evaluation.at("t_tests")) {
        const std::string pair = t.at("a").get<std::string>() + " vs " + t.at("b").get<std::string>();
        if (t.at("degenerate").get<bool>()) {
            rows.push_back({pair, "degenerate", "", ""});
            continue;
        }
        char tb[32], db[32], pb[32];
        std::snprintf(tb, sizeof tb, "%.3f", t.at("t").get<double>());
        std::snprintf(db, sizeof db, "%.2f", t.at("df").get<double>());
        std::snprintf(pb, sizeof pb, "%.4f", t.at("p_two_sided").get<double>());
        rows.push_back({pair, tb, db, pb});
    }
    detail::print_table(out, rows);

    out << "\nNote: " << evaluation.at("annotator_note").get<std::string>() << '\n';
    out << "Posts without gold label: " << evaluation.at("excluded_without_gold").get<std::size_t>()
        << "; fused posts below quorum: " << evaluation.at("fused_quorum_failed").get<std::size_t>() << '\n';
}

inline void write_error_csv(std::ostream& out, const nlohmann::ordered_json& evaluation) {
    out << "row,kind,column,errors,n,rate,percent\n";
    for (const auto& row : evaluation.at("error_rates")) {
        for (const auto& c : evaluation.at("columns")) {
            const auto& cell = row.at("cells").at(c.get<std::string>());
            out << csv::join({row.at("row").get<std::string>(), row.at("kind").get<std::string>(), c.get<std::string>(),
                              std::to_string(cell.at("errors").get<long long>()),
                              std::to_string(cell.at("n").get<long long>()),
                              cell.at("rate").is_null() ? "" : cell.at("rate").get<std::string>(),
                              cell.at("percent").is_null() ? "" : cell.at("percent").get<std::string>()})
                << '\n';
        }
    }
}

inline void write_f1_csv(std::ostream& out, const nlohmann::ordered_json& evaluation) {
    out << "row,column,n,macro_f1,micro_f1\n";
    auto num = [](const nlohmann::ordered_json& v) {
        if (v.is_null()) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", v.get<double>());
        return std::string(buf);
    };
    for (const auto& row : evaluation.at("f1")) {
        for (const auto& c : evaluation.at("columns")) {
            const auto& cell = row.at("cells").at(c.get<std::string>());
            out << csv::join({row.at("row").get<std::string>(), c.get<std::string>(),
                              std::to_string(cell.at("n").get<long long>()), num(cell.at("macro")),
                              num(cell.at("micro"))})
                << '\n';
        }
    }
}

// Cells whose value is null in the evaluation document.
inline std::vector<std::string> incomputable_cells(const nlohmann::ordered_json& evaluation) {
    std::vector<std::string> out;
    for (const auto& row : evaluation.at("error_rates")) {
        for (const auto& [col, cell] : row.at("cells").items()) {
            if (cell.at("rate").is_null()) out.push_back("errors:" + row.at("row").get<std::string>() + "/" + col);
        }
    }
    for (const auto& row : evaluation.at("f1")) {
        for (const auto& [col, cell] : row.at("cells").items()) {
            if (cell.at("macro").is_null()) out.push_back("f1:" + row.at("row").get<std::string>() + "/" + col);
        }
    }
    return out;
}

}  // namespace sentifuse
