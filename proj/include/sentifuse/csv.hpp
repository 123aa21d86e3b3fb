#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace sentifuse::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and newlines.
// Tracks the physical line where each record starts for error messages.
class Reader {
public:
    explicit Reader(std::istream& in, bool skip_comments = false) : in_(in), skip_comments_(skip_comments) {}

    // Next record, or nullopt at end of input. Blank lines are skipped.
    std::optional<Row> next() {
        while (true) {
            int c = in_.peek();
            if (c == std::char_traits<char>::eof()) return std::nullopt;
            if (c == '\r' || c == '\n') {
                consume_newline();
                continue;
            }
            if (skip_comments_ && c == '#') {
                std::string ignored;
                std::getline(in_, ignored);
                ++line_;
                continue;
            }
            break;
        }
        record_line_ = line_ + 1;

        Row row;
        std::string field;
        bool quoted = false;
        bool field_was_quoted = false;
        while (true) {
            int c = in_.get();
            if (c == std::char_traits<char>::eof()) {
                if (quoted) throw DataError("unterminated quoted field", record_line_);
                row.push_back(std::move(field));
                ++line_;
                return row;
            }
            if (quoted) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(static_cast<char>(c));
                }
                continue;
            }
            if (c == '"' && field.empty() && !field_was_quoted) {
                quoted = true;
                field_was_quoted = true;
            } else if (c == ',') {
                row.push_back(std::move(field));
                field.clear();
                field_was_quoted = false;
            } else if (c == '\r' || c == '\n') {
                if (c == '\r' && in_.peek() == '\n') in_.get();
                ++line_;
                row.push_back(std::move(field));
                return row;
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
    }

    // Physical line (1-based) where the most recent record started.
    std::size_t record_line() const noexcept { return record_line_; }

private:
    void consume_newline() {
        int c = in_.get();
        if (c == '\r' && in_.peek() == '\n') in_.get();
        ++line_;
    }

    std::istream& in_;
    bool skip_comments_;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
};

inline bool needs_quoting(std::string_view field) {
    if (field.empty()) return false;
    if (field.front() == ' ' || field.back() == ' ' || field.front() == '#') return true;
    return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline std::string quote(std::string_view field) {
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string escape(std::string_view field) {
    return needs_quoting(field) ? quote(field) : std::string(field);
}

inline std::string join(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(row[i]);
    }
    return out;
}

// Maps header names to column positions; throws if a required column is absent.
class Header {
public:
    explicit Header(const Row& names) : names_(names) {}

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (trim_bom(names_[i]) == name) return i;
        }
        return std::nullopt;
    }

    std::size_t require(std::string_view name) const {
        if (auto i = find(name)) return *i;
        throw DataError("missing required column '" + std::string(name) + "'", 1);
    }

private:
    static std::string_view trim_bom(std::string_view s) {
        if (s.size() >= 3 && s.substr(0, 3) == "\xEF\xBB\xBF") s.remove_prefix(3);
        return s;
    }

    Row names_;
};

}  // namespace sentifuse::csv
