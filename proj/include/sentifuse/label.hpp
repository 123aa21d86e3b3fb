#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace sentifuse {

// Ordered negative < neutral < positive; the order fixes serialization.
enum class SentimentLabel : int { negative = 0, neutral = 1, positive = 2 };

inline constexpr std::array<SentimentLabel, 3> kAllLabels{
    SentimentLabel::negative, SentimentLabel::neutral, SentimentLabel::positive};

inline constexpr std::size_t index_of(SentimentLabel label) { return static_cast<std::size_t>(label); }

inline constexpr std::string_view to_string(SentimentLabel label) {
    switch (label) {
        case SentimentLabel::negative: return "negative";
        case SentimentLabel::neutral: return "neutral";
        case SentimentLabel::positive: return "positive";
    }
    return "neutral";
}

// Ordinal encoding used for correlations: -1 / 0 / +1.
inline constexpr int encode(SentimentLabel label) { return static_cast<int>(label) - 1; }

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string_view trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Case-insensitive label lookup with the usual short forms.
// Surrounding whitespace, quotes and a trailing period are ignored.
inline std::optional<SentimentLabel> parse_label(std::string_view text) {
    std::string_view t = trim(text);
    auto drop_period = [&] {
        if (!t.empty() && t.back() == '.') t = trim(t.substr(0, t.size() - 1));
    };
    drop_period();
    if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
        t = trim(t.substr(1, t.size() - 2));
    }
    drop_period();
    const std::string key = ascii_lower(t);

    static constexpr std::array<std::pair<std::string_view, SentimentLabel>, 12> kSynonyms{{
        {"negative", SentimentLabel::negative},
        {"neg", SentimentLabel::negative},
        {"-1", SentimentLabel::negative},
        {"-", SentimentLabel::negative},
        {"neutral", SentimentLabel::neutral},
        {"neu", SentimentLabel::neutral},
        {"0", SentimentLabel::neutral},
        {"positive", SentimentLabel::positive},
        {"pos", SentimentLabel::positive},
        {"+1", SentimentLabel::positive},
        {"1", SentimentLabel::positive},
        {"+", SentimentLabel::positive},
    }};
    for (const auto& [name, label] : kSynonyms) {
        if (key == name) return label;
    }
    return std::nullopt;
}

}  // namespace sentifuse
