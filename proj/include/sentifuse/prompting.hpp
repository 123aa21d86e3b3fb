#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "label.hpp"
#include "registry.hpp"

namespace sentifuse {

inline constexpr std::string_view kDefaultInstruction =
    "You are a sentiment analysis system. Each row of the csv table below is a social media post about the topic "
    "\"{topic}\". Classify the sentiment that each post expresses towards the topic {topic} into exactly one of the "
    "three classes negative, neutral or positive.\n"
    "\n"
    "Class definitions:\n"
    "{class_definitions}\n"
    "\n"
    "Posts (csv with columns id,text):\n"
    "{posts_csv}\n"
    "\n"
    "Answer only with a csv table with the header id,label and one row per post, where label is negative, neutral "
    "or positive. Copy every id exactly as given.\n";

struct PromptTemplate {
    std::string instruction_text{kDefaultInstruction};
    // Indexed by SentimentLabel.
    std::array<std::string, 3> class_definitions{
        "the post expresses dissatisfaction, criticism, anger, fear or complaints about the topic.",
        "the post is factual, informational or expresses no clear opinion about the topic.",
        "the post expresses satisfaction, praise, support or optimism about the topic.",
    };

    // Throws unless {posts_csv} occurs exactly once and {class_definitions} is present.
    void validate() const {
        auto occurrences = [&](std::string_view needle) {
            std::size_t n = 0;
            for (auto pos = instruction_text.find(needle); pos != std::string::npos;
                 pos = instruction_text.find(needle, pos + needle.size())) {
                ++n;
            }
            return n;
        };
        if (occurrences("{posts_csv}") != 1) throw DataError("prompt template must contain {posts_csv} exactly once");
        if (occurrences("{class_definitions}") == 0) throw DataError("prompt template lacks {class_definitions}");
        if (occurrences("{topic}") == 0) throw DataError("prompt template lacks {topic}");
    }
};

inline PromptTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open prompt template '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    PromptTemplate tpl;
    tpl.instruction_text = buf.str();
    tpl.validate();
    return tpl;
}

struct Batch {
    Topic topic;
    std::vector<Post> posts;
    std::int64_t estimated_tokens = 0;
};

struct TokenBudget {
    std::int64_t context_limit = 2048;
    std::int64_t response_reserve = 64;  // fixed part of the reply allowance
    std::int64_t per_post_reserve = 4;   // one "id,label" reply row per post
    double safety_margin = 0.9;

    std::int64_t usable() const {
        return static_cast<std::int64_t>(std::floor(static_cast<double>(context_limit) * safety_margin + 1e-9)) -
               response_reserve;
    }

    void validate() const {
        if (context_limit <= 0) throw DataError("context_limit must be positive");
        if (response_reserve < 0 || per_post_reserve < 0) throw DataError("reserves must be non-negative");
        if (response_reserve >= context_limit) throw DataError("response_reserve must be below context_limit");
        if (!(safety_margin > 0.0 && safety_margin <= 1.0)) throw DataError("safety_margin must lie in (0, 1]");
        if (usable() <= 0) throw DataError("token budget leaves no room for the prompt");
    }
};

// ceil(words * 1.5)
inline std::int64_t estimate_tokens(std::string_view text) {
    const auto words = static_cast<std::int64_t>(count_words(text));
    return (3 * words + 1) / 2;
}

namespace detail {

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

inline std::string render_class_definitions(const PromptTemplate& tpl) {
    std::string out;
    for (auto label : kAllLabels) {
        if (!out.empty()) out.push_back('\n');
        out += to_string(label);
        out += ": ";
        out += tpl.class_definitions[index_of(label)];
    }
    return out;
}

inline std::string render_post_row(const Post& post) { return csv::escape(post.id) + "," + csv::quote(post.text); }

inline constexpr std::string_view kPostsHeader = "id,text";

// Template with topic and class definitions substituted, split around {posts_csv}.
struct RenderedFrame {
    std::string prefix;
    std::string suffix;
};

inline RenderedFrame render_frame(const PromptTemplate& tpl, const Topic& topic) {
    std::string text = tpl.instruction_text;
    replace_all(text, "{class_definitions}", render_class_definitions(tpl));
    replace_all(text, "{topic}", topic.name);
    const auto pos = text.find("{posts_csv}");
    if (pos == std::string::npos) throw DataError("prompt template must contain {posts_csv}");
    return {text.substr(0, pos), text.substr(pos + std::string_view("{posts_csv}").size())};
}

}  // namespace detail

// English classification prompt for one topic batch: instruction, class definitions,
// the posts as an id,text csv block and the id,label reply directive.
inline std::string build_prompt(const PromptTemplate& tpl, const Topic& topic, const Batch& batch) {
    if (batch.posts.empty()) throw DataError("cannot build a prompt for an empty batch");
    if (!(batch.topic == topic)) throw DataError("batch topic '" + batch.topic.name + "' differs from '" + topic.name + "'");
    const auto frame = detail::render_frame(tpl, topic);
    std::string block(detail::kPostsHeader);
    for (const auto& post : batch.posts) {
        block.push_back('\n');
        block += detail::render_post_row(post);
    }
    return frame.prefix + block + frame.suffix;
}

// Greedy order-preserving packing. Word counts are additive across the newline-separated
// csv rows and sub-additive across the frame boundaries, so the running sum bounds the
// rendered prompt from above.
inline std::vector<Batch> pack_batches(const std::vector<Post>& posts, const PromptTemplate& tpl, const Topic& topic,
                                       const TokenBudget& budget) {
    budget.validate();
    const auto frame = detail::render_frame(tpl, topic);
    const auto overhead_words = static_cast<std::int64_t>(
        count_words(frame.prefix) + count_words(frame.suffix) + count_words(detail::kPostsHeader));
    const std::int64_t usable = budget.usable();
    auto fits = [&](std::int64_t words, std::int64_t n_posts) {
        return (3 * words + 1) / 2 + budget.per_post_reserve * n_posts <= usable;
    };

    std::vector<Batch> batches;
    Batch current{topic, {}, 0};
    std::int64_t words = overhead_words;

    auto flush = [&] {
        if (current.posts.empty()) return;
        current.estimated_tokens = estimate_tokens(build_prompt(tpl, topic, current));
        batches.push_back(std::move(current));
        current = Batch{topic, {}, 0};
        words = overhead_words;
    };

    for (const auto& post : posts) {
        if (!(post.topic == topic)) {
            throw DataError("post '" + post.id + "' has topic '" + post.topic.name + "', not '" + topic.name + "'");
        }
        const auto row_words = static_cast<std::int64_t>(count_words(detail::render_post_row(post)));
        if (!fits(overhead_words + row_words, 1)) {
            throw DataError("post '" + post.id + "' does not fit the token budget even alone");
        }
        if (!fits(words + row_words, static_cast<std::int64_t>(current.posts.size()) + 1)) flush();
        current.posts.push_back(post);
        words += row_words;
    }
    flush();
    return batches;
}

}  // namespace sentifuse
