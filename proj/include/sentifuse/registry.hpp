#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "label.hpp"

namespace sentifuse {

namespace detail {

template <class Tag>
struct NamedValue {
    std::string name;

    NamedValue() = default;
    explicit NamedValue(std::string n) : name(std::move(n)) {}

    friend auto operator<=>(const NamedValue&, const NamedValue&) = default;
    friend bool operator==(const NamedValue&, const NamedValue&) = default;
};

struct LanguageTag {};
struct TopicTag {};

}  // namespace detail

using Language = detail::NamedValue<detail::LanguageTag>;
using Topic = detail::NamedValue<detail::TopicTag>;

// Ordered set of canonical names. Lookup ignores case and treats '_' / '-' as spaces,
// so "police_service" resolves to "police service".
template <class Value>
class Registry {
public:
    Registry() = default;
    explicit Registry(std::vector<std::string> names) {
        for (auto& n : names) add(std::move(n));
    }

    void add(std::string name) {
        if (!find(name)) values_.emplace_back(std::move(name));
    }

    std::optional<Value> find(std::string_view raw) const {
        const std::string key = fold(raw);
        for (const auto& v : values_) {
            if (fold(v.name) == key) return v;
        }
        return std::nullopt;
    }

    bool contains(const Value& v) const { return find(v.name).has_value(); }
    const std::vector<Value>& values() const& noexcept { return values_; }
    std::vector<Value> values() && { return std::move(values_); }
    std::size_t size() const noexcept { return values_.size(); }

private:
    static std::string fold(std::string_view s) {
        std::string out = ascii_lower(trim(s));
        for (char& c : out) {
            if (c == '_' || c == '-') c = ' ';
        }
        return out;
    }

    std::vector<Value> values_;
};

using LanguageRegistry = Registry<Language>;
using TopicRegistry = Registry<Topic>;

inline LanguageRegistry default_languages() { return LanguageRegistry({"English", "Sepedi", "Setswana"}); }

// The ten government-department topics.
inline TopicRegistry default_topics() {
    return TopicRegistry({"agriculture", "education", "employment", "health", "home affairs", "police service",
                          "rural development", "sanitation", "small business", "transport"});
}

struct Schema {
    LanguageRegistry languages = default_languages();
    TopicRegistry topics = default_topics();
};

}  // namespace sentifuse
