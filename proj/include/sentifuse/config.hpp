#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <system_error>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "backends.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "fusion.hpp"
#include "prompting.hpp"
#include "rational.hpp"
#include "registry.hpp"

namespace sentifuse {

namespace fs = std::filesystem;

struct RunConfig {
    fs::path corpus;
    std::optional<CorpusFormat> corpus_format;
    fs::path backends;        // backend registry (json)
    fs::path template_path;   // empty: built-in template
    TiePolicy tie_policy = TiePolicy::neutral;
    int quorum = 3;
    Rational neutral_weight{1};
    bool count_weighted_language_mean = false;
    fs::path out = "out";
    std::uint64_t seed = 0;
    int parallelism = 4;
    RetryPolicy retry;
    bool plot_data = false;
    Schema schema;
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

inline Rational parse_rational(const nlohmann::json& j) {
    if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        auto whole = [](const std::string& text, std::int64_t& v) {
            const auto* end = text.data() + text.size();
            auto [ptr, ec] = std::from_chars(text.data(), end, v);
            return ec == std::errc() && ptr == end && !text.empty();
        };
        std::int64_t p = 0, q = 0;
        if (const auto slash = s.find('/'); slash != std::string::npos) {
            if (whole(s.substr(0, slash), p) && whole(s.substr(slash + 1), q) && q != 0) return Rational(p, q);
        } else if (whole(s, p)) {
            return Rational(p);
        } else {
            double d = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
            if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return parse_rational(nlohmann::json(d));
        }
    }
    if (j.is_number_float()) {
        // Decimal weights such as 0.5 are taken to 6 places.
        return Rational(static_cast<std::int64_t>(std::llround(j.get<double>() * 1e6)), 1000000);
    }
    throw DataError("expected an integer, decimal or \"p/q\" rational, got " + j.dump());
}

inline nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.filename().string() + ": invalid JSON: " + e.what());
    }
}

}  // namespace detail

inline TiePolicy parse_tie_policy(const std::string& s) {
    if (s == "neutral") return TiePolicy::neutral;
    if (s == "backend_priority") return TiePolicy::backend_priority;
    throw DataError("unknown tie policy '" + s + "' (expected neutral or backend_priority)");
}

// Reads a run configuration; relative paths are resolved against the file's directory.
inline RunConfig load_run_config(const fs::path& path) {
    const auto j = detail::read_json_file(path);
    const fs::path base = path.parent_path();
    RunConfig c;
    try {
        if (j.contains("corpus")) c.corpus = detail::resolve(base, j.at("corpus").get<std::string>());
        if (j.contains("corpus_format")) {
            const auto f = j.at("corpus_format").get<std::string>();
            if (f != "csv" && f != "jsonl") throw DataError("corpus_format must be csv or jsonl");
            c.corpus_format = f == "csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
        }
        if (j.contains("backends")) c.backends = detail::resolve(base, j.at("backends").get<std::string>());
        if (j.contains("template")) c.template_path = detail::resolve(base, j.at("template").get<std::string>());
        if (j.contains("tie_policy")) c.tie_policy = parse_tie_policy(j.at("tie_policy").get<std::string>());
        if (j.contains("quorum")) c.quorum = j.at("quorum").get<int>();
        if (j.contains("neutral_weight")) c.neutral_weight = detail::parse_rational(j.at("neutral_weight"));
        if (j.contains("count_weighted_language_mean")) {
            c.count_weighted_language_mean = j.at("count_weighted_language_mean").get<bool>();
        }
        if (j.contains("out")) c.out = detail::resolve(base, j.at("out").get<std::string>());
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("parallelism")) c.parallelism = j.at("parallelism").get<int>();
        if (j.contains("plot_data")) c.plot_data = j.at("plot_data").get<bool>();
        if (j.contains("retry")) {
            const auto& r = j.at("retry");
            c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
            c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", c.retry.base_delay.count()));
            c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
            c.retry.split_on_parse_failure = r.value("split_on_parse_failure", c.retry.split_on_parse_failure);
        }
        if (j.contains("languages")) c.schema.languages = LanguageRegistry(j.at("languages").get<std::vector<std::string>>());
        if (j.contains("topics")) c.schema.topics = TopicRegistry(j.at("topics").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.filename().string() + ": " + e.what());
    }
    if (c.parallelism < 1) throw DataError("parallelism must be at least 1");
    if (c.quorum < 1) throw DataError("quorum must be at least 1");
    return c;
}

inline BackendKind parse_backend_kind(const std::string& s) {
    if (s == "remote_http") return BackendKind::remote_http;
    if (s == "scripted") return BackendKind::scripted;
    if (s == "noise_sim") return BackendKind::noise_sim;
    throw DataError("unknown backend kind '" + s + "'");
}

// Enabled backend profiles in file order. Credentials are never read from this file.
inline std::vector<BackendProfile> parse_backend_registry(const nlohmann::json& j, const fs::path& base = {}) {
    std::vector<BackendProfile> out;
    if (!j.contains("backends") || !j.at("backends").is_array()) throw DataError("backend registry needs a 'backends' array");
    for (const auto& b : j.at("backends")) {
        for (const char* secret : {"api_key", "token", "password", "secret"}) {
            if (b.contains(secret)) {
                throw DataError(std::string("backend registry must not contain '") + secret +
                                "'; name an environment variable with api_key_env instead");
            }
        }
        if (!b.value("enabled", true)) continue;
        BackendProfile p;
        try {
            p.backend_id = b.at("id").get<std::string>();
            p.kind = parse_backend_kind(b.at("kind").get<std::string>());
            const std::string model = b.value("model", std::string());
            auto limit = default_context_limit(model.empty() ? p.backend_id : model);
            if (!limit) limit = default_context_limit(p.backend_id);
            p.token_budget.context_limit = b.value("context_limit", limit.value_or(4096));
            p.token_budget.response_reserve = b.value("response_reserve", p.token_budget.response_reserve);
            p.token_budget.per_post_reserve = b.value("per_post_reserve", p.token_budget.per_post_reserve);
            p.token_budget.safety_margin = b.value("safety_margin", p.token_budget.safety_margin);
            p.seed = b.value("seed", std::uint64_t{0});
            if (b.contains("error_rate")) p.error_rates.fill(b.at("error_rate").get<double>());
            if (b.contains("error_rates")) {
                for (auto l : kAllLabels) {
                    p.error_rates[index_of(l)] = b.at("error_rates").at(std::string(to_string(l))).get<double>();
                }
            }
            if (b.contains("fixture")) p.fixture = detail::resolve(base, b.at("fixture").get<std::string>());
            p.remote.endpoint = b.value("endpoint", std::string());
            p.remote.path = b.value("path", p.remote.path);
            p.remote.model = model;
            p.remote.api_key_env = b.value("api_key_env", std::string());
            p.remote.reply_pointer = b.value("reply_pointer", p.remote.reply_pointer);
            p.remote.temperature = b.value("temperature", 0.0);
            p.remote.min_interval = std::chrono::milliseconds(b.value("min_interval_ms", 0));
            p.remote.timeout = std::chrono::seconds(b.value("timeout_s", 60));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("backend registry: " + std::string(e.what()));
        }
        for (double e : p.error_rates) {
            if (!(e >= 0.0 && e <= 1.0)) throw DataError("backend '" + p.backend_id + "': error rates must lie in [0, 1]");
        }
        if (p.kind == BackendKind::scripted && p.fixture.empty()) {
            throw DataError("scripted backend '" + p.backend_id + "' needs a fixture");
        }
        p.token_budget.validate();
        for (const auto& other : out) {
            if (other.backend_id == p.backend_id) throw DataError("duplicate backend id '" + p.backend_id + "'");
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<BackendProfile> load_backend_registry(const fs::path& path) {
    return parse_backend_registry(detail::read_json_file(path), path.parent_path());
}

}  // namespace sentifuse
