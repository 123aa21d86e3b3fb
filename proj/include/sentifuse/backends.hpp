#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "label.hpp"
#include "prompting.hpp"
#include "random.hpp"

namespace sentifuse {

enum class BackendKind { remote_http, scripted, noise_sim };

struct RemoteConfig {
    std::string endpoint;                        // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env;                     // name of the variable holding the key, never the key
    std::string reply_pointer = "/choices/0/message/content";
    double temperature = 0.0;
    std::chrono::milliseconds min_interval{0};   // rate-limit gate between requests
    std::chrono::seconds timeout{60};
};

struct BackendProfile {
    std::string backend_id;
    BackendKind kind = BackendKind::scripted;
    TokenBudget token_budget;
    RemoteConfig remote;
    // noise_sim: probability of a wrong label, indexed by the gold label.
    std::array<double, 3> error_rates{0.0, 0.0, 0.0};
    std::uint64_t seed = 0;
    std::filesystem::path fixture;  // scripted
};

// Context limits of the reference models, keyed by a folded model name prefix.
inline std::optional<std::int64_t> default_context_limit(std::string_view name) {
    std::string folded;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) folded.push_back(static_cast<char>(std::tolower(c)));
    }
    static const std::array<std::pair<std::string_view, std::int64_t>, 5> kLimits{{
        {"gpt35", 16384},
        {"gpt4", 131072},
        {"llama2", 4096},
        {"palm2", 8192},
        {"dolly2", 2048},
    }};
    for (const auto& [prefix, limit] : kLimits) {
        if (folded.rfind(prefix, 0) == 0) return limit;
    }
    return std::nullopt;
}

struct Verdict {
    std::string post_id;
    std::string backend_id;
    SentimentLabel label = SentimentLabel::neutral;
    std::optional<std::string> raw_fragment;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct ParseIssue {
    enum class Kind { missing, unknown_id, duplicate_id, unparseable_label, malformed_line };
    Kind kind;
    std::string post_id;  // empty for malformed lines
    std::string line;

    friend bool operator==(const ParseIssue&, const ParseIssue&) = default;
};

inline std::string_view to_string(ParseIssue::Kind kind) {
    switch (kind) {
        case ParseIssue::Kind::missing: return "missing";
        case ParseIssue::Kind::unknown_id: return "unknown_id";
        case ParseIssue::Kind::duplicate_id: return "duplicate_id";
        case ParseIssue::Kind::unparseable_label: return "unparseable_label";
        case ParseIssue::Kind::malformed_line: return "malformed_line";
    }
    return "malformed_line";
}

struct ParseResult {
    std::vector<Verdict> verdicts;  // batch order
    std::vector<ParseIssue> issues;
};

// Parses an `id,label` csv reply. Header lines, blank lines and code fences are skipped.
// The first parseable line for an id wins; posts never mentioned are reported missing.
inline ParseResult parse_response(std::string_view text, const Batch& batch, const std::string& backend_id) {
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < batch.posts.size(); ++i) position.emplace(batch.posts[i].id, i);

    std::vector<std::optional<Verdict>> found(batch.posts.size());
    std::vector<bool> mentioned(batch.posts.size(), false);
    ParseResult result;

    std::istringstream lines{std::string(text)};
    std::string raw_line;
    while (std::getline(lines, raw_line)) {
        const std::string line(trim(raw_line));
        if (line.empty() || line.rfind("```", 0) == 0) continue;

        std::istringstream one(line);
        csv::Row fields;
        try {
            fields = csv::Reader(one).next().value_or(csv::Row{});
        } catch (const DataError&) {
            fields.clear();
        }
        if (fields.size() < 2) {
            result.issues.push_back({ParseIssue::Kind::malformed_line, "", line});
            continue;
        }
        const std::string id(trim(fields[0]));
        const std::string label_text(trim(fields[1]));
        if (ascii_lower(id) == "id" && ascii_lower(label_text) == "label") continue;

        auto it = position.find(id);
        if (it == position.end()) {
            result.issues.push_back({ParseIssue::Kind::unknown_id, id, line});
            continue;
        }
        const std::size_t idx = it->second;
        mentioned[idx] = true;
        if (found[idx]) {
            result.issues.push_back({ParseIssue::Kind::duplicate_id, id, line});
            continue;
        }
        auto label = parse_label(label_text);
        if (!label) {
            result.issues.push_back({ParseIssue::Kind::unparseable_label, id, line});
            continue;
        }
        found[idx] = Verdict{id, backend_id, *label, line};
    }

    for (std::size_t i = 0; i < batch.posts.size(); ++i) {
        if (found[i]) {
            result.verdicts.push_back(std::move(*found[i]));
        } else if (!mentioned[i]) {
            result.issues.push_back({ParseIssue::Kind::missing, batch.posts[i].id, ""});
        }
    }
    return result;
}

inline std::string describe_batch(const Batch& batch) {
    std::string out = "topic '" + batch.topic.name + "' (" + std::to_string(batch.posts.size()) + " posts";
    if (!batch.posts.empty()) out += ", " + batch.posts.front().id + " .. " + batch.posts.back().id;
    return out + ")";
}

class Backend {
public:
    explicit Backend(BackendProfile profile) : profile_(std::move(profile)) {}
    virtual ~Backend() = default;
    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    const BackendProfile& profile() const noexcept { return profile_; }
    const std::string& id() const noexcept { return profile_.backend_id; }

    // At most one verdict per batch post. Throws TransportError (retryable) or BackendError.
    virtual ParseResult classify_batch(const std::string& prompt, const Batch& batch) = 0;

private:
    BackendProfile profile_;
};

// Replays labels from a `backend_id,post_id,label` fixture table. Labels go through the
// same reply parser as remote output, so fixtures can also script malformed replies.
class ScriptedBackend : public Backend {
public:
    ScriptedBackend(BackendProfile profile, std::unordered_map<std::string, std::string> table)
        : Backend(std::move(profile)), table_(std::move(table)) {}

    static std::unordered_map<std::string, std::string> load_table(const std::filesystem::path& path,
                                                                   const std::string& backend_id) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw BackendError(backend_id, "cannot open fixture '" + path.string() + "'");
        csv::Reader reader(in);
        auto header_row = reader.next();
        if (!header_row) return {};
        const csv::Header header(*header_row);
        const auto b = header.require("backend_id"), p = header.require("post_id"), l = header.require("label");
        std::unordered_map<std::string, std::string> table;
        std::size_t row = 0;
        while (auto fields = reader.next()) {
            ++row;
            if (fields->size() <= std::max({b, p, l})) throw DataError("short fixture row", row);
            if ((*fields)[b] == backend_id) table.emplace((*fields)[p], (*fields)[l]);
        }
        return table;
    }

    ParseResult classify_batch(const std::string& /*prompt*/, const Batch& batch) override {
        std::string reply = "id,label\n";
        for (const auto& post : batch.posts) {
            auto it = table_.find(post.id);
            if (it == table_.end()) {
                throw BackendError(id(), "fixture has no entry for post '" + post.id + "' in " + describe_batch(batch));
            }
            reply += csv::escape(post.id) + "," + csv::escape(it->second) + "\n";
        }
        return parse_response(reply, batch, id());
    }

private:
    std::unordered_map<std::string, std::string> table_;
};

// Emits the gold label with probability 1 - e(gold) and otherwise one of the two wrong
// labels uniformly. Each (seed, post_id) pair drives its own random stream.
class NoiseSimBackend : public Backend {
public:
    explicit NoiseSimBackend(BackendProfile profile) : Backend(std::move(profile)) {}

    static SentimentLabel corrupt(SentimentLabel gold, double error_rate, SplitMix64& rng) {
        if (rng.uniform() >= error_rate) return gold;
        const int shift = rng.uniform() < 0.5 ? 1 : 2;
        return static_cast<SentimentLabel>((static_cast<int>(gold) + shift) % 3);
    }

    ParseResult classify_batch(const std::string& /*prompt*/, const Batch& batch) override {
        ParseResult result;
        for (const auto& post : batch.posts) {
            if (!post.gold_label) {
                throw BackendError(id(), "post '" + post.id + "' has no gold label in " + describe_batch(batch));
            }
            auto rng = keyed_stream(profile().seed, post.id);
            const auto label = corrupt(*post.gold_label, profile().error_rates[index_of(*post.gold_label)], rng);
            result.verdicts.push_back({post.id, id(), label, post.id + "," + std::string(to_string(label))});
        }
        return result;
    }
};

// Serializes requests to one endpoint with a minimum spacing.
class RateGate {
public:
    explicit RateGate(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}

    void wait() {
        if (min_interval_.count() <= 0) return;
        std::unique_lock lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        if (last_ && now < *last_ + min_interval_) std::this_thread::sleep_until(*last_ + min_interval_);
        last_ = std::chrono::steady_clock::now();
    }

private:
    std::chrono::milliseconds min_interval_;
    std::mutex mutex_;
    std::optional<std::chrono::steady_clock::time_point> last_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{1000};
    double multiplier = 2.0;
    bool split_on_parse_failure = true;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

struct BatchFailure {
    std::string backend_id;
    std::string batch;  // describe_batch() of the failed (sub)batch
    std::vector<std::string> post_ids;
    int attempts = 0;
    std::string reason;
};

struct RetryOutcome {
    std::vector<Verdict> verdicts;       // batch order
    std::vector<std::string> absent;     // posts without a verdict
    std::vector<BatchFailure> failures;
    std::vector<ParseIssue> issues;
    int requests = 0;

    bool complete() const noexcept { return absent.empty(); }
};

namespace detail {

class RetryRunner {
public:
    RetryRunner(Backend& backend, const PromptTemplate& tpl, const RetryPolicy& policy, Sleeper sleep)
        : backend_(backend), tpl_(tpl), policy_(policy), sleep_(std::move(sleep)) {}

    void resolve(Batch batch) {
        std::string reason;
        bool transport_failure = false;
        for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
            if (attempt > 1) sleep_(backoff(attempt - 1));
            ParseResult reply;
            try {
                ++out.requests;
                reply = backend_.classify_batch(build_prompt(tpl_, batch.topic, batch), batch);
            } catch (const TransportError& e) {
                transport_failure = true;
                reason = e.what();
                continue;
            } catch (const BackendError& e) {
                fail(batch, attempt, e.what());
                return;
            }
            transport_failure = false;
            out.issues.insert(out.issues.end(), reply.issues.begin(), reply.issues.end());

            std::unordered_set<std::string> resolved;
            for (auto& v : reply.verdicts) {
                if (!in_batch(batch, v.post_id) || !resolved.insert(v.post_id).second) continue;
                accepted_.emplace(v.post_id, std::move(v));
            }
            Batch rest{batch.topic, {}, 0};
            for (const auto& p : batch.posts) {
                if (!resolved.count(p.id)) rest.posts.push_back(p);
            }
            if (rest.posts.empty()) return;
            if (rest.posts.size() * 2 < batch.posts.size()) {
                // Mostly fine: ask again for the leftovers only.
                resolve(std::move(rest));
                return;
            }
            reason = std::to_string(rest.posts.size()) + " of " + std::to_string(batch.posts.size()) +
                     " posts unparseable";
            batch = std::move(rest);
        }

        if (!transport_failure && policy_.split_on_parse_failure && batch.posts.size() > 1) {
            const auto half = batch.posts.size() / 2;
            Batch left{batch.topic, {batch.posts.begin(), batch.posts.begin() + static_cast<std::ptrdiff_t>(half)}, 0};
            Batch right{batch.topic, {batch.posts.begin() + static_cast<std::ptrdiff_t>(half), batch.posts.end()}, 0};
            resolve(std::move(left));
            resolve(std::move(right));
            return;
        }
        fail(batch, policy_.max_attempts, reason);
    }

    RetryOutcome finish(const Batch& original) {
        for (const auto& p : original.posts) {
            auto it = accepted_.find(p.id);
            if (it != accepted_.end()) {
                out.verdicts.push_back(std::move(it->second));
            } else {
                out.absent.push_back(p.id);
            }
        }
        return std::move(out);
    }

    RetryOutcome out;

private:
    std::chrono::milliseconds backoff(int retry) const {
        double ms = static_cast<double>(policy_.base_delay.count());
        for (int i = 1; i < retry; ++i) ms *= policy_.multiplier;
        return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
    }

    static bool in_batch(const Batch& batch, const std::string& id) {
        for (const auto& p : batch.posts) {
            if (p.id == id) return true;
        }
        return false;
    }

    void fail(const Batch& batch, int attempts, std::string reason) {
        BatchFailure f{backend_.id(), describe_batch(batch), {}, attempts, std::move(reason)};
        for (const auto& p : batch.posts) f.post_ids.push_back(p.id);
        out.failures.push_back(std::move(f));
    }

    Backend& backend_;
    const PromptTemplate& tpl_;
    const RetryPolicy& policy_;
    Sleeper sleep_;
    std::unordered_map<std::string, Verdict> accepted_;
};

}  // namespace detail

// Retries transport failures and mostly-unparseable replies with exponential backoff, then
// halves batches that keep failing to parse down to single posts. Whatever is still
// unresolved is reported absent rather than given a default label.
inline RetryOutcome run_with_retry(Backend& backend, const PromptTemplate& tpl, const Batch& batch,
                                   const RetryPolicy& policy, Sleeper sleep = real_sleeper()) {
    if (policy.max_attempts < 1) throw DataError("retry policy needs max_attempts >= 1");
    detail::RetryRunner runner(backend, tpl, policy, std::move(sleep));
    if (!batch.posts.empty()) runner.resolve(batch);
    return runner.finish(batch);
}

// Verdict store: csv or jsonl with fields post_id, backend_id, label.
inline void write_verdicts(std::ostream& out, const std::vector<Verdict>& verdicts, CorpusFormat format,
                           bool header = true) {
    if (format == CorpusFormat::csv) {
        if (header) out << "post_id,backend_id,label\n";
        for (const auto& v : verdicts) {
            out << csv::join({v.post_id, v.backend_id, std::string(to_string(v.label))}) << '\n';
        }
        return;
    }
    for (const auto& v : verdicts) {
        nlohmann::ordered_json j;
        j["post_id"] = v.post_id;
        j["backend_id"] = v.backend_id;
        j["label"] = std::string(to_string(v.label));
        out << j.dump() << '\n';
    }
}

inline std::vector<Verdict> read_verdicts(std::istream& in, CorpusFormat format) {
    std::vector<Verdict> out;
    auto make = [&](std::string post, std::string backend, const std::string& label, std::size_t row) {
        auto parsed = parse_label(label);
        if (!parsed) throw DataError("unknown label '" + label + "'", row);
        out.push_back({std::move(post), std::move(backend), *parsed, std::nullopt});
    };
    if (format == CorpusFormat::csv) {
        csv::Reader reader(in, true);
        auto header_row = reader.next();
        if (!header_row) return out;
        const csv::Header header(*header_row);
        const auto p = header.require("post_id"), b = header.require("backend_id"), l = header.require("label");
        std::size_t row = 0;
        while (auto fields = reader.next()) {
            ++row;
            if (fields->size() <= std::max({p, b, l})) throw DataError("short verdict row", row);
            make((*fields)[p], (*fields)[b], (*fields)[l], row);
        }
        return out;
    }
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            make(j.at("post_id").get<std::string>(), j.at("backend_id").get<std::string>(),
                 j.at("label").get<std::string>(), row);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("bad verdict record: ") + e.what(), row);
        }
    }
    return out;
}

}  // namespace sentifuse
