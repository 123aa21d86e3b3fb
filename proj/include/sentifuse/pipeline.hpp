#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "backends.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "fusion.hpp"
#include "prompting.hpp"
#include "provenance.hpp"
#include "random.hpp"
#include "report.hpp"
#include "scoring.hpp"

namespace sentifuse {

// Staged artifact names inside the output directory.
namespace artifacts {
inline constexpr const char* kCorpus = "corpus.jsonl";
inline constexpr const char* kCorpusStats = "corpus_stats.json";
inline constexpr const char* kVerdictDir = "verdicts";
inline constexpr const char* kClassifyManifest = "classify_manifest.json";
inline constexpr const char* kFused = "fused.csv";
inline constexpr const char* kScoresCsv = "scores.csv";
inline constexpr const char* kScoresJson = "scores.json";
inline constexpr const char* kDistributionCsv = "distribution.csv";
inline constexpr const char* kDistributionJson = "distribution.json";
inline constexpr const char* kRanking = "ranking.csv";
inline constexpr const char* kPlotTopics = "plot_topic_distribution.csv";
inline constexpr const char* kPlotLanguages = "plot_language_scores.csv";
inline constexpr const char* kEvaluation = "evaluation.json";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportErrors = "report_errors.csv";
inline constexpr const char* kReportF1 = "report_f1.csv";
}  // namespace artifacts

namespace detail {

inline fs::path require_upstream(const RunConfig& config, const fs::path& name, const char* producer) {
    const fs::path p = config.out / name;
    if (!fs::exists(p)) {
        throw DataError("missing " + p.string() + "; run `sentifuse " + producer + "` first");
    }
    return p;
}

inline std::ofstream open_output(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

inline std::string file_safe(const std::string& id) {
    std::string out;
    for (char c : id) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' ? c : '_');
    }
    return out;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::vector<Post> read_staged_corpus(const RunConfig& config, const char* needed_by = "ingest") {
    const auto path = require_upstream(config, artifacts::kCorpus, needed_by);
    return load_corpus(path, CorpusFormat::jsonl, config.schema);
}

inline std::vector<std::string> backend_ids(const std::vector<BackendProfile>& profiles) {
    std::vector<std::string> ids;
    for (const auto& p : profiles) ids.push_back(p.backend_id);
    return ids;
}

}  // namespace detail

inline fs::path verdict_path(const RunConfig& config, const std::string& backend_id) {
    return config.out / artifacts::kVerdictDir / (detail::file_safe(backend_id) + ".csv");
}

inline PromptTemplate run_template(const RunConfig& config) {
    return config.template_path.empty() ? PromptTemplate{} : load_template(config.template_path);
}

// ---- ingest ---------------------------------------------------------------------------

inline CorpusStats cmd_ingest(const RunConfig& config) {
    if (config.corpus.empty()) throw DataError("no corpus configured (set \"corpus\" in the config)");
    const auto format = config.corpus_format.value_or(format_from_path(config.corpus));
    const auto posts = load_corpus(config.corpus, format, config.schema);
    {
        auto out = detail::open_output(config.out / artifacts::kCorpus);
        write_corpus(out, posts, CorpusFormat::jsonl);
    }
    const auto stats = corpus_stats(posts);
    Provenance prov;
    prov.add(config.corpus);
    nlohmann::ordered_json j;
    j["provenance"] = prov.to_json();
    j["stats"] = to_json(stats);
    detail::write_json(config.out / artifacts::kCorpusStats, j);
    return stats;
}

// ---- classify -------------------------------------------------------------------------

struct BackendRunSummary {
    std::string backend_id;
    std::size_t skipped = 0;  // already classified in an earlier run
    std::size_t classified = 0;
    std::size_t absent = 0;
    int requests = 0;
    std::vector<BatchFailure> failures;
};

struct ClassifySummary {
    std::vector<BackendRunSummary> backends;
    bool any_failure() const {
        for (const auto& b : backends) {
            if (!b.failures.empty()) return true;
        }
        return false;
    }
};

using BackendFactory = std::function<std::unique_ptr<Backend>(const BackendProfile&)>;

// Classifies every staged post with every enabled backend. Verdicts already on disk are
// kept and their posts skipped, so an interrupted run resumes where it stopped. Batches run
// on up to `parallelism` workers; verdict files are rewritten in corpus order at the end.
inline ClassifySummary cmd_classify(const RunConfig& config, const BackendFactory& factory,
                                    Sleeper sleep = real_sleeper()) {
    const auto posts = detail::read_staged_corpus(config);
    if (config.backends.empty()) throw DataError("no backend registry configured (set \"backends\" in the config)");
    auto profiles = load_backend_registry(config.backends);
    if (profiles.empty()) throw DataError("backend registry has no enabled backends");
    const auto tpl = run_template(config);
    tpl.validate();

    struct Task {
        std::size_t backend;
        Batch batch;
    };
    std::vector<std::unique_ptr<Backend>> backends;
    std::vector<Task> tasks;
    ClassifySummary summary;
    const std::string started = detail::utc_timestamp();

    for (std::size_t b = 0; b < profiles.size(); ++b) {
        auto profile = profiles[b];
        profile.seed += SplitMix64(config.seed ^ fnv1a64(profile.backend_id)).next();
        backends.push_back(factory(profile));

        BackendRunSummary s{profile.backend_id, 0, 0, 0, 0, {}};
        std::unordered_set<std::string> done;
        const auto path = verdict_path(config, profile.backend_id);
        if (fs::exists(path)) {
            std::ifstream in(path, std::ios::binary);
            for (const auto& v : read_verdicts(in, CorpusFormat::csv)) done.insert(v.post_id);
        }
        for (const auto& topic : config.schema.topics.values()) {
            std::vector<Post> pending;
            for (const auto& p : posts) {
                if (!(p.topic == topic)) continue;
                if (done.count(p.id)) {
                    ++s.skipped;
                } else {
                    pending.push_back(p);
                }
            }
            if (pending.empty()) continue;
            for (auto& batch : pack_batches(pending, tpl, topic, profile.token_budget)) {
                tasks.push_back({b, std::move(batch)});
            }
        }
        summary.backends.push_back(std::move(s));
    }

    std::mutex mutex;
    std::vector<std::ofstream> sinks;
    for (const auto& p : profiles) {
        const auto path = verdict_path(config, p.backend_id);
        const bool fresh = !fs::exists(path);
        fs::create_directories(path.parent_path());
        sinks.emplace_back(path, std::ios::binary | std::ios::app);
        if (!sinks.back()) throw DataError("cannot write '" + path.string() + "'");
        if (fresh) sinks.back() << "post_id,backend_id,label\n" << std::flush;
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& task = tasks[i];
            auto outcome = run_with_retry(*backends[task.backend], tpl, task.batch, config.retry, sleep);
            std::lock_guard lock(mutex);
            write_verdicts(sinks[task.backend], outcome.verdicts, CorpusFormat::csv, false);
            sinks[task.backend].flush();
            auto& s = summary.backends[task.backend];
            s.classified += outcome.verdicts.size();
            s.absent += outcome.absent.size();
            s.requests += outcome.requests;
            for (auto& f : outcome.failures) s.failures.push_back(std::move(f));
        }
    };
    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    sinks.clear();

    // Canonical order: corpus order, first verdict per post wins.
    std::unordered_map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < posts.size(); ++i) order.emplace(posts[i].id, i);
    for (const auto& p : profiles) {
        const auto path = verdict_path(config, p.backend_id);
        std::vector<Verdict> verdicts;
        {
            std::ifstream in(path, std::ios::binary);
            verdicts = read_verdicts(in, CorpusFormat::csv);
        }
        std::vector<std::optional<Verdict>> slot(posts.size());
        for (auto& v : verdicts) {
            auto it = order.find(v.post_id);
            if (it != order.end() && !slot[it->second]) slot[it->second] = std::move(v);
        }
        verdicts.clear();
        for (auto& v : slot) {
            if (v) verdicts.push_back(std::move(*v));
        }
        auto out = detail::open_output(path);
        write_verdicts(out, verdicts, CorpusFormat::csv);
    }

    nlohmann::ordered_json manifest;
    manifest["started_at"] = started;
    manifest["finished_at"] = detail::utc_timestamp();
    manifest["corpus_sha256"] = sha256_file(config.out / artifacts::kCorpus);
    manifest["seed"] = config.seed;
    for (const auto& s : summary.backends) {
        nlohmann::ordered_json b;
        b["backend_id"] = s.backend_id;
        b["requests"] = s.requests;
        b["classified"] = s.classified;
        b["skipped_existing"] = s.skipped;
        b["absent"] = s.absent;
        auto& failures = b["failures"] = nlohmann::ordered_json::array();
        for (const auto& f : s.failures) {
            failures.push_back({{"batch", f.batch}, {"attempts", f.attempts}, {"reason", f.reason}, {"post_ids", f.post_ids}});
        }
        manifest["backends"].push_back(std::move(b));
    }
    detail::write_json(config.out / artifacts::kClassifyManifest, manifest);
    return summary;
}

// ---- fuse -----------------------------------------------------------------------------

inline std::vector<Verdict> read_verdict_store(const RunConfig& config, const std::vector<BackendProfile>& profiles,
                                               Provenance* prov = nullptr) {
    std::vector<Verdict> all;
    for (const auto& p : profiles) {
        const auto path = verdict_path(config, p.backend_id);
        if (!fs::exists(path)) {
            throw DataError("missing verdict file " + path.string() + "; run `sentifuse classify` first");
        }
        std::ifstream in(path, std::ios::binary);
        auto verdicts = read_verdicts(in, CorpusFormat::csv);
        for (auto& v : verdicts) {
            if (v.backend_id != p.backend_id) {
                throw DataError(path.filename().string() + " holds a verdict from '" + v.backend_id + "'");
            }
            all.push_back(std::move(v));
        }
        if (prov) prov->add(path);
    }
    return all;
}

inline std::vector<FusedVerdict> cmd_fuse(const RunConfig& config) {
    const auto posts = detail::read_staged_corpus(config);
    const auto profiles = load_backend_registry(config.backends);
    if (config.quorum > static_cast<int>(profiles.size())) {
        throw DataError("quorum " + std::to_string(config.quorum) + " exceeds the " + std::to_string(profiles.size()) +
                        " enabled backends");
    }
    Provenance prov;
    prov.add(config.out / artifacts::kCorpus);
    const auto verdicts = read_verdict_store(config, profiles, &prov);

    std::vector<std::string> ids;
    for (const auto& p : posts) ids.push_back(p.id);
    const auto matrix = VerdictMatrix::from_verdicts(ids, detail::backend_ids(profiles), verdicts);
    FusionConfig fc;
    fc.quorum = config.quorum;
    fc.tie_policy = config.tie_policy;
    fc.priority = detail::backend_ids(profiles);
    auto fused = fuse_all(matrix, fc);

    auto out = detail::open_output(config.out / artifacts::kFused);
    prov.write_csv_preamble(out);
    write_fused(out, fused);
    return fused;
}

inline std::vector<FusedVerdict> read_staged_fused(const RunConfig& config) {
    const auto path = detail::require_upstream(config, artifacts::kFused, "fuse");
    std::ifstream in(path, std::ios::binary);
    return read_fused(in);
}

// ---- score ----------------------------------------------------------------------------

struct ScoreArtifacts {
    ScoreTable by_cell;   // topic × language, with language means
    ScoreTable by_topic;
    DistributionTable distribution_by_topic;
    std::vector<RankEntry> ranking;  // topics, most negative first
};

inline ScoreArtifacts cmd_score(const RunConfig& config) {
    const auto posts = detail::read_staged_corpus(config);
    const auto fused = read_staged_fused(config);
    Provenance prov;
    prov.add(config.out / artifacts::kCorpus);
    prov.add(config.out / artifacts::kFused);

    ScoreOptions options{config.neutral_weight, config.count_weighted_language_mean};
    ScoreArtifacts a;
    a.by_cell = score_table(fused, posts, GroupBy::topic_language, config.schema, options);
    a.by_topic = score_table(fused, posts, GroupBy::topic, config.schema, options);
    const auto by_language = score_table(fused, posts, GroupBy::language, config.schema, options);
    a.distribution_by_topic = distribution(fused, posts, GroupBy::topic, config.schema);
    a.ranking = need_for_action_ranking(a.by_topic.rows);

    {
        auto out = detail::open_output(config.out / artifacts::kScoresCsv);
        prov.write_csv_preamble(out);
        write_scores_csv(out, a.by_cell);
    }
    {
        nlohmann::ordered_json j;
        j["provenance"] = prov.to_json();
        j["neutral_weight"] = to_fraction_string(config.neutral_weight);
        j["topic_language"] = to_json(a.by_cell);
        j["topic"] = to_json(a.by_topic);
        j["language"] = to_json(by_language);
        nlohmann::ordered_json cell_rank = nlohmann::ordered_json::array();
        for (const auto& r : need_for_action_ranking(a.by_cell.rows)) {
            cell_rank.push_back({{"group", r.key.str()}, {"score", format_fixed(r.value, 2)}});
        }
        j["need_for_action_topic_language"] = cell_rank;
        detail::write_json(config.out / artifacts::kScoresJson, j);
    }
    {
        auto out = detail::open_output(config.out / artifacts::kDistributionCsv);
        prov.write_csv_preamble(out);
        write_distribution_csv(out, a.distribution_by_topic);
    }
    {
        nlohmann::ordered_json j;
        j["provenance"] = prov.to_json();
        j["topic"] = to_json(a.distribution_by_topic);
        j["language"] = to_json(distribution(fused, posts, GroupBy::language, config.schema));
        j["topic_language"] = to_json(distribution(fused, posts, GroupBy::topic_language, config.schema));
        detail::write_json(config.out / artifacts::kDistributionJson, j);
    }
    {
        auto out = detail::open_output(config.out / artifacts::kRanking);
        prov.write_csv_preamble(out);
        write_ranking_csv(out, a.ranking);
    }
    if (config.plot_data) {
        auto topics = detail::open_output(config.out / artifacts::kPlotTopics);
        prov.write_csv_preamble(topics);
        write_topic_plot_csv(topics, a.distribution_by_topic);
        auto languages = detail::open_output(config.out / artifacts::kPlotLanguages);
        prov.write_csv_preamble(languages);
        write_language_plot_csv(languages, a.by_cell, config.schema);
    }
    return a;
}

// ---- evaluate / report ----------------------------------------------------------------

inline EvaluationReport cmd_evaluate(const RunConfig& config) {
    const auto posts = detail::read_staged_corpus(config);
    const bool labeled = std::any_of(posts.begin(), posts.end(), [](const Post& p) { return p.gold_label.has_value(); });
    if (!labeled) {
        throw DataError("the staged corpus has no gold labels; evaluation needs a labeled corpus "
                        "(fill the gold_label column and re-run `sentifuse ingest`)");
    }
    const auto profiles = load_backend_registry(config.backends);
    Provenance prov;
    prov.add(config.out / artifacts::kCorpus);
    const auto verdicts = read_verdict_store(config, profiles, &prov);
    const auto fused = read_staged_fused(config);
    prov.add(config.out / artifacts::kFused);

    auto report = build_report(verdicts, fused, posts, detail::backend_ids(profiles), config.schema);
    nlohmann::ordered_json j;
    j["provenance"] = prov.to_json();
    const auto body = to_json(report);
    for (const auto& [k, v] : body.items()) j[k] = v;
    detail::write_json(config.out / artifacts::kEvaluation, j);
    return report;
}

// Renders the evaluation tables; returns the cells that could not be computed.
inline std::vector<std::string> cmd_report(const RunConfig& config) {
    const auto path = detail::require_upstream(config, artifacts::kEvaluation, "evaluate");
    nlohmann::ordered_json evaluation;
    try {
        evaluation = nlohmann::ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("evaluation.json: ") + e.what());
    }
    Provenance prov;
    prov.add(path);
    {
        auto out = detail::open_output(config.out / artifacts::kReportText);
        out << "inputs: " << prov.to_json().dump() << "\n\n";
        render_report_text(out, evaluation);
    }
    {
        auto out = detail::open_output(config.out / artifacts::kReportErrors);
        prov.write_csv_preamble(out);
        write_error_csv(out, evaluation);
    }
    {
        auto out = detail::open_output(config.out / artifacts::kReportF1);
        prov.write_csv_preamble(out);
        write_f1_csv(out, evaluation);
    }
    return incomputable_cells(evaluation);
}

}  // namespace sentifuse
