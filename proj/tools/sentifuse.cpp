// sentifuse: ingest -> classify -> fuse -> score -> evaluate -> report, plus simulate.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 backend failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include <sentifuse/backend_factory.hpp>
#include <sentifuse/sentifuse.hpp>

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kBackendFailure = 3;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string corpus;
    std::string format;
    std::string backends;
    std::string template_path;
    std::optional<int> parallelism;
    std::optional<int> quorum;
    std::string tie_policy;
    std::string neutral_weight;
    bool count_weighted = false;
    bool plot_data = false;
};

sentifuse::RunConfig make_config(const Overrides& o) {
    sentifuse::RunConfig c = o.config.empty() ? sentifuse::RunConfig{} : sentifuse::load_run_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.out = o.out;
    if (!o.corpus.empty()) c.corpus = o.corpus;
    if (!o.format.empty()) c.corpus_format = o.format == "csv" ? sentifuse::CorpusFormat::csv : sentifuse::CorpusFormat::jsonl;
    if (!o.backends.empty()) c.backends = o.backends;
    if (!o.template_path.empty()) c.template_path = o.template_path;
    if (o.parallelism) c.parallelism = *o.parallelism;
    if (o.quorum) c.quorum = *o.quorum;
    if (!o.tie_policy.empty()) c.tie_policy = sentifuse::parse_tie_policy(o.tie_policy);
    if (!o.neutral_weight.empty()) c.neutral_weight = sentifuse::detail::parse_rational(nlohmann::json(o.neutral_weight));
    if (o.count_weighted) c.count_weighted_language_mean = true;
    if (o.plot_data) c.plot_data = true;
    return c;
}

void print_classify_summary(const sentifuse::ClassifySummary& s) {
    for (const auto& b : s.backends) {
        std::cout << b.backend_id << ": " << b.classified << " classified, " << b.skipped << " already done, "
                  << b.absent << " absent, " << b.requests << " requests\n";
        for (const auto& f : b.failures) {
            std::cerr << "  failed " << f.batch << " after " << f.attempts << " attempt(s): " << f.reason << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-backend zero-shot sentiment classification, fusion, scoring and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("--config", o.config, "Run configuration (json)")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "Random seed for simulated backends and simulations");
    app.add_option("--out", o.out, "Output directory for staged artifacts");

    auto* ingest = app.add_subcommand("ingest", "Load, normalize and stage a corpus; write corpus statistics");
    ingest->add_option("--corpus", o.corpus, "Corpus file (.csv or .jsonl)");
    ingest->add_option("--format", o.format, "Corpus format")->check(CLI::IsMember({"csv", "jsonl"}));

    auto* classify = app.add_subcommand("classify", "Classify staged posts with every enabled backend (resumable)");
    classify->add_option("--backends", o.backends, "Backend registry (json)");
    classify->add_option("--template", o.template_path, "Prompt template file");
    classify->add_option("--parallelism", o.parallelism, "Concurrent batch requests")->check(CLI::PositiveNumber);

    auto* fuse = app.add_subcommand("fuse", "Majority-vote fusion of the verdict store");
    fuse->add_option("--backends", o.backends, "Backend registry (json)");
    fuse->add_option("--quorum", o.quorum, "Minimum verdicts per post")->check(CLI::PositiveNumber);
    fuse->add_option("--tie-policy", o.tie_policy, "neutral | backend_priority")
        ->check(CLI::IsMember({"neutral", "backend_priority"}));

    auto* score = app.add_subcommand("score", "Overall sentiment scores, distributions and need-for-action ranking");
    score->add_flag("--plot-data", o.plot_data, "Also write stacked-bar and grouped-bar plot csvs");
    score->add_option("--neutral-weight", o.neutral_weight, "Weight of neutral posts in the denominator (e.g. 1, 1/2)");
    score->add_flag("--count-weighted", o.count_weighted, "Weight language means by topic post counts");

    auto* evaluate = app.add_subcommand("evaluate", "Error rates, F1, correlations and t-tests against gold labels");
    evaluate->add_option("--backends", o.backends, "Backend registry (json)");

    auto* report = app.add_subcommand("report", "Render evaluation tables as text and csv");

    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo study of fusion gain vs. backend error correlation");
    sentifuse::SimulationConfig sim;
    std::vector<double> correlations{0.0};
    std::vector<double> prior;
    int runs = 1;
    std::string sim_out;
    simulate->add_option("--n-posts", sim.n_posts, "Posts per run")->check(CLI::PositiveNumber);
    simulate->add_option("--error-rates", sim.error_rates, "Backend error rates, comma separated")
        ->delimiter(',')
        ->required();
    simulate->add_option("--correlation", correlations, "Shared-error probabilities to sweep, comma separated")
        ->delimiter(',');
    simulate->add_option("--prior", prior, "Class prior negative,neutral,positive")->delimiter(',')->expected(3);
    simulate->add_option("--runs", runs, "Seeds per correlation value (seed, seed+1, ...)")->check(CLI::PositiveNumber);
    simulate->add_option("--quorum", sim.quorum, "Fusion quorum")->check(CLI::PositiveNumber);
    simulate->add_option("--output", sim_out, "Result csv (default <out>/simulation.csv, '-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        auto config = make_config(o);
        if (*ingest) {
            const auto stats = sentifuse::cmd_ingest(config);
            std::cout << "staged " << stats.total << " posts in " << (config.out / sentifuse::artifacts::kCorpus).string()
                      << '\n';
        } else if (*classify) {
            const auto summary = sentifuse::cmd_classify(config, sentifuse::make_backend);
            print_classify_summary(summary);
            if (summary.any_failure()) return kBackendFailure;
        } else if (*fuse) {
            const auto fused = sentifuse::cmd_fuse(config);
            std::size_t ties = 0, below = 0;
            for (const auto& f : fused) {
                ties += f.tie_broken;
                below += !f.quorum_met;
            }
            std::cout << "fused " << fused.size() << " posts (" << ties << " ties, " << below << " below quorum)\n";
        } else if (*score) {
            const auto a = sentifuse::cmd_score(config);
            for (const auto& r : a.ranking) std::cout << sentifuse::format_fixed(r.value, 2) << "  " << r.key.str() << '\n';
        } else if (*evaluate) {
            const auto r = sentifuse::cmd_evaluate(config);
            std::cout << "wrote " << (config.out / sentifuse::artifacts::kEvaluation).string() << '\n';
            if (!r.incomputable().empty()) {
                std::cerr << r.incomputable().size() << " cell(s) could not be computed\n";
                return kDataError;
            }
        } else if (*report) {
            const auto missing = sentifuse::cmd_report(config);
            std::cout << sentifuse::read_file(config.out / sentifuse::artifacts::kReportText);
            if (!missing.empty()) {
                for (const auto& m : missing) std::cerr << "incomputable: " << m << '\n';
                return kDataError;
            }
        } else if (*simulate) {
            if (!prior.empty()) std::copy(prior.begin(), prior.end(), sim.prior.begin());
            std::ofstream file;
            std::ostream* out = &std::cout;
            if (sim_out != "-") {
                const auto path = sim_out.empty() ? config.out / "simulation.csv" : std::filesystem::path(sim_out);
                if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
                file.open(path, std::ios::binary | std::ios::trunc);
                if (!file) throw sentifuse::DataError("cannot write '" + path.string() + "'");
                out = &file;
            }
            sentifuse::write_simulation_header(*out);
            for (double c : correlations) {
                for (int run = 0; run < runs; ++run) {
                    sim.correlation = c;
                    sim.seed = config.seed + static_cast<std::uint64_t>(run);
                    sentifuse::write_simulation_row(*out, sim, sentifuse::run_simulation(sim));
                }
            }
        }
    } catch (const sentifuse::BackendError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return kBackendFailure;
    } catch (const sentifuse::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return 0;
}
