// Command-line front end: discover / evaluate / stats / label / gen.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowdisco/pipeline.hpp"

namespace {

using namespace flowdisco;

CorpusFormat parse_format(const std::string& f) {
    if (f == "auto") return CorpusFormat::Auto;
    if (f == "multiwoz") return CorpusFormat::MultiWoz;
    if (f == "jsonl") return CorpusFormat::Jsonl;
    throw Error("unknown corpus format '" + f + "' (expected auto, multiwoz or jsonl)");
}

ProviderKind parse_provider_kind(const std::string& k) {
    if (k == "hashing") return ProviderKind::Hashing;
    if (k == "precomputed") return ProviderKind::Precomputed;
    if (k == "http") return ProviderKind::Http;
    throw Error("unknown provider '" + k + "' (expected hashing, precomputed or http)");
}

void check_provider(const ProviderSpec& spec) {
    if (spec.kind == ProviderKind::Precomputed && spec.path.empty())
        throw Error("provider 'precomputed' requires --provider-path");
    if (spec.kind == ProviderKind::Http && spec.url.empty())
        throw Error("provider 'http' requires --provider-url");
}

struct ProviderFlags {
    std::string kind;
    std::optional<std::size_t> dim;
    std::string path;
    std::string url;

    void attach(CLI::App* cmd) {
        cmd->add_option("--provider", kind, "Embedding provider: hashing, precomputed or http");
        cmd->add_option("--dim", dim, "Embedding dimension (hashing/http)");
        cmd->add_option("--provider-path", path, "Precomputed embedding store (JSONL)");
        cmd->add_option("--provider-url", url, "Embedding service base URL");
    }

    void apply(ProviderSpec& spec) const {
        if (!kind.empty()) spec.kind = parse_provider_kind(kind);
        if (dim) spec.dim = *dim;
        if (!path.empty()) spec.path = path;
        if (!url.empty()) spec.url = url;
        check_provider(spec);
    }
};

struct LabelerFlags {
    std::optional<int> ngram_min, ngram_max, max_label_tokens;
    bool keep_stopwords = false;
    std::string stopword_file;

    void attach(CLI::App* cmd) {
        cmd->add_option("--ngram-min", ngram_min, "Smallest n-gram length for cluster labels");
        cmd->add_option("--ngram-max", ngram_max, "Largest n-gram length for cluster labels");
        cmd->add_option("--max-label-tokens", max_label_tokens, "Token cap for labels");
        cmd->add_flag("--keep-stopwords", keep_stopwords,
                      "Allow labels that begin/end with a stopword");
        cmd->add_option("--stopwords", stopword_file, "Stopword list file (one word per line)");
    }

    void apply(LabelerConfig& labeler) const {
        if (ngram_min) labeler.ngram_min = *ngram_min;
        if (ngram_max) labeler.ngram_max = *ngram_max;
        if (max_label_tokens) labeler.max_label_tokens = *max_label_tokens;
        if (keep_stopwords) labeler.stopword_policy = StopwordPolicy::KeepAll;
        if (!stopword_file.empty()) labeler.stopword_file = stopword_file;
    }
};

std::string format_stats_table(const std::vector<ThetaStats>& rows) {
    std::ostringstream out;
    out << "theta    |C|    |T|    SOD->EOD\n";
    for (const auto& row : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-8s %-6zu %-6zu %s\n", theta_tag(row.theta).c_str(),
                      row.stats.state_count, row.stats.transition_count,
                      row.stats.has_sod_eod_path ? "yes" : "no");
        out << line;
    }
    return out.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised discovery of dialogue flows from conversation history"};
    app.require_subcommand(1);

    // A config file provides defaults; explicit flags win.
    PipelineConfig config;
    std::string config_path;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    if (!config_path.empty()) {
        try {
            config = config_from_json(nlohmann::json::parse(read_text_file(config_path)));
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }

    std::string config_flag; // consumed by the pre-scan above
    app.add_option("--config", config_flag, "JSON config file with defaults")
        ->expected(1);

    // discover
    auto* discover = app.add_subcommand("discover", "Discover a flow from a training corpus");
    discover->add_option("--config", config_flag, "JSON config file with defaults");
    std::string format_flag;
    ProviderFlags provider_flags;
    LabelerFlags labeler_flags;
    std::optional<int> k_user, k_system, k_min, k_max, max_iter, n_init;
    std::optional<std::uint64_t> seed_flag;
    std::optional<std::size_t> sample_cap;
    std::vector<double> thetas;
    std::string train_path, out_dir;
    discover->add_option("--train", train_path, "Training corpus (MultiWOZ JSON or JSONL)");
    discover->add_option("--format", format_flag, "Corpus format: auto, multiwoz or jsonl");
    provider_flags.attach(discover);
    discover->add_option("--k-user", k_user, "Fixed cluster count for USER utterances");
    discover->add_option("--k-system", k_system, "Fixed cluster count for SYSTEM utterances");
    discover->add_option("--k-min", k_min, "Smallest k for silhouette search");
    discover->add_option("--k-max", k_max, "Largest k for silhouette search");
    discover->add_option("--sample-cap", sample_cap,
                         "Silhouette sample size (0 disables sampling)");
    discover->add_option("--seed", seed_flag, "Master random seed");
    discover->add_option("--theta", thetas, "Threshold(s) for pruned flow exports");
    discover->add_option("--max-iter", max_iter, "k-means iteration cap");
    discover->add_option("--n-init", n_init, "k-means restarts");
    labeler_flags.attach(discover);
    discover->add_option("--out", out_dir, "Output directory");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Transition accuracy on a held-out corpus");
    evaluate->add_option("--config", config_flag, "JSON config file with defaults");
    std::string eval_flow, eval_test, eval_format, eval_user_model, eval_system_model, eval_log,
        eval_out;
    std::vector<double> eval_thetas;
    bool include_sod_eod = false;
    ProviderFlags eval_provider_flags;
    evaluate->add_option("--flow", eval_flow, "Flow JSON to evaluate")->required();
    evaluate->add_option("--test", eval_test, "Held-out corpus");
    evaluate->add_option("--format", eval_format, "Corpus format: auto, multiwoz or jsonl");
    evaluate->add_option("--user-model", eval_user_model, "USER cluster model JSON");
    evaluate->add_option("--system-model", eval_system_model, "SYSTEM cluster model JSON");
    eval_provider_flags.attach(evaluate);
    evaluate->add_option("--theta", eval_thetas, "Threshold(s) applied before evaluating");
    evaluate->add_flag("--include-sod-eod", include_sod_eod,
                       "Also score SOD->first and last->EOD transitions");
    evaluate->add_option("--log", eval_log, "Write the per-transition log CSV here");
    evaluate->add_option("--out", eval_out, "Write the report JSON here (stdout otherwise)");

    // stats
    auto* stats = app.add_subcommand("stats", "Graph size and SOD->EOD reachability per theta");
    std::string stats_flow;
    std::vector<double> stats_thetas;
    bool stats_json = false;
    stats->add_option("--flow", stats_flow, "Flow JSON")->required();
    stats->add_option("--theta", stats_thetas, "Threshold(s) to report (default: as stored)");
    stats->add_flag("--json", stats_json, "Emit JSON instead of a table");

    // label
    auto* label = app.add_subcommand("label", "Relabel an existing flow JSON");
    label->add_option("--config", config_flag, "JSON config file with defaults");
    std::string label_flow, label_corpus, label_format, label_user_model, label_system_model,
        label_out;
    ProviderFlags label_provider_flags;
    LabelerFlags label_labeler_flags;
    label->add_option("--flow", label_flow, "Flow JSON to relabel")->required();
    label->add_option("--corpus", label_corpus, "Corpus the flow was discovered from");
    label->add_option("--format", label_format, "Corpus format: auto, multiwoz or jsonl");
    label->add_option("--user-model", label_user_model, "USER cluster model JSON");
    label->add_option("--system-model", label_system_model, "SYSTEM cluster model JSON");
    label_provider_flags.attach(label);
    label_labeler_flags.attach(label);
    label->add_option("--out", label_out, "Output flow JSON path")->required();

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus from a ground-truth flow");
    std::string gen_spec, gen_out, gen_states_out;
    int gen_n = 100, gen_max_turns = 40;
    double gen_noise = 0.0;
    std::optional<std::uint64_t> gen_seed;
    gen->add_option("--flow-spec", gen_spec, "Ground-truth flow JSON")->required();
    gen->add_option("--n", gen_n, "Number of dialogues");
    gen->add_option("--max-turns", gen_max_turns, "Per-dialogue turn cap");
    gen->add_option("--noise", gen_noise, "Vocabulary noise probability in [0, 1]");
    gen->add_option("--seed", gen_seed, "Seed override (defaults to the spec's seed)");
    gen->add_option("--out", gen_out, "Output corpus JSONL")->required();
    gen->add_option("--states-out", gen_states_out, "Sidecar JSONL with ground-truth states");

    CLI11_PARSE(app, argc, argv);

    try {
        if (discover->parsed()) {
            if (!train_path.empty()) config.train_corpus = train_path;
            if (!format_flag.empty()) config.format = parse_format(format_flag);
            provider_flags.apply(config.provider);
            if (k_user) config.k_user = k_user;
            if (k_system) config.k_system = k_system;
            if (k_min) config.k_min = *k_min;
            if (k_max) config.k_max = *k_max;
            if (sample_cap) config.sample_cap = *sample_cap == 0 ? std::nullopt : sample_cap;
            if (seed_flag) config.seed = *seed_flag;
            if (!thetas.empty()) config.thetas = thetas;
            if (max_iter) config.max_iter = *max_iter;
            if (n_init) config.n_init = *n_init;
            labeler_flags.apply(config.labeler);
            if (!out_dir.empty()) config.output_dir = out_dir;

            const DiscoverResult result = run_discover(config);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            if (result.user_report)
                std::cout << "USER best_k: " << result.user_report->best_k << "\n";
            if (result.system_report)
                std::cout << "SYSTEM best_k: " << result.system_report->best_k << "\n";
            for (const auto& path : result.artifacts) std::cout << path.string() << "\n";
        } else if (evaluate->parsed()) {
            eval_provider_flags.apply(config.provider);
            if (eval_test.empty()) eval_test = config.test_corpus;
            if (eval_test.empty()) throw Error("evaluate: no test corpus given (--test)");
            if (eval_user_model.empty() || eval_system_model.empty())
                throw Error("evaluate: --user-model and --system-model are required");
            const CorpusFormat format =
                eval_format.empty() ? config.format : parse_format(eval_format);
            const bool keep_log = !eval_log.empty();
            const auto reports =
                run_evaluate(eval_flow, eval_test, format, eval_user_model, eval_system_model,
                             config.provider, eval_thetas, include_sod_eod, keep_log);
            nlohmann::json out = nlohmann::json::array();
            for (const auto& r : reports) out.push_back(report_to_json(r));
            const std::string text =
                (reports.size() == 1 ? out[0].dump(2) : out.dump(2)) + "\n";
            std::cout << text;
            if (!eval_out.empty()) write_text_file(eval_out, text);
            if (keep_log) {
                for (const auto& r : reports) {
                    std::filesystem::path path = eval_log;
                    if (reports.size() > 1) {
                        path = path.parent_path() /
                               (path.stem().string() + "_theta_" + theta_tag(r.theta) +
                                path.extension().string());
                    }
                    write_text_file(path, log_to_csv(r));
                }
            }
        } else if (stats->parsed()) {
            const auto rows = run_stats(stats_flow, stats_thetas);
            if (stats_json) {
                nlohmann::json out = nlohmann::json::array();
                for (const auto& row : rows)
                    out.push_back({{"theta", row.theta},
                                   {"state_count", row.stats.state_count},
                                   {"transition_count", row.stats.transition_count},
                                   {"has_sod_eod_path", row.stats.has_sod_eod_path}});
                std::cout << out.dump(2) << "\n";
            } else {
                std::cout << format_stats_table(rows);
            }
        } else if (label->parsed()) {
            label_provider_flags.apply(config.provider);
            label_labeler_flags.apply(config.labeler);
            if (label_corpus.empty()) label_corpus = config.train_corpus;
            if (label_corpus.empty()) throw Error("label: no corpus given (--corpus)");
            if (label_user_model.empty() || label_system_model.empty())
                throw Error("label: --user-model and --system-model are required");
            const CorpusFormat format =
                label_format.empty() ? config.format : parse_format(label_format);
            run_label(label_flow, label_corpus, format, label_user_model, label_system_model,
                      config.provider, config.labeler, label_out);
            std::cout << label_out << "\n";
        } else if (gen->parsed()) {
            const SynthGeneration g =
                run_gen(gen_spec, gen_n, gen_max_turns, gen_noise, gen_seed, gen_out,
                        gen_states_out.empty()
                            ? std::nullopt
                            : std::optional<std::filesystem::path>(gen_states_out));
            std::cout << gen_out << " (" << g.corpus.dialogues.size() << " dialogues, "
                      << g.corpus.total_utterances() << " utterances)\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
