#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowdisco/clustering.hpp"
#include "flowdisco/common.hpp"
#include "flowdisco/corpus.hpp"
#include "flowdisco/embedding.hpp"
#include "flowdisco/evaluation.hpp"
#include "flowdisco/flowgraph.hpp"
#include "flowdisco/graph_io.hpp"
#include "flowdisco/http_provider.hpp"
#include "flowdisco/labeling.hpp"
#include "flowdisco/synth.hpp"

namespace flowdisco {

enum class ProviderKind { Hashing, Precomputed, Http };
enum class CorpusFormat { Auto, MultiWoz, Jsonl };

struct ProviderSpec {
    ProviderKind kind = ProviderKind::Hashing;
    std::size_t dim = 384;
    std::string path; // precomputed store
    std::string url;  // http service
};

// Everything a run needs; the resolved form (seed included) is written next
// to the artifacts so a run can be reproduced byte-for-byte.
struct PipelineConfig {
    std::string train_corpus;
    std::string test_corpus;
    CorpusFormat format = CorpusFormat::Auto;
    ProviderSpec provider;
    std::optional<int> k_user;
    std::optional<int> k_system;
    int k_min = 2;
    int k_max = 40;
    std::uint64_t seed = 0;
    std::vector<double> thetas = {0.05, 0.10, 0.15, 0.20};
    std::optional<std::size_t> sample_cap = 10000;
    int max_iter = 1000;
    int n_init = 10;
    LabelerConfig labeler;
    std::string output_dir;
};

// Seed streams hanging off the master seed.
constexpr std::uint64_t kUserSeedStream = 1;
constexpr std::uint64_t kSystemSeedStream = 2;

inline std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec) {
    switch (spec.kind) {
        case ProviderKind::Hashing:
            return std::make_unique<HashingProvider>(spec.dim);
        case ProviderKind::Precomputed:
            return std::make_unique<PrecomputedProvider>(load_precomputed(spec.path));
        case ProviderKind::Http:
            return std::make_unique<HttpProvider>(spec.url, spec.dim);
    }
    throw Error("pipeline: unknown provider kind");
}

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                          std::string tag) {
    if (format == CorpusFormat::Auto)
        format = path.extension() == ".jsonl" ? CorpusFormat::Jsonl : CorpusFormat::MultiWoz;
    return format == CorpusFormat::Jsonl ? load_jsonl(path, std::move(tag))
                                         : load_multiwoz(path, std::move(tag));
}

inline const char* provider_kind_name(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::Hashing: return "hashing";
        case ProviderKind::Precomputed: return "precomputed";
        case ProviderKind::Http: return "http";
    }
    return "";
}

inline const char* corpus_format_name(CorpusFormat f) {
    switch (f) {
        case CorpusFormat::Auto: return "auto";
        case CorpusFormat::MultiWoz: return "multiwoz";
        case CorpusFormat::Jsonl: return "jsonl";
    }
    return "";
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j{
        {"train_corpus", c.train_corpus},
        {"test_corpus", c.test_corpus},
        {"format", corpus_format_name(c.format)},
        {"provider",
         {{"kind", provider_kind_name(c.provider.kind)},
          {"dim", c.provider.dim},
          {"path", c.provider.path},
          {"url", c.provider.url}}},
        {"k_min", c.k_min},
        {"k_max", c.k_max},
        {"seed", c.seed},
        {"thetas", c.thetas},
        {"max_iter", c.max_iter},
        {"n_init", c.n_init},
        {"labeler",
         {{"ngram_min", c.labeler.ngram_min},
          {"ngram_max", c.labeler.ngram_max},
          {"keep_all_stopwords", c.labeler.stopword_policy == StopwordPolicy::KeepAll},
          {"max_label_tokens", c.labeler.max_label_tokens}}},
        {"output_dir", c.output_dir}};
    if (c.k_user) j["k_user"] = *c.k_user;
    if (c.k_system) j["k_system"] = *c.k_system;
    if (c.sample_cap) j["sample_cap"] = *c.sample_cap;
    if (c.labeler.stopword_file) j["labeler"]["stopword_file"] = c.labeler.stopword_file->string();
    return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        c.train_corpus = j.value("train_corpus", c.train_corpus);
        c.test_corpus = j.value("test_corpus", c.test_corpus);
        if (j.contains("format")) {
            const std::string f = j.at("format").get<std::string>();
            if (f == "auto") c.format = CorpusFormat::Auto;
            else if (f == "multiwoz") c.format = CorpusFormat::MultiWoz;
            else if (f == "jsonl") c.format = CorpusFormat::Jsonl;
            else throw Error("pipeline: unknown corpus format '" + f + "'");
        }
        if (j.contains("provider")) {
            const auto& jp = j.at("provider");
            if (jp.contains("kind")) {
                const std::string k = jp.at("kind").get<std::string>();
                if (k == "hashing") c.provider.kind = ProviderKind::Hashing;
                else if (k == "precomputed") c.provider.kind = ProviderKind::Precomputed;
                else if (k == "http") c.provider.kind = ProviderKind::Http;
                else throw Error("pipeline: unknown provider kind '" + k + "'");
            }
            c.provider.dim = jp.value("dim", c.provider.dim);
            c.provider.path = jp.value("path", c.provider.path);
            c.provider.url = jp.value("url", c.provider.url);
        }
        if (j.contains("k_user")) c.k_user = j.at("k_user").get<int>();
        if (j.contains("k_system")) c.k_system = j.at("k_system").get<int>();
        c.k_min = j.value("k_min", c.k_min);
        c.k_max = j.value("k_max", c.k_max);
        c.seed = j.value("seed", c.seed);
        if (j.contains("thetas")) c.thetas = j.at("thetas").get<std::vector<double>>();
        if (j.contains("sample_cap")) c.sample_cap = j.at("sample_cap").get<std::size_t>();
        c.max_iter = j.value("max_iter", c.max_iter);
        c.n_init = j.value("n_init", c.n_init);
        if (j.contains("labeler")) {
            const auto& jl = j.at("labeler");
            c.labeler.ngram_min = jl.value("ngram_min", c.labeler.ngram_min);
            c.labeler.ngram_max = jl.value("ngram_max", c.labeler.ngram_max);
            if (jl.value("keep_all_stopwords", false))
                c.labeler.stopword_policy = StopwordPolicy::KeepAll;
            c.labeler.max_label_tokens = jl.value("max_label_tokens", c.labeler.max_label_tokens);
            if (jl.contains("stopword_file"))
                c.labeler.stopword_file = jl.at("stopword_file").get<std::string>();
        }
        c.output_dir = j.value("output_dir", c.output_dir);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("pipeline: bad config JSON: ") + e.what());
    }
    return c;
}

inline std::string theta_tag(double theta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", theta);
    return buf;
}

struct DiscoverResult {
    FlowGraph flow; // unthresholded
    ClusterModel user_model;
    ClusterModel system_model;
    std::optional<SilhouetteReport> user_report;
    std::optional<SilhouetteReport> system_report;
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> warnings;
};

namespace detail {

inline nlohmann::json silhouette_report_json(const SilhouetteReport& report) {
    nlohmann::json per_k = nlohmann::json::object();
    for (const auto& [k, score] : report.per_k) per_k[std::to_string(k)] = score;
    return {{"per_k", std::move(per_k)}, {"best_k", report.best_k}};
}

inline ClusterModel fit_side(const EmbeddingMatrix& matrix, Speaker scope,
                             const std::optional<int>& fixed_k, const PipelineConfig& config,
                             std::uint64_t seed, std::optional<SilhouetteReport>& report) {
    int k;
    if (fixed_k) {
        k = *fixed_k;
    } else {
        const int k_max = std::min<int>(config.k_max, static_cast<int>(matrix.rows()));
        report = select_k(matrix, config.k_min, k_max, seed, config.sample_cap, scope,
                          config.max_iter, config.n_init);
        k = report->best_k;
    }
    return kmeans(matrix, k, config.max_iter, seed, scope, config.n_init);
}

} // namespace detail

// Full discovery: load, split, embed, cluster (fixed k or silhouette search),
// build the transition graph, and write models + flows + resolved config
// under config.output_dir.
inline DiscoverResult run_discover(const PipelineConfig& config) {
    if (config.train_corpus.empty()) throw Error("pipeline: no train corpus configured");
    if (config.output_dir.empty()) throw Error("pipeline: no output directory configured");
    for (double theta : config.thetas)
        if (theta < 0.0 || theta > 1.0)
            throw Error("pipeline: theta " + std::to_string(theta) + " outside [0, 1]");

    const std::filesystem::path out = config.output_dir;
    std::filesystem::create_directories(out);

    const auto provider = make_provider(config.provider);
    const Corpus corpus = load_corpus(config.train_corpus, config.format, "train");
    if (corpus.dialogues.empty()) throw Error("pipeline: train corpus has no dialogues");

    DiscoverResult result;
    result.warnings = alternation_warnings(corpus);

    const SpeakerSplit split = split_by_speaker(corpus);
    if (split.user.empty() || split.system.empty())
        throw Error("pipeline: corpus must contain both USER and SYSTEM utterances");

    auto texts = [](const std::vector<Utterance>& us) {
        std::vector<std::string> t;
        t.reserve(us.size());
        for (const auto& u : us) t.push_back(u.text);
        return t;
    };
    const EmbeddingMatrix user_matrix = embed_batch(texts(split.user), *provider);
    const EmbeddingMatrix system_matrix = embed_batch(texts(split.system), *provider);

    const std::uint64_t user_seed = derive_seed(config.seed, kUserSeedStream);
    const std::uint64_t system_seed = derive_seed(config.seed, kSystemSeedStream);
    result.user_model = detail::fit_side(user_matrix, Speaker::User, config.k_user, config,
                                         user_seed, result.user_report);
    result.system_model = detail::fit_side(system_matrix, Speaker::System, config.k_system,
                                           config, system_seed, result.system_report);

    result.flow = build_graph(corpus, result.user_model, result.system_model, provider.get());

    auto write = [&result](const std::filesystem::path& path, const std::string& content) {
        write_text_file(path, content);
        result.artifacts.push_back(path);
    };
    write(out / "resolved_config.json", config_to_json(config).dump(2) + "\n");
    write(out / "user_model.json", model_to_json(result.user_model).dump(2) + "\n");
    write(out / "system_model.json", model_to_json(result.system_model).dump(2) + "\n");
    if (result.user_report)
        write(out / "silhouette_user.json",
              detail::silhouette_report_json(*result.user_report).dump(2) + "\n");
    if (result.system_report)
        write(out / "silhouette_system.json",
              detail::silhouette_report_json(*result.system_report).dump(2) + "\n");
    write(out / "flow.json", to_json(result.flow));

    for (double theta : config.thetas) {
        const FlowGraph pruned = apply_threshold(result.flow, theta);
        const FlowGraph labeled = label_graph(pruned, corpus, result.user_model,
                                              result.system_model, config.labeler, provider.get());
        const std::string tag = theta_tag(theta);
        write(out / ("flow_theta_" + tag + ".json"), to_json(labeled));
        write(out / ("flow_theta_" + tag + ".dot"), to_dot(labeled));
    }
    return result;
}

// Applies each theta to the loaded flow (or evaluates it as-is when no thetas
// are given) and measures transition accuracy on the test corpus.
inline std::vector<EvaluationReport> run_evaluate(const std::filesystem::path& flow_path,
                                                  const std::filesystem::path& test_path,
                                                  CorpusFormat format,
                                                  const std::filesystem::path& user_model_path,
                                                  const std::filesystem::path& system_model_path,
                                                  const ProviderSpec& provider_spec,
                                                  const std::vector<double>& thetas,
                                                  bool include_sod_eod = false,
                                                  bool keep_log = false) {
    const FlowGraph flow = load_graph(flow_path);
    const Corpus test = load_corpus(test_path, format, "test");
    const ClusterModel user_model = load_model(user_model_path);
    const ClusterModel system_model = load_model(system_model_path);
    const auto provider = make_provider(provider_spec);

    std::vector<EvaluationReport> reports;
    if (thetas.empty()) {
        reports.push_back(transition_accuracy(flow, test, user_model, system_model, *provider,
                                              include_sod_eod, keep_log));
    } else {
        for (double theta : thetas)
            reports.push_back(transition_accuracy(apply_threshold(flow, theta), test, user_model,
                                                  system_model, *provider, include_sod_eod,
                                                  keep_log));
    }
    return reports;
}

struct ThetaStats {
    double theta = 0.0;
    GraphStats stats;
};

inline std::vector<ThetaStats> run_stats(const std::filesystem::path& flow_path,
                                         const std::vector<double>& thetas) {
    const FlowGraph flow = load_graph(flow_path);
    std::vector<ThetaStats> rows;
    if (thetas.empty()) {
        rows.push_back({flow.theta_applied().value_or(0.0), graph_stats(flow)});
    } else {
        for (double theta : thetas)
            rows.push_back({theta, graph_stats(apply_threshold(flow, theta))});
    }
    return rows;
}

inline FlowGraph run_label(const std::filesystem::path& flow_path,
                           const std::filesystem::path& corpus_path, CorpusFormat format,
                           const std::filesystem::path& user_model_path,
                           const std::filesystem::path& system_model_path,
                           const ProviderSpec& provider_spec, const LabelerConfig& labeler,
                           const std::filesystem::path& out_path) {
    const FlowGraph flow = load_graph(flow_path);
    const Corpus corpus = load_corpus(corpus_path, format, "label");
    const ClusterModel user_model = load_model(user_model_path);
    const ClusterModel system_model = load_model(system_model_path);
    const auto provider = make_provider(provider_spec);
    FlowGraph labeled = label_graph(flow, corpus, user_model, system_model, labeler,
                                    provider.get());
    save_graph(labeled, out_path);
    return labeled;
}

inline SynthGeneration run_gen(const std::filesystem::path& flow_spec_path, int n_dialogues,
                               int max_turns, double vocab_noise,
                               std::optional<std::uint64_t> seed_override,
                               const std::filesystem::path& out_path,
                               const std::optional<std::filesystem::path>& states_out = {}) {
    const GroundTruthFlow truth = load_truth_flow(flow_spec_path);
    SynthGeneration gen = generate_corpus(truth, n_dialogues, max_turns, vocab_noise,
                                          seed_override);
    write_jsonl(gen.corpus, out_path);
    if (states_out) {
        std::ostringstream lines;
        for (std::size_t d = 0; d < gen.corpus.dialogues.size(); ++d)
            for (std::size_t t = 0; t < gen.state_ids[d].size(); ++t)
                lines << nlohmann::json{{"dialogue_id", gen.corpus.dialogues[d].id},
                                        {"turn_index", static_cast<int>(t)},
                                        {"state_id", gen.state_ids[d][t]}}
                             .dump()
                      << "\n";
        write_text_file(*states_out, lines.str());
    }
    return gen;
}

} // namespace flowdisco
