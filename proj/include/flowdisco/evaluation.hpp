#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowdisco/clustering.hpp"
#include "flowdisco/common.hpp"
#include "flowdisco/corpus.hpp"
#include "flowdisco/embedding.hpp"
#include "flowdisco/flowgraph.hpp"

namespace flowdisco {

struct TransitionLogRow {
    std::string dialogue_id;
    int turn_index = 0; // of the pair's first element
    std::string from_state;
    std::string to_state;
    bool predicted = false;
};

struct EvaluationReport {
    double theta = 0.0;
    std::uint64_t total_transitions = 0;
    std::uint64_t predicted_transitions = 0;
    double accuracy = 0.0;
    bool include_sod_eod = false;
    std::optional<std::vector<TransitionLogRow>> per_transition_log;
};

// Proportion of held-out consecutive-utterance transitions whose edge exists
// in the flow. Each test utterance is assigned independently to its speaker
// model's nearest centroid; with include_sod_eod the SOD -> c(first) and
// c(last) -> EOD pairs are counted as well.
inline EvaluationReport transition_accuracy(const FlowGraph& graph, const Corpus& test_corpus,
                                            const ClusterModel& user_model,
                                            const ClusterModel& system_model,
                                            const EmbeddingProvider& provider,
                                            bool include_sod_eod = false, bool keep_log = false) {
    if (test_corpus.dialogues.empty())
        throw Error("evaluation: cannot evaluate an empty test corpus");
    if (user_model.dim != system_model.dim)
        throw Error("evaluation: user/system model dims differ");
    if (provider.dim() != user_model.dim)
        throw Error("evaluation: provider dim " + std::to_string(provider.dim()) +
                    " does not match model dim " + std::to_string(user_model.dim));

    std::vector<std::string> texts;
    texts.reserve(test_corpus.total_utterances());
    for (const auto& d : test_corpus.dialogues)
        for (const auto& u : d.utterances) texts.push_back(u.text);
    const EmbeddingMatrix embedded = embed_batch(texts, provider);

    EvaluationReport report;
    report.theta = graph.theta_applied().value_or(0.0);
    report.include_sod_eod = include_sod_eod;
    if (keep_log) report.per_transition_log.emplace();

    auto record = [&](const std::string& dialogue_id, int turn_index, const std::string& from,
                      const std::string& to) {
        const bool predicted = has_transition(graph, from, to);
        ++report.total_transitions;
        if (predicted) ++report.predicted_transitions;
        if (report.per_transition_log)
            report.per_transition_log->push_back({dialogue_id, turn_index, from, to, predicted});
    };

    std::size_t row = 0;
    for (const auto& d : test_corpus.dialogues) {
        std::vector<std::string> ids;
        ids.reserve(d.utterances.size());
        for (const auto& u : d.utterances) {
            const ClusterModel& model = u.speaker == Speaker::User ? user_model : system_model;
            ids.push_back(state_id(u.speaker, assign(model, embedded.row(row++))));
        }
        if (include_sod_eod)
            record(d.id, d.utterances.front().turn_index, kSodId, ids.front());
        for (std::size_t i = 0; i + 1 < ids.size(); ++i)
            record(d.id, d.utterances[i].turn_index, ids[i], ids[i + 1]);
        if (include_sod_eod)
            record(d.id, d.utterances.back().turn_index, ids.back(), kEodId);
    }

    report.accuracy = report.total_transitions == 0
                          ? 0.0
                          : static_cast<double>(report.predicted_transitions) /
                                static_cast<double>(report.total_transitions);
    return report;
}

inline nlohmann::json report_to_json(const EvaluationReport& report) {
    return {{"theta", report.theta},
            {"total_transitions", report.total_transitions},
            {"predicted_transitions", report.predicted_transitions},
            {"accuracy", report.accuracy},
            {"include_sod_eod", report.include_sod_eod}};
}

inline std::string log_to_csv(const EvaluationReport& report) {
    if (!report.per_transition_log)
        throw Error("evaluation: report carries no per-transition log");
    std::ostringstream out;
    out << "dialogue_id,turn_index,from_state,to_state,predicted\n";
    for (const auto& row : report.per_transition_log.value())
        out << row.dialogue_id << "," << row.turn_index << "," << row.from_state << ","
            << row.to_state << "," << (row.predicted ? "true" : "false") << "\n";
    return out.str();
}

} // namespace flowdisco
