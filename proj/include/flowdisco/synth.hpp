#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowdisco/clustering.hpp"
#include "flowdisco/common.hpp"
#include "flowdisco/corpus.hpp"
#include "flowdisco/flowgraph.hpp"

namespace flowdisco {

struct TruthState {
    std::string id;
    Speaker speaker = Speaker::User;
    std::vector<std::string> vocabulary;
};

// A known Markov flow used to manufacture corpora with ground truth attached.
// "EOD" is a valid transition target; SOD is implicit in `start`.
struct GroundTruthFlow {
    std::vector<TruthState> states;
    std::map<std::string, std::map<std::string, double>> transitions;
    std::map<std::string, double> start;
    std::uint64_t seed = 0;

    const TruthState& state(const std::string& id) const {
        for (const auto& s : states)
            if (s.id == id) return s;
        throw Error("synth: unknown state '" + id + "'");
    }
};

struct SynthGeneration {
    Corpus corpus;
    std::vector<std::vector<std::string>> state_ids; // truth state per utterance
};

struct RecoveryScore {
    double cluster_purity = 0.0;
    double edge_f1 = 0.0;
};

inline void validate_truth_flow(const GroundTruthFlow& flow) {
    if (flow.states.empty()) throw Error("synth: flow has no states");
    std::map<std::string, Speaker> speakers;
    for (const auto& s : flow.states) {
        if (!speakers.emplace(s.id, s.speaker).second)
            throw Error("synth: duplicate state id '" + s.id + "'");
        if (s.vocabulary.empty())
            throw Error("synth: state '" + s.id + "' has an empty vocabulary");
    }
    double start_sum = 0.0;
    for (const auto& [id, p] : flow.start) {
        if (!speakers.count(id)) throw Error("synth: start distribution names unknown state '" + id + "'");
        if (p < 0.0) throw Error("synth: negative start probability for '" + id + "'");
        start_sum += p;
    }
    if (std::abs(start_sum - 1.0) > 1e-9)
        throw Error("synth: start distribution sums to " + std::to_string(start_sum));
    for (const auto& s : flow.states) {
        auto row = flow.transitions.find(s.id);
        if (row == flow.transitions.end())
            throw Error("synth: state '" + s.id + "' has no transition row");
        double row_sum = 0.0;
        for (const auto& [to, p] : row->second) {
            if (p < 0.0) throw Error("synth: negative probability on " + s.id + " -> " + to);
            row_sum += p;
            if (to == kEodId) continue;
            auto target = speakers.find(to);
            if (target == speakers.end())
                throw Error("synth: transition to unknown state '" + to + "'");
            if (p > 0.0 && target->second == s.speaker)
                throw Error("synth: speakers do not alternate on " + s.id + " -> " + to);
        }
        if (std::abs(row_sum - 1.0) > 1e-9)
            throw Error("synth: transition row of '" + s.id + "' sums to " +
                        std::to_string(row_sum));
    }
}

namespace detail {

inline std::string sample_categorical(const std::map<std::string, double>& dist,
                                      std::mt19937_64& rng) {
    const double r = uniform_real01(rng);
    double cum = 0.0;
    std::string last;
    for (const auto& [id, p] : dist) {
        if (p <= 0.0) continue;
        cum += p;
        last = id;
        if (cum > r) return id;
    }
    return last; // r landed in the rounding tail
}

} // namespace detail

// Samples `n_dialogues` state paths from the flow (per-dialogue seeds derived
// from the flow seed), emitting one template per visited state. With
// probability vocab_noise a template is drawn from a uniformly random other
// state instead. Paths truncate at EOD or max_turns.
inline SynthGeneration generate_corpus(const GroundTruthFlow& flow, int n_dialogues,
                                       int max_turns, double vocab_noise,
                                       std::optional<std::uint64_t> seed_override = std::nullopt) {
    if (n_dialogues < 1) throw Error("synth: n_dialogues must be >= 1");
    if (max_turns < 1) throw Error("synth: max_turns must be >= 1");
    if (vocab_noise < 0.0 || vocab_noise > 1.0) throw Error("synth: vocab_noise must be in [0, 1]");
    validate_truth_flow(flow);

    const std::uint64_t base_seed = seed_override.value_or(flow.seed);
    SynthGeneration gen;
    gen.corpus.portion_tag = "synthetic";
    for (int d = 0; d < n_dialogues; ++d) {
        std::mt19937_64 rng(derive_seed(base_seed, static_cast<std::uint64_t>(d)));
        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "synth-%06d", d);
        Dialogue dialogue;
        dialogue.id = id_buf;
        std::vector<std::string> path;

        std::string current = detail::sample_categorical(flow.start, rng);
        for (int turn = 0; turn < max_turns; ++turn) {
            const TruthState& state = flow.state(current);
            const TruthState* vocab_source = &state;
            if (vocab_noise > 0.0 && uniform_real01(rng) < vocab_noise && flow.states.size() > 1) {
                std::uint64_t other = uniform_index(rng, flow.states.size() - 1);
                for (std::size_t s = 0; s < flow.states.size(); ++s) {
                    if (flow.states[s].id == current) continue;
                    if (other == 0) {
                        vocab_source = &flow.states[s];
                        break;
                    }
                    --other;
                }
            }
            const std::string& text =
                vocab_source->vocabulary[uniform_index(rng, vocab_source->vocabulary.size())];
            dialogue.utterances.push_back({dialogue.id, turn, state.speaker, text});
            path.push_back(current);

            const std::string next = detail::sample_categorical(flow.transitions.at(current), rng);
            if (next == kEodId) break;
            current = next;
        }
        gen.corpus.dialogues.push_back(std::move(dialogue));
        gen.state_ids.push_back(std::move(path));
    }
    return gen;
}

// {states: [{id, speaker, vocabulary}], transitions: {from: {to: prob}},
// start: {state: prob}, seed}
inline GroundTruthFlow truth_flow_from_json(const nlohmann::json& j) {
    GroundTruthFlow flow;
    try {
        for (const auto& js : j.at("states")) {
            TruthState s;
            s.id = js.at("id").get<std::string>();
            const std::string sp = js.at("speaker").get<std::string>();
            auto speaker = try_parse_speaker(sp);
            if (!speaker) throw Error("synth: unknown speaker '" + sp + "' in state '" + s.id + "'");
            s.speaker = *speaker;
            s.vocabulary = js.at("vocabulary").get<std::vector<std::string>>();
            flow.states.push_back(std::move(s));
        }
        for (const auto& [from, row] : j.at("transitions").items())
            for (const auto& [to, p] : row.items())
                flow.transitions[from][to] = p.get<double>();
        for (const auto& [id, p] : j.at("start").items()) flow.start[id] = p.get<double>();
        flow.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("synth: bad ground-truth flow JSON: ") + e.what());
    }
    validate_truth_flow(flow);
    return flow;
}

inline GroundTruthFlow load_truth_flow(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("synth: malformed flow spec JSON in " + path.string() + ": " + e.what());
    }
    return truth_flow_from_json(j);
}

// Purity: fraction of utterances whose cluster's majority ground-truth state
// matches their own. Edge F1: ground-truth positive-probability edges
// (including SOD/EOD) against discovered edges mapped through the
// majority-state mapping.
inline RecoveryScore score_recovery(
    const GroundTruthFlow& truth, const SynthGeneration& gen, const FlowGraph& discovered,
    const ClusterModel& user_model, const ClusterModel& system_model,
    const std::optional<std::map<std::string, std::string>>& state_mapping = std::nullopt) {
    if (discovered.empty()) throw Error("synth: cannot score an empty discovered graph");

    const SpeakerSplit split = split_by_speaker(gen.corpus);
    if (user_model.assignments.size() != split.user.size() ||
        system_model.assignments.size() != split.system.size())
        throw Error("synth: models were not fitted on the generated corpus");

    // (cluster state, truth state) per utterance, in corpus order.
    std::vector<std::pair<std::string, std::string>> pairs;
    std::size_t next_user = 0, next_system = 0;
    for (std::size_t d = 0; d < gen.corpus.dialogues.size(); ++d) {
        const Dialogue& dialogue = gen.corpus.dialogues[d];
        for (std::size_t t = 0; t < dialogue.utterances.size(); ++t) {
            const Utterance& u = dialogue.utterances[t];
            const int cluster = u.speaker == Speaker::User
                                    ? user_model.assignments[next_user++]
                                    : system_model.assignments[next_system++];
            pairs.emplace_back(state_id(u.speaker, cluster), gen.state_ids[d][t]);
        }
    }

    std::map<std::string, std::string> majority;
    if (state_mapping) {
        majority = *state_mapping;
    } else {
        std::map<std::string, std::map<std::string, std::size_t>> votes;
        for (const auto& [cluster, truth_id] : pairs) ++votes[cluster][truth_id];
        for (const auto& [cluster, counts] : votes) {
            std::string best;
            std::size_t best_count = 0;
            for (const auto& [truth_id, count] : counts)
                if (count > best_count) { // map order: ties keep the lexicographically smaller id
                    best = truth_id;
                    best_count = count;
                }
            majority[cluster] = best;
        }
    }

    std::size_t pure = 0;
    for (const auto& [cluster, truth_id] : pairs) {
        auto it = majority.find(cluster);
        if (it != majority.end() && it->second == truth_id) ++pure;
    }

    std::set<std::pair<std::string, std::string>> truth_edges;
    for (const auto& [id, p] : truth.start)
        if (p > 0.0) truth_edges.emplace(kSodId, id);
    for (const auto& [from, row] : truth.transitions)
        for (const auto& [to, p] : row)
            if (p > 0.0) truth_edges.emplace(from, to);

    auto map_state = [&](const std::string& id) -> std::string {
        if (id == kSodId || id == kEodId) return id;
        auto it = majority.find(id);
        if (it == majority.end())
            throw Error("synth: discovered state '" + id + "' has no member utterances to map");
        return it->second;
    };
    std::set<std::pair<std::string, std::string>> mapped;
    for (const auto& [key, t] : discovered.transitions())
        mapped.emplace(map_state(t.from), map_state(t.to));

    std::size_t intersection = 0;
    for (const auto& e : mapped)
        if (truth_edges.count(e)) ++intersection;

    RecoveryScore score;
    score.cluster_purity =
        pairs.empty() ? 0.0 : static_cast<double>(pure) / static_cast<double>(pairs.size());
    score.edge_f1 = (mapped.empty() && truth_edges.empty())
                        ? 0.0
                        : 2.0 * static_cast<double>(intersection) /
                              static_cast<double>(mapped.size() + truth_edges.size());
    return score;
}

} // namespace flowdisco
