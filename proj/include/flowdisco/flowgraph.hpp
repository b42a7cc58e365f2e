#pragma once

#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "flowdisco/clustering.hpp"
#include "flowdisco/common.hpp"
#include "flowdisco/corpus.hpp"
#include "flowdisco/embedding.hpp"

namespace flowdisco {

enum class StateKind { UserCluster, SystemCluster, Sod, Eod };

inline const char* state_kind_name(StateKind k) {
    switch (k) {
        case StateKind::UserCluster: return "USER_CLUSTER";
        case StateKind::SystemCluster: return "SYSTEM_CLUSTER";
        case StateKind::Sod: return "SOD";
        case StateKind::Eod: return "EOD";
    }
    return "";
}

inline std::optional<StateKind> try_parse_state_kind(const std::string& s) {
    if (s == "USER_CLUSTER") return StateKind::UserCluster;
    if (s == "SYSTEM_CLUSTER") return StateKind::SystemCluster;
    if (s == "SOD") return StateKind::Sod;
    if (s == "EOD") return StateKind::Eod;
    return std::nullopt;
}

inline std::string state_id(Speaker speaker, int cluster_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%02d", speaker_name(speaker), cluster_index);
    return buf;
}

constexpr const char* kSodId = "SOD";
constexpr const char* kEodId = "EOD";

struct FlowState {
    std::string id;
    StateKind kind = StateKind::UserCluster;
    std::optional<int> cluster_index;
    std::optional<std::string> label;
    std::size_t size = 0; // member utterances (SOD/EOD: dialogue traversals)

    bool operator==(const FlowState&) const = default;
};

struct Transition {
    std::string from;
    std::string to;
    std::uint64_t count = 0;
    double probability = 0.0;

    bool operator==(const Transition&) const = default;
};

struct Provenance {
    std::string corpus_tag;
    std::uint64_t user_seed = 0;
    std::uint64_t system_seed = 0;
    int user_k = 0;
    int system_k = 0;

    bool operator==(const Provenance&) const = default;
};

// G(C, T): cluster states plus SOD/EOD vertices, transitions weighted by
// counts and conditional probabilities. Immutable once built; thresholding
// returns a new graph.
class FlowGraph {
public:
    using TransitionKey = std::pair<std::string, std::string>;

    const std::map<std::string, FlowState>& states() const { return states_; }
    const std::map<TransitionKey, Transition>& transitions() const { return transitions_; }
    std::optional<double> theta_applied() const { return theta_applied_; }
    const Provenance& provenance() const { return provenance_; }

    bool empty() const { return states_.empty(); }

    void set_theta_applied(double theta) { theta_applied_ = theta; }
    void set_provenance(Provenance p) { provenance_ = std::move(p); }

    void add_state(FlowState state) {
        if (state.id.empty()) throw Error("flowgraph: state with empty id");
        const bool is_cluster =
            state.kind == StateKind::UserCluster || state.kind == StateKind::SystemCluster;
        if (is_cluster && !state.cluster_index)
            throw Error("flowgraph: cluster state '" + state.id + "' has no cluster_index");
        if (!is_cluster && state.cluster_index)
            throw Error("flowgraph: state '" + state.id + "' must not carry a cluster_index");
        if (!states_.emplace(state.id, std::move(state)).second)
            throw Error("flowgraph: duplicate state id '" + states_.at(state.id).id + "'");
    }

    void add_transition(Transition t) {
        if (!states_.count(t.from))
            throw Error("flowgraph: transition from unknown state '" + t.from + "'");
        if (!states_.count(t.to))
            throw Error("flowgraph: transition to unknown state '" + t.to + "'");
        if (t.to == kSodId) throw Error("flowgraph: SOD cannot have incoming transitions");
        if (t.from == kEodId) throw Error("flowgraph: EOD cannot have outgoing transitions");
        if (t.count < 1) throw Error("flowgraph: transition count must be >= 1");
        if (!(t.probability > 0.0) || t.probability > 1.0)
            throw Error("flowgraph: transition probability must be in (0, 1]");
        TransitionKey key{t.from, t.to};
        if (!transitions_.emplace(std::move(key), std::move(t)).second)
            throw Error("flowgraph: duplicate transition");
    }

    bool operator==(const FlowGraph& other) const {
        return states_ == other.states_ && transitions_ == other.transitions_ &&
               theta_applied_ == other.theta_applied_ && provenance_ == other.provenance_;
    }

private:
    std::map<std::string, FlowState> states_;
    std::map<TransitionKey, Transition> transitions_;
    std::optional<double> theta_applied_;
    Provenance provenance_;
};

struct GraphStats {
    std::size_t state_count = 0;
    std::size_t transition_count = 0;
    bool has_sod_eod_path = false;
};

inline bool has_transition(const FlowGraph& graph, const std::string& from,
                           const std::string& to) {
    return graph.transitions().count({from, to}) > 0;
}

namespace detail {

inline std::map<std::string, std::vector<std::string>> adjacency(const FlowGraph& g,
                                                                 bool reversed) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [key, t] : g.transitions())
        reversed ? adj[t.to].push_back(t.from) : adj[t.from].push_back(t.to);
    return adj;
}

inline std::set<std::string> reachable(const std::map<std::string, std::vector<std::string>>& adj,
                                       const std::string& start) {
    std::set<std::string> seen{start};
    std::deque<std::string> queue{start};
    while (!queue.empty()) {
        const std::string cur = queue.front();
        queue.pop_front();
        auto it = adj.find(cur);
        if (it == adj.end()) continue;
        for (const auto& next : it->second)
            if (seen.insert(next).second) queue.push_back(next);
    }
    return seen;
}

// Per-utterance cluster index, reusing training assignments when the model's
// assignment vector is aligned with this corpus' per-speaker utterances and
// falling back to nearest-centroid assignment of fresh embeddings otherwise.
inline std::vector<int> cluster_indices(const std::vector<Utterance>& utterances,
                                        const ClusterModel& model,
                                        const EmbeddingProvider* provider) {
    if (model.assignments.size() == utterances.size()) return model.assignments;
    if (!provider)
        throw Error("flowgraph: model for " + std::string(speaker_name(model.speaker_scope)) +
                    " has no assignments aligned with the corpus and no provider was given");
    if (provider->dim() != model.dim)
        throw Error("flowgraph: provider dim " + std::to_string(provider->dim()) +
                    " does not match model dim " + std::to_string(model.dim));
    std::vector<std::string> texts;
    texts.reserve(utterances.size());
    for (const auto& u : utterances) texts.push_back(u.text);
    const EmbeddingMatrix m = embed_batch(texts, *provider);
    std::vector<int> indices(utterances.size());
    for (std::size_t i = 0; i < m.rows(); ++i) indices[i] = assign(model, m.row(i));
    return indices;
}

} // namespace detail

// Counts SOD -> c(first), c(u_i) -> c(u_{i+1}) for consecutive pairs
// (self-loops allowed) and c(last) -> EOD for every dialogue, then converts
// counts to conditional probabilities: p_ab = count(a->b) / sum_x count(a->x).
inline FlowGraph build_graph(const Corpus& corpus, const ClusterModel& user_model,
                             const ClusterModel& system_model,
                             const EmbeddingProvider* provider = nullptr) {
    if (corpus.dialogues.empty()) throw Error("flowgraph: cannot build a graph from an empty corpus");
    if (user_model.dim != system_model.dim)
        throw Error("flowgraph: user/system model dims differ (" + std::to_string(user_model.dim) +
                    " vs " + std::to_string(system_model.dim) + ")");

    const SpeakerSplit split = split_by_speaker(corpus);
    const std::vector<int> user_idx = detail::cluster_indices(split.user, user_model, provider);
    const std::vector<int> system_idx =
        detail::cluster_indices(split.system, system_model, provider);

    std::map<std::string, std::size_t> state_sizes;
    std::map<FlowGraph::TransitionKey, std::uint64_t> counts;
    std::size_t next_user = 0, next_system = 0;
    for (const auto& dialogue : corpus.dialogues) {
        std::string prev = kSodId;
        for (const auto& u : dialogue.utterances) {
            const int cluster = u.speaker == Speaker::User ? user_idx[next_user++]
                                                           : system_idx[next_system++];
            const std::string cur = state_id(u.speaker, cluster);
            ++state_sizes[cur];
            ++counts[{prev, cur}];
            prev = cur;
        }
        ++counts[{prev, kEodId}];
    }

    std::map<std::string, std::uint64_t> out_totals;
    for (const auto& [key, count] : counts) out_totals[key.first] += count;

    FlowGraph graph;
    graph.add_state({kSodId, StateKind::Sod, std::nullopt, std::nullopt, corpus.dialogues.size()});
    graph.add_state({kEodId, StateKind::Eod, std::nullopt, std::nullopt, corpus.dialogues.size()});
    for (const auto& [id, size] : state_sizes) {
        const bool is_user = id.rfind("USER_", 0) == 0;
        const int index = std::stoi(id.substr(id.find('_') + 1));
        graph.add_state({id, is_user ? StateKind::UserCluster : StateKind::SystemCluster, index,
                         std::nullopt, size});
    }
    for (const auto& [key, count] : counts)
        graph.add_transition({key.first, key.second, count,
                              static_cast<double>(count) /
                                  static_cast<double>(out_totals.at(key.first))});

    Provenance prov;
    prov.corpus_tag = corpus.portion_tag;
    prov.user_seed = user_model.seed;
    prov.system_seed = system_model.seed;
    prov.user_k = user_model.k;
    prov.system_k = system_model.k;
    graph.set_provenance(std::move(prov));
    return graph;
}

// Drops transitions with probability < theta, then keeps only states lying on
// at least one SOD->EOD path in the surviving edge set. Probabilities are not
// renormalized; they keep their original values.
inline FlowGraph apply_threshold(const FlowGraph& graph, double theta) {
    if (!(theta >= 0.0) || theta > 1.0)
        throw Error("flowgraph: theta must be in [0, 1], got " + std::to_string(theta));
    if (graph.theta_applied() && theta < *graph.theta_applied())
        throw Error("flowgraph: graph already thresholded at " +
                    std::to_string(*graph.theta_applied()) +
                    "; cannot lower the threshold to " + std::to_string(theta));

    FlowGraph pruned;
    pruned.set_provenance(graph.provenance());
    pruned.set_theta_applied(theta);

    std::map<std::string, std::vector<std::string>> fwd, bwd;
    std::vector<const Transition*> surviving;
    for (const auto& [key, t] : graph.transitions()) {
        if (t.probability < theta) continue;
        surviving.push_back(&t);
        fwd[t.from].push_back(t.to);
        bwd[t.to].push_back(t.from);
    }

    const std::set<std::string> from_sod = detail::reachable(fwd, kSodId);
    const std::set<std::string> to_eod = detail::reachable(bwd, kEodId);
    std::set<std::string> on_path;
    for (const auto& id : from_sod)
        if (to_eod.count(id)) on_path.insert(id);
    if (!on_path.count(kSodId) || !on_path.count(kEodId)) return pruned; // empty graph

    for (const auto& [id, state] : graph.states())
        if (on_path.count(id)) pruned.add_state(state);
    for (const Transition* t : surviving)
        if (on_path.count(t->from) && on_path.count(t->to)) pruned.add_transition(*t);
    return pruned;
}

inline GraphStats graph_stats(const FlowGraph& graph) {
    GraphStats stats;
    stats.state_count = graph.states().size();
    stats.transition_count = graph.transitions().size();
    if (graph.states().count(kSodId) && graph.states().count(kEodId)) {
        const auto fwd = detail::adjacency(graph, false);
        stats.has_sod_eod_path = detail::reachable(fwd, kSodId).count(kEodId) > 0;
    }
    return stats;
}

} // namespace flowdisco
