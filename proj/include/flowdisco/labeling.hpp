#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowdisco/common.hpp"
#include "flowdisco/corpus.hpp"
#include "flowdisco/flowgraph.hpp"

namespace flowdisco {

enum class LabelMethod { FrequentNgram };
enum class StopwordPolicy { DropEdgeStopwords, KeepAll };

struct LabelerConfig {
    LabelMethod method = LabelMethod::FrequentNgram;
    int ngram_min = 2;
    int ngram_max = 4;
    StopwordPolicy stopword_policy = StopwordPolicy::DropEdgeStopwords;
    int max_label_tokens = 5;
    std::optional<std::filesystem::path> stopword_file; // overrides the built-in list
};

// The built-in English list, mirrored in data/stopwords_en.txt.
inline const std::vector<std::string>& default_stopwords() {
    static const std::vector<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
        "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
        "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during",
        "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
        "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into",
        "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
        "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
        "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such",
        "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
        "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
        "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
        "why", "will", "with", "would", "your", "yours", "yourself", "yourselves"};
    return words;
}

inline std::vector<std::string> load_stopwords(const std::filesystem::path& path) {
    std::vector<std::string> words;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        const std::string word = trim(line);
        if (!word.empty()) words.push_back(word);
    }
    return words;
}

namespace detail {

inline std::set<std::string> resolve_stopwords(const LabelerConfig& config) {
    const std::vector<std::string> words =
        config.stopword_file ? load_stopwords(*config.stopword_file) : default_stopwords();
    return {words.begin(), words.end()};
}

struct NgramScore {
    std::uint64_t count = 0;
    int n = 0;
};

} // namespace detail

// Most frequent n-gram, length-weighted: score = frequency * n. Under
// DropEdgeStopwords, n-grams that begin or end with a stopword are excluded.
// Ties break toward longer n-grams, then lexicographically smaller ones.
// Falls back to the most frequent non-stopword token, then to "state".
inline std::string label_cluster(const std::vector<std::string>& utterances,
                                 const LabelerConfig& config = {}) {
    if (utterances.empty()) throw Error("labeling: cannot label an empty utterance list");
    if (config.ngram_min < 1 || config.ngram_min > config.ngram_max)
        throw Error("labeling: require 1 <= ngram_min <= ngram_max");

    const std::set<std::string> stopwords = detail::resolve_stopwords(config);
    const bool drop_edges = config.stopword_policy == StopwordPolicy::DropEdgeStopwords;
    const int n_max = std::min(config.ngram_max, std::max(1, config.max_label_tokens));
    const int n_min = std::min(config.ngram_min, n_max);

    std::map<std::string, detail::NgramScore> candidates;
    std::map<std::string, std::uint64_t> token_counts;
    for (const auto& text : utterances) {
        const std::vector<std::string> tokens = tokenize_lower(text);
        for (const auto& t : tokens)
            if (!stopwords.count(t)) ++token_counts[t];
        for (int n = n_min; n <= n_max; ++n) {
            if (static_cast<std::size_t>(n) > tokens.size()) break;
            for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
                if (drop_edges &&
                    (stopwords.count(tokens[i]) || stopwords.count(tokens[i + n - 1])))
                    continue;
                std::string gram = tokens[i];
                for (std::size_t j = 1; j < static_cast<std::size_t>(n); ++j)
                    gram += " " + tokens[i + j];
                auto& entry = candidates[gram];
                ++entry.count;
                entry.n = n;
            }
        }
    }

    std::string best;
    std::uint64_t best_score = 0;
    int best_n = 0;
    for (const auto& [gram, s] : candidates) { // lexicographic order; strict wins keep it
        const std::uint64_t score = s.count * static_cast<std::uint64_t>(s.n);
        if (score > best_score || (score == best_score && s.n > best_n)) {
            best = gram;
            best_score = score;
            best_n = s.n;
        }
    }
    if (!best.empty()) return best;

    std::string token;
    std::uint64_t token_best = 0;
    for (const auto& [t, count] : token_counts)
        if (count > token_best) {
            token = t;
            token_best = count;
        }
    return token.empty() ? "state" : token;
}

// Duplicated labels get a 1-based suffix in order of appearance; unique
// labels pass through. Suffixes skip values that would collide with other
// labels so the output never contains duplicates.
inline std::vector<std::string> dedupe_labels(const std::vector<std::string>& labels) {
    std::map<std::string, int> occurrences;
    for (const auto& l : labels) ++occurrences[l];

    std::set<std::string> used;
    for (const auto& [l, count] : occurrences)
        if (count == 1) used.insert(l);

    std::vector<std::string> out;
    out.reserve(labels.size());
    std::map<std::string, int> next_suffix;
    for (const auto& l : labels) {
        if (occurrences.at(l) == 1) {
            out.push_back(l);
            continue;
        }
        int& suffix = next_suffix[l];
        std::string candidate;
        do {
            candidate = l + " " + std::to_string(++suffix);
        } while (used.count(candidate) || occurrences.count(candidate));
        used.insert(candidate);
        out.push_back(candidate);
    }
    return out;
}

// New graph whose cluster states carry deduped labels drawn from their member
// utterances; SOD/EOD keep their names.
inline FlowGraph label_graph(const FlowGraph& graph, const Corpus& corpus,
                             const ClusterModel& user_model, const ClusterModel& system_model,
                             const LabelerConfig& config = {},
                             const EmbeddingProvider* provider = nullptr) {
    if (graph.empty()) return graph;

    const SpeakerSplit split = split_by_speaker(corpus);
    const std::vector<int> user_idx = detail::cluster_indices(split.user, user_model, provider);
    const std::vector<int> system_idx =
        detail::cluster_indices(split.system, system_model, provider);

    std::map<std::string, std::vector<std::string>> members;
    for (std::size_t i = 0; i < split.user.size(); ++i)
        members[state_id(Speaker::User, user_idx[i])].push_back(split.user[i].text);
    for (std::size_t i = 0; i < split.system.size(); ++i)
        members[state_id(Speaker::System, system_idx[i])].push_back(split.system[i].text);

    std::vector<std::string> ids, labels;
    for (const auto& [id, state] : graph.states()) {
        if (state.kind == StateKind::Sod || state.kind == StateKind::Eod) continue;
        ids.push_back(id);
        auto it = members.find(id);
        labels.push_back(it == members.end() || it->second.empty()
                             ? "state"
                             : label_cluster(it->second, config));
    }
    labels = dedupe_labels(labels);

    FlowGraph labeled;
    labeled.set_provenance(graph.provenance());
    if (graph.theta_applied()) labeled.set_theta_applied(*graph.theta_applied());
    std::map<std::string, std::string> label_of;
    for (std::size_t i = 0; i < ids.size(); ++i) label_of[ids[i]] = labels[i];
    for (const auto& [id, state] : graph.states()) {
        FlowState s = state;
        auto it = label_of.find(id);
        if (it != label_of.end()) s.label = it->second;
        labeled.add_state(std::move(s));
    }
    for (const auto& [key, t] : graph.transitions()) labeled.add_transition(t);
    return labeled;
}

} // namespace flowdisco
