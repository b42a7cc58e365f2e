#pragma once

#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "flowdisco/common.hpp"
#include "flowdisco/flowgraph.hpp"

namespace flowdisco {

struct DotStyle {
    std::string user_color = "lightblue";
    std::string system_color = "darkblue";
    std::string sod_eod_color = "yellow";
    int edge_label_precision = 2;
    double min_penwidth = 1.0;
    double max_penwidth = 4.0;
};

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

} // namespace detail

// Byte-stable DOT: nodes in sorted id order, edges in sorted (from, to)
// order, edge width scaled linearly with probability.
inline std::string to_dot(const FlowGraph& graph, const DotStyle& style = {}) {
    if (style.edge_label_precision < 0) throw Error("export: negative edge label precision");
    if (style.min_penwidth > style.max_penwidth)
        throw Error("export: min_penwidth exceeds max_penwidth");

    std::ostringstream out;
    out << "digraph flow {\n";
    out << "  rankdir=TB;\n";
    out << "  node [style=filled];\n";
    for (const auto& [id, state] : graph.states()) {
        std::string color, shape, extra;
        switch (state.kind) {
            case StateKind::UserCluster:
                color = style.user_color;
                shape = "ellipse";
                break;
            case StateKind::SystemCluster:
                color = style.system_color;
                shape = "ellipse";
                extra = ", fontcolor=white";
                break;
            case StateKind::Sod:
            case StateKind::Eod:
                color = style.sod_eod_color;
                shape = "box";
                break;
        }
        const std::string text = state.label.value_or(id);
        out << "  \"" << detail::dot_escape(id) << "\" [label=\"" << detail::dot_escape(text)
            << "\", shape=" << shape << ", fillcolor=\"" << detail::dot_escape(color) << "\""
            << extra << "];\n";
    }
    for (const auto& [key, t] : graph.transitions()) {
        const double width =
            style.min_penwidth + (style.max_penwidth - style.min_penwidth) * t.probability;
        out << "  \"" << detail::dot_escape(t.from) << "\" -> \"" << detail::dot_escape(t.to)
            << "\" [label=\"" << format_double(t.probability, style.edge_label_precision)
            << "\", penwidth=" << format_double(width, 2) << "];\n";
    }
    out << "}\n";
    return out.str();
}

// Lossless JSON round-trip of states, transitions (counts and full-precision
// probabilities), theta_applied, labels and provenance.
inline nlohmann::json graph_to_json_value(const FlowGraph& graph) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& [id, state] : graph.states()) {
        nlohmann::json js{{"id", state.id},
                          {"kind", state_kind_name(state.kind)},
                          {"size", state.size}};
        if (state.cluster_index) js["cluster_index"] = *state.cluster_index;
        if (state.label) js["label"] = *state.label;
        states.push_back(std::move(js));
    }
    nlohmann::json transitions = nlohmann::json::array();
    for (const auto& [key, t] : graph.transitions())
        transitions.push_back({{"from", t.from},
                               {"to", t.to},
                               {"count", t.count},
                               {"probability", t.probability}});
    nlohmann::json j{{"states", std::move(states)},
                     {"transitions", std::move(transitions)},
                     {"provenance",
                      {{"corpus_tag", graph.provenance().corpus_tag},
                       {"user_seed", graph.provenance().user_seed},
                       {"system_seed", graph.provenance().system_seed},
                       {"user_k", graph.provenance().user_k},
                       {"system_k", graph.provenance().system_k}}}};
    if (graph.theta_applied()) j["theta_applied"] = *graph.theta_applied();
    return j;
}

inline std::string to_json(const FlowGraph& graph) {
    return graph_to_json_value(graph).dump(2) + "\n";
}

inline FlowGraph graph_from_json_value(const nlohmann::json& j) {
    FlowGraph graph;
    auto fail = [](const std::string& path, const std::string& what) -> Error {
        return Error("export: " + path + ": " + what);
    };
    if (!j.is_object()) throw fail("$", "expected an object");
    if (!j.contains("states") || !j.at("states").is_array())
        throw fail("$.states", "missing or not an array");
    if (!j.contains("transitions") || !j.at("transitions").is_array())
        throw fail("$.transitions", "missing or not an array");

    for (std::size_t i = 0; i < j.at("states").size(); ++i) {
        const std::string path = "$.states[" + std::to_string(i) + "]";
        const auto& js = j.at("states")[i];
        FlowState state;
        try {
            state.id = js.at("id").get<std::string>();
            const std::string kind = js.at("kind").get<std::string>();
            auto parsed = try_parse_state_kind(kind);
            if (!parsed) throw fail(path + ".kind", "unknown kind '" + kind + "'");
            state.kind = *parsed;
            state.size = js.at("size").get<std::size_t>();
            if (js.contains("cluster_index"))
                state.cluster_index = js.at("cluster_index").get<int>();
            if (js.contains("label")) state.label = js.at("label").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw fail(path, e.what());
        }
        try {
            graph.add_state(std::move(state));
        } catch (const Error& e) {
            throw fail(path, e.what());
        }
    }

    for (std::size_t i = 0; i < j.at("transitions").size(); ++i) {
        const std::string path = "$.transitions[" + std::to_string(i) + "]";
        const auto& jt = j.at("transitions")[i];
        Transition t;
        try {
            t.from = jt.at("from").get<std::string>();
            t.to = jt.at("to").get<std::string>();
            t.count = jt.at("count").get<std::uint64_t>();
            t.probability = jt.at("probability").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw fail(path, e.what());
        }
        try {
            graph.add_transition(std::move(t));
        } catch (const Error& e) {
            throw fail(path + " (edge " + t.from + " -> " + t.to + ")", e.what());
        }
    }

    if (j.contains("theta_applied")) {
        if (!j.at("theta_applied").is_number())
            throw fail("$.theta_applied", "expected a number");
        graph.set_theta_applied(j.at("theta_applied").get<double>());
    }
    if (j.contains("provenance")) {
        const auto& jp = j.at("provenance");
        Provenance prov;
        try {
            prov.corpus_tag = jp.value("corpus_tag", std::string{});
            prov.user_seed = jp.value("user_seed", std::uint64_t{0});
            prov.system_seed = jp.value("system_seed", std::uint64_t{0});
            prov.user_k = jp.value("user_k", 0);
            prov.system_k = jp.value("system_k", 0);
        } catch (const nlohmann::json::exception& e) {
            throw fail("$.provenance", e.what());
        }
        graph.set_provenance(std::move(prov));
    }
    return graph;
}

inline FlowGraph from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("export: malformed flow JSON: ") + e.what());
    }
    return graph_from_json_value(j);
}

inline void save_graph(const FlowGraph& graph, const std::filesystem::path& path) {
    write_text_file(path, to_json(graph));
}

inline FlowGraph load_graph(const std::filesystem::path& path) {
    return from_json(read_text_file(path));
}

} // namespace flowdisco
