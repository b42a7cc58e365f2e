#pragma once

// Seeded random FlowGraph generator shared by the round-trip suites. Covers
// the schema corners: escaped labels, awkward doubles, self-loops, optional
// theta.

#include <random>
#include <string>
#include <vector>

#include "flowdisco/flowgraph.hpp"

namespace testutil {

inline flowdisco::FlowGraph random_graph(std::uint64_t seed) {
    using namespace flowdisco;
    std::mt19937_64 rng(seed);
    FlowGraph g;
    g.add_state({"SOD", StateKind::Sod, std::nullopt, std::nullopt, uniform_index(rng, 50) + 1});
    g.add_state({"EOD", StateKind::Eod, std::nullopt, std::nullopt, uniform_index(rng, 50) + 1});
    const int users = 1 + static_cast<int>(uniform_index(rng, 4));
    const int systems = 1 + static_cast<int>(uniform_index(rng, 4));
    const std::vector<std::string> label_pool = {
        "find a hotel", "say \"hi\"", "back\\slash", "héllo ✓", "", "book 1"};
    std::vector<std::string> ids;
    for (int i = 0; i < users + systems; ++i) {
        const bool user = i < users;
        FlowState s;
        s.id = state_id(user ? Speaker::User : Speaker::System, user ? i : i - users);
        s.kind = user ? StateKind::UserCluster : StateKind::SystemCluster;
        s.cluster_index = user ? i : i - users;
        s.size = uniform_index(rng, 1000) + 1;
        if (uniform_index(rng, 3) > 0) s.label = label_pool[uniform_index(rng, label_pool.size())];
        ids.push_back(s.id);
        g.add_state(std::move(s));
    }
    const std::vector<double> probs = {1.0, 0.5, 1.0 / 3.0, 0.1234567890123456, 1e-15, 0.666};
    for (const auto& from : ids)
        for (const auto& to : ids)
            if (uniform_index(rng, 3) == 0)
                g.add_transition({from, to, uniform_index(rng, 100) + 1,
                                  probs[uniform_index(rng, probs.size())]});
    g.add_transition({"SOD", ids[0], 7, 0.7});
    g.add_transition({ids[0], "EOD", 3, 0.3});
    if (uniform_index(rng, 2) == 0) g.set_theta_applied(0.05 * uniform_index(rng, 5));
    Provenance prov;
    prov.corpus_tag = uniform_index(rng, 2) ? "train" : "";
    prov.user_seed = rng();
    prov.system_seed = rng();
    prov.user_k = users;
    prov.system_k = systems;
    g.set_provenance(std::move(prov));
    return g;
}

} // namespace testutil
