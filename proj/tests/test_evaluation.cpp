#include <catch2/catch_amalgamated.hpp>

#include "flowdisco/evaluation.hpp"

#include "flowdisco/synth.hpp"
#include "test_util.hpp"

using namespace flowdisco;

namespace {

struct Fitted {
    SynthGeneration gen;
    ClusterModel user;
    ClusterModel system;
    FlowGraph flow;
};

Fitted fit_synthetic(int n_dialogues, std::uint64_t seed, const HashingProvider& provider) {
    const GroundTruthFlow truth = load_truth_flow(testutil::data_dir() / "flow5.json");
    Fitted f;
    f.gen = generate_corpus(truth, n_dialogues, 40, 0.0, seed);
    const SpeakerSplit split = split_by_speaker(f.gen.corpus);
    std::vector<std::string> ut, st;
    for (const auto& u : split.user) ut.push_back(u.text);
    for (const auto& u : split.system) st.push_back(u.text);
    f.user = kmeans(embed_batch(ut, provider), 5, 1000, derive_seed(seed, 1), Speaker::User);
    f.system = kmeans(embed_batch(st, provider), 5, 1000, derive_seed(seed, 2), Speaker::System);
    f.flow = build_graph(f.gen.corpus, f.user, f.system, &provider);
    return f;
}

} // namespace

TEST_CASE("evaluating the training corpus against its own unthresholded flow is exact") {
    const HashingProvider provider(64);
    const Fitted f = fit_synthetic(60, 7, provider);
    const EvaluationReport report =
        transition_accuracy(f.flow, f.gen.corpus, f.user, f.system, provider);
    CHECK(report.accuracy == 1.0); // exact, not approximate
    CHECK(report.predicted_transitions == report.total_transitions);
    CHECK(report.total_transitions ==
          f.gen.corpus.total_utterances() - f.gen.corpus.dialogues.size());
    CHECK(report.theta == 0.0);

    // and with SOD/EOD pairs counted as well
    const EvaluationReport with_ends =
        transition_accuracy(f.flow, f.gen.corpus, f.user, f.system, provider, true);
    CHECK(with_ends.accuracy == 1.0);
    CHECK(with_ends.total_transitions ==
          report.total_transitions + 2 * f.gen.corpus.dialogues.size());
}

TEST_CASE("the empty graph predicts nothing") {
    const HashingProvider provider(64);
    const Fitted f = fit_synthetic(10, 3, provider);
    FlowGraph empty;
    empty.set_theta_applied(0.2);
    const EvaluationReport report =
        transition_accuracy(empty, f.gen.corpus, f.user, f.system, provider);
    CHECK(report.predicted_transitions == 0);
    CHECK(report.accuracy == 0.0);
    CHECK(report.total_transitions > 0);
    CHECK(report.theta == 0.2);
}

TEST_CASE("accuracy is anti-monotone in theta") {
    const HashingProvider provider(64);
    const GroundTruthFlow truth = load_truth_flow(testutil::data_dir() / "flow5.json");
    const Fitted f = fit_synthetic(80, 11, provider);
    const SynthGeneration held_out = generate_corpus(truth, 30, 40, 0.0, 999);

    double prev = 1.1;
    for (double theta : {0.0, 0.05, 0.10, 0.15, 0.20, 0.5}) {
        const EvaluationReport report = transition_accuracy(
            apply_threshold(f.flow, theta), held_out.corpus, f.user, f.system, provider);
        CHECK(report.accuracy <= prev);
        prev = report.accuracy;
    }
}

TEST_CASE("evaluation validation") {
    const HashingProvider provider(64);
    const Fitted f = fit_synthetic(10, 3, provider);
    CHECK_THROWS_AS(transition_accuracy(f.flow, Corpus{}, f.user, f.system, provider), Error);

    const HashingProvider wrong_dim(32);
    CHECK_THROWS_AS(
        transition_accuracy(f.flow, f.gen.corpus, f.user, f.system, wrong_dim), Error);
}

TEST_CASE("per-transition log follows dialogue order and serializes to CSV") {
    const HashingProvider provider(64);
    const Fitted f = fit_synthetic(5, 13, provider);
    const EvaluationReport report =
        transition_accuracy(f.flow, f.gen.corpus, f.user, f.system, provider, false, true);
    REQUIRE(report.per_transition_log.has_value());
    CHECK(report.per_transition_log->size() == report.total_transitions);

    std::size_t row = 0;
    for (const auto& d : f.gen.corpus.dialogues)
        for (std::size_t i = 0; i + 1 < d.utterances.size(); ++i) {
            const auto& entry = report.per_transition_log->at(row++);
            CHECK(entry.dialogue_id == d.id);
            CHECK(entry.turn_index == static_cast<int>(i));
            CHECK(entry.predicted);
        }

    const std::string csv = log_to_csv(report);
    CHECK_THAT(csv, Catch::Matchers::StartsWith(
                        "dialogue_id,turn_index,from_state,to_state,predicted\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(report.total_transitions) + 1);
    CHECK_THAT(csv, Catch::Matchers::ContainsSubstring(",true\n"));

    EvaluationReport no_log;
    CHECK_THROWS_AS(log_to_csv(no_log), Error);
}

TEST_CASE("reports are deterministic") {
    const HashingProvider provider(64);
    const Fitted f = fit_synthetic(20, 29, provider);
    const EvaluationReport a =
        transition_accuracy(f.flow, f.gen.corpus, f.user, f.system, provider, true, true);
    const EvaluationReport b =
        transition_accuracy(f.flow, f.gen.corpus, f.user, f.system, provider, true, true);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.total_transitions == b.total_transitions);
    CHECK(a.predicted_transitions == b.predicted_transitions);
    REQUIRE(a.per_transition_log.has_value());
    REQUIRE(b.per_transition_log.has_value());
    CHECK(log_to_csv(a) == log_to_csv(b));
}

TEST_CASE("report_to_json carries the metric fields") {
    EvaluationReport report;
    report.theta = 0.05;
    report.total_transitions = 200;
    report.predicted_transitions = 164;
    report.accuracy = 0.82;
    const nlohmann::json j = report_to_json(report);
    CHECK(j.at("theta") == 0.05);
    CHECK(j.at("total_transitions") == 200);
    CHECK(j.at("predicted_transitions") == 164);
    CHECK(j.at("accuracy") == 0.82);
    CHECK(j.at("include_sod_eod") == false);
}
