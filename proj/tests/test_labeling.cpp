#include <catch2/catch_amalgamated.hpp>

#include "flowdisco/labeling.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "test_util.hpp"

using namespace flowdisco;

TEST_CASE("label_cluster picks the length-weighted frequent n-gram") {
    const std::vector<std::string> utterances(10, "thank you goodbye");
    CHECK(label_cluster(utterances) == "thank you goodbye");
}

TEST_CASE("label_cluster single candidate with unigram floor") {
    LabelerConfig config;
    config.ngram_min = 1;
    CHECK(label_cluster({"hello"}, config) == "hello");
}

TEST_CASE("label_cluster stopword edge filtering") {
    // "find a hotel" keeps an inner stopword; edge stopwords are rejected
    const std::vector<std::string> utterances(5, "find a hotel");
    CHECK(label_cluster(utterances) == "find a hotel");

    LabelerConfig keep_all;
    keep_all.stopword_policy = StopwordPolicy::KeepAll;
    keep_all.ngram_max = 2;
    // score tie between "find a" and "a hotel": lexicographic order decides
    CHECK(label_cluster(utterances, keep_all) == "a hotel");
}

TEST_CASE("label_cluster falls back when nothing survives") {
    CHECK(label_cluster({"the of and", "to a in"}) == "state");
    CHECK(label_cluster({"the of hotel", "a hotel of"}) == "hotel"); // unigram fallback
}

TEST_CASE("label_cluster validation") {
    CHECK_THROWS_AS(label_cluster({}), Error);
    LabelerConfig bad;
    bad.ngram_min = 3;
    bad.ngram_max = 2;
    CHECK_THROWS_AS(label_cluster({"x"}, bad), Error);
}

TEST_CASE("label_cluster is permutation-invariant") {
    std::vector<std::string> utterances = {"book a hotel now",  "book a hotel today",
                                           "find a cheap room", "book a hotel now",
                                           "thank you much",    "find a cheap room"};
    const std::string label = label_cluster(utterances);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(utterances.begin(), utterances.end(), rng);
        CHECK(label_cluster(utterances) == label);
    }
}

TEST_CASE("label_cluster respects the stopword file override") {
    testutil::TempDir tmp;
    const auto path = testutil::write_file(tmp.file("stop.txt"), "thank\n");
    LabelerConfig config;
    config.stopword_file = path;
    // "thank" is now a stopword, "you" is not
    CHECK(label_cluster(std::vector<std::string>(4, "thank you goodbye"), config) ==
          "you goodbye");
}

TEST_CASE("built-in stopword list matches the shipped resource file") {
    const auto file_words = load_stopwords(testutil::repo_data_dir() / "stopwords_en.txt");
    CHECK(file_words == default_stopwords());
    CHECK(default_stopwords().size() == 125);
}

TEST_CASE("dedupe_labels suffixes duplicates in order") {
    CHECK(dedupe_labels({"book hotel", "book hotel"}) ==
          std::vector<std::string>{"book hotel 1", "book hotel 2"});
    CHECK(dedupe_labels({"greet", "thank"}) == std::vector<std::string>{"greet", "thank"});
    CHECK(dedupe_labels({"a", "a", "a"}) == std::vector<std::string>{"a 1", "a 2", "a 3"});
    CHECK(dedupe_labels({}).empty());
}

TEST_CASE("dedupe_labels avoids colliding with existing labels") {
    const auto out = dedupe_labels({"a", "a 1", "a"});
    CHECK(std::set<std::string>(out.begin(), out.end()).size() == out.size());
    CHECK(out[1] == "a 1"); // unique labels pass through unchanged
}

TEST_CASE("dedupe_labels output is duplicate-free for random inputs") {
    std::mt19937_64 rng(555);
    const std::vector<std::string> pool = {"a", "b", "a 1", "b 2", "state", "a 2"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> labels;
        const std::size_t n = uniform_index(rng, 12);
        for (std::size_t i = 0; i < n; ++i) labels.push_back(pool[uniform_index(rng, pool.size())]);
        const auto out = dedupe_labels(labels);
        REQUIRE(out.size() == labels.size());
        CHECK(std::set<std::string>(out.begin(), out.end()).size() == out.size());
    }
}

namespace {

ClusterModel tiny_model(Speaker scope, int k, std::vector<int> assignments) {
    ClusterModel m;
    m.k = k;
    m.dim = 2;
    m.centroids.assign(static_cast<std::size_t>(k) * 2, 0.0);
    m.assignments = std::move(assignments);
    m.speaker_scope = scope;
    return m;
}

} // namespace

TEST_CASE("label_graph labels cluster states and leaves SOD/EOD alone") {
    Corpus corpus;
    Dialogue d;
    d.id = "d";
    d.utterances = {{"d", 0, Speaker::User, "find a hotel please"},
                    {"d", 1, Speaker::System, "thank you kindly"},
                    {"d", 2, Speaker::User, "find a hotel room"},
                    {"d", 3, Speaker::System, "thank you again"}};
    corpus.dialogues.push_back(d);
    const ClusterModel user = tiny_model(Speaker::User, 1, {0, 0});
    const ClusterModel system = tiny_model(Speaker::System, 1, {0, 0});
    const FlowGraph g = build_graph(corpus, user, system);

    const FlowGraph labeled = label_graph(g, corpus, user, system);
    CHECK(labeled.states().at("USER_00").label == "find a hotel");
    CHECK(labeled.states().at("SYSTEM_00").label == "thank you");
    CHECK_FALSE(labeled.states().at("SOD").label.has_value());
    CHECK_FALSE(labeled.states().at("EOD").label.has_value());
    // transitions unchanged
    CHECK(labeled.transitions() == g.transitions());
}

TEST_CASE("label_graph dedupes identical cluster labels") {
    Corpus corpus;
    Dialogue d;
    d.id = "d";
    d.utterances = {{"d", 0, Speaker::User, "book hotel"},
                    {"d", 1, Speaker::User, "book hotel"}};
    corpus.dialogues.push_back(d);
    const ClusterModel user = tiny_model(Speaker::User, 2, {0, 1});
    const ClusterModel system = tiny_model(Speaker::System, 1, {});
    const FlowGraph g = build_graph(corpus, user, system);

    const FlowGraph labeled = label_graph(g, corpus, user, system);
    CHECK(labeled.states().at("USER_00").label == "book hotel 1");
    CHECK(labeled.states().at("USER_01").label == "book hotel 2");
}

TEST_CASE("label_graph on the empty graph is the identity") {
    const FlowGraph empty;
    Corpus corpus;
    corpus.dialogues.push_back({"d", {{"d", 0, Speaker::User, "x"}}});
    const ClusterModel user = tiny_model(Speaker::User, 1, {0});
    const ClusterModel system = tiny_model(Speaker::System, 1, {});
    CHECK(label_graph(empty, corpus, user, system) == empty);
}

TEST_CASE("every cluster state receives a non-empty label") {
    Corpus corpus;
    Dialogue d;
    d.id = "d";
    d.utterances = {{"d", 0, Speaker::User, "of the and"},  // stopwords only
                    {"d", 1, Speaker::System, "hello there friend"}};
    corpus.dialogues.push_back(d);
    const ClusterModel user = tiny_model(Speaker::User, 1, {0});
    const ClusterModel system = tiny_model(Speaker::System, 1, {0});
    const FlowGraph labeled =
        label_graph(build_graph(corpus, user, system), corpus, user, system);
    for (const auto& [id, state] : labeled.states()) {
        if (state.kind == StateKind::Sod || state.kind == StateKind::Eod) continue;
        REQUIRE(state.label.has_value());
        CHECK_FALSE(state.label->empty());
    }
    CHECK(labeled.states().at("USER_00").label == "state");
}
