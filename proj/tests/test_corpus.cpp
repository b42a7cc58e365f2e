#include <catch2/catch_amalgamated.hpp>

#include "flowdisco/corpus.hpp"

#include <cstdlib>

#include "test_util.hpp"

using namespace flowdisco;

TEST_CASE("load_multiwoz reads dialogues and ignores annotations") {
    const Corpus corpus = load_multiwoz(testutil::data_dir() / "multiwoz_mini.json", "train");
    REQUIRE(corpus.dialogues.size() == 3);
    REQUIRE(corpus.total_utterances() == 12);
    REQUIRE(corpus.portion_tag == "train");

    const Dialogue& sng = corpus.dialogues[0];
    REQUIRE(sng.id == "SNG1066");
    REQUIRE(sng.utterances.size() == 6);
    const std::vector<Speaker> expected = {Speaker::User,   Speaker::System, Speaker::User,
                                           Speaker::System, Speaker::User,   Speaker::System};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(sng.utterances[i].speaker == expected[i]);
        CHECK(sng.utterances[i].turn_index == static_cast<int>(i));
        CHECK(sng.utterances[i].dialogue_id == "SNG1066");
    }
    CHECK(sng.utterances[0].text ==
          "Could you help me find a boat to visit on the north side?");

    // surrounding whitespace is trimmed at ingestion
    CHECK(corpus.dialogues[1].utterances[2].text == "Yes, and free wifi please.");
}

TEST_CASE("load_multiwoz error paths") {
    testutil::TempDir tmp;
    CHECK_THROWS_AS(load_multiwoz(tmp.file("missing.json")), Error);

    CHECK_THROWS_WITH(load_multiwoz(testutil::write_file(tmp.file("bad.json"), "{ not json")),
                      Catch::Matchers::ContainsSubstring("malformed JSON"));

    CHECK_THROWS_WITH(
        load_multiwoz(testutil::write_file(tmp.file("zero.json"),
                                           R"([{"dialogue_id": "D1", "turns": []}])")),
        Catch::Matchers::ContainsSubstring("zero turns"));

    CHECK_THROWS_WITH(
        load_multiwoz(testutil::write_file(
            tmp.file("nospeaker.json"),
            R"([{"dialogue_id": "D1", "turns": [{"utterance": "hi"}]}])")),
        Catch::Matchers::ContainsSubstring("missing speaker"));

    CHECK_THROWS_WITH(
        load_multiwoz(testutil::write_file(
            tmp.file("notext.json"),
            R"([{"dialogue_id": "D1", "turns": [{"speaker": "USER"}]}])")),
        Catch::Matchers::ContainsSubstring("missing utterance text"));

    CHECK_THROWS_WITH(
        load_multiwoz(testutil::write_file(
            tmp.file("badspeaker.json"),
            R"([{"dialogue_id": "D1", "turns": [{"speaker": "AGENT", "utterance": "hi"}]}])")),
        Catch::Matchers::ContainsSubstring("unknown speaker"));

    CHECK_THROWS_WITH(
        load_multiwoz(testutil::write_file(
            tmp.file("dup.json"),
            R"([{"dialogue_id": "D1", "turns": [{"speaker": "USER", "utterance": "a"}]},
                {"dialogue_id": "D1", "turns": [{"speaker": "USER", "utterance": "b"}]}])")),
        Catch::Matchers::ContainsSubstring("duplicate dialogue id"));
}

TEST_CASE("load_multiwoz accepts an empty list") {
    testutil::TempDir tmp;
    const Corpus corpus = load_multiwoz(testutil::write_file(tmp.file("empty.json"), "[]"));
    CHECK(corpus.dialogues.empty());
    CHECK_THROWS_AS(split_by_speaker(corpus), Error);
}

TEST_CASE("load_multiwoz over a directory of shards") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("b_second.json"),
                         R"([{"dialogue_id": "D2", "turns": [{"speaker": "USER", "utterance": "two"}]}])");
    testutil::write_file(tmp.file("a_first.json"),
                         R"([{"dialogue_id": "D1", "turns": [{"speaker": "USER", "utterance": "one"}]}])");
    const Corpus corpus = load_multiwoz(tmp.path);
    REQUIRE(corpus.dialogues.size() == 2);
    CHECK(corpus.dialogues[0].id == "D1"); // filename order
    CHECK(corpus.dialogues[1].id == "D2");
}

TEST_CASE("load_jsonl groups and orders utterances") {
    testutil::TempDir tmp;
    const auto path = testutil::write_file(tmp.file("c.jsonl"), R"({"dialogue_id":"d1","turn_index":0,"speaker":"USER","text":"a"}
{"dialogue_id":"d2","turn_index":0,"speaker":"USER","text":"x"}
{"dialogue_id":"d1","turn_index":2,"speaker":"USER","text":"c"}
{"dialogue_id":"d2","turn_index":1,"speaker":"SYSTEM","text":"y"}
{"dialogue_id":"d1","turn_index":1,"speaker":"SYSTEM","text":"b"}
)");
    const Corpus corpus = load_jsonl(path);
    REQUIRE(corpus.dialogues.size() == 2);
    CHECK(corpus.dialogues[0].id == "d1"); // first-appearance order
    REQUIRE(corpus.dialogues[0].utterances.size() == 3);
    CHECK(corpus.dialogues[0].utterances[1].text == "b");
    CHECK(corpus.dialogues[1].utterances[1].text == "y");
}

TEST_CASE("load_jsonl error paths name the offending line") {
    testutil::TempDir tmp;
    CHECK_THROWS_WITH(
        load_jsonl(testutil::write_file(
            tmp.file("agent.jsonl"),
            "{\"dialogue_id\":\"d\",\"turn_index\":0,\"speaker\":\"USER\",\"text\":\"a\"}\n"
            "{\"dialogue_id\":\"d\",\"turn_index\":1,\"speaker\":\"AGENT\",\"text\":\"b\"}\n")),
        Catch::Matchers::ContainsSubstring("line 2") &&
            Catch::Matchers::ContainsSubstring("AGENT"));

    CHECK_THROWS_WITH(
        load_jsonl(testutil::write_file(
            tmp.file("dup.jsonl"),
            "{\"dialogue_id\":\"d\",\"turn_index\":0,\"speaker\":\"USER\",\"text\":\"a\"}\n"
            "{\"dialogue_id\":\"d\",\"turn_index\":0,\"speaker\":\"SYSTEM\",\"text\":\"b\"}\n")),
        Catch::Matchers::ContainsSubstring("duplicate turn_index"));

    CHECK_THROWS_WITH(
        load_jsonl(testutil::write_file(
            tmp.file("gap.jsonl"),
            "{\"dialogue_id\":\"d\",\"turn_index\":0,\"speaker\":\"USER\",\"text\":\"a\"}\n"
            "{\"dialogue_id\":\"d\",\"turn_index\":2,\"speaker\":\"SYSTEM\",\"text\":\"b\"}\n")),
        Catch::Matchers::ContainsSubstring("gap in turn_index"));
}

TEST_CASE("jsonl round-trip preserves ids, order and text bytes") {
    Corpus corpus;
    corpus.dialogues.push_back(
        {"d-β",
         {{"d-β", 0, Speaker::User, "héllo wörld ✓"}, {"d-β", 1, Speaker::System, "ok — done"}}});
    corpus.dialogues.push_back({"a-001", {{"a-001", 0, Speaker::User, "plain"}}});

    testutil::TempDir tmp;
    write_jsonl(corpus, tmp.file("rt.jsonl"));
    const Corpus loaded = load_jsonl(tmp.file("rt.jsonl"));
    REQUIRE(loaded.dialogues.size() == 2);
    CHECK(loaded.dialogues == corpus.dialogues);
}

TEST_CASE("split_by_speaker partitions and preserves order") {
    const Corpus corpus = load_multiwoz(testutil::data_dir() / "multiwoz_mini.json");
    const SpeakerSplit split = split_by_speaker(corpus);
    CHECK(split.user.size() == 6);
    CHECK(split.system.size() == 6);
    CHECK(split.user.size() + split.system.size() == corpus.total_utterances());
    CHECK(split.user[0].dialogue_id == "SNG1066");
    CHECK(split.user[3].dialogue_id == "MWOZ0001"); // global order kept
    for (const auto& u : split.user) CHECK(u.speaker == Speaker::User);
    for (const auto& u : split.system) CHECK(u.speaker == Speaker::System);
}

TEST_CASE("split_by_speaker degenerate single-speaker corpus") {
    Corpus corpus;
    corpus.dialogues.push_back({"d", {{"d", 0, Speaker::User, "hi"}}});
    const SpeakerSplit split = split_by_speaker(corpus);
    REQUIRE(split.user.size() == 1);
    CHECK(split.system.empty());
}

// Runs only when FLOWDISCO_MULTIWOZ_TRAIN points at the real dataset.
TEST_CASE("MultiWOZ 2.2 train portion matches the published counts") {
    const char* train = std::getenv("FLOWDISCO_MULTIWOZ_TRAIN");
    if (!train || !*train) {
        SUCCEED("skipped: FLOWDISCO_MULTIWOZ_TRAIN unset");
        return;
    }
    const Corpus corpus = load_multiwoz(train, "train");
    CHECK(corpus.dialogues.size() == 8436);
    CHECK(corpus.total_utterances() == 113552);
    const SpeakerSplit split = split_by_speaker(corpus);
    CHECK(split.user.size() == 56776);
    CHECK(split.system.size() == 56776);
}

TEST_CASE("speaker alternation violations warn instead of failing") {
    testutil::TempDir tmp;
    const auto path = testutil::write_file(
        tmp.file("noalt.jsonl"),
        "{\"dialogue_id\":\"d\",\"turn_index\":0,\"speaker\":\"USER\",\"text\":\"a\"}\n"
        "{\"dialogue_id\":\"d\",\"turn_index\":1,\"speaker\":\"USER\",\"text\":\"b\"}\n");
    const Corpus corpus = load_jsonl(path); // no throw
    const auto warnings = alternation_warnings(corpus);
    REQUIRE(warnings.size() == 1);
    CHECK_THAT(warnings[0], Catch::Matchers::ContainsSubstring("do not alternate"));

    const Corpus clean = load_multiwoz(testutil::data_dir() / "multiwoz_mini.json");
    CHECK(alternation_warnings(clean).empty());
}
