#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowdisco/common.hpp"

namespace flowdisco {

enum class Speaker { User, System };

inline const char* speaker_name(Speaker s) {
    return s == Speaker::User ? "USER" : "SYSTEM";
}

inline std::optional<Speaker> try_parse_speaker(const std::string& s) {
    if (s == "USER") return Speaker::User;
    if (s == "SYSTEM") return Speaker::System;
    return std::nullopt;
}

struct Utterance {
    std::string dialogue_id;
    int turn_index = 0;
    Speaker speaker = Speaker::User;
    std::string text;

    bool operator==(const Utterance&) const = default;
};

struct Dialogue {
    std::string id;
    std::vector<Utterance> utterances;

    bool operator==(const Dialogue&) const = default;
};

// Immutable after load; safe to share across threads.
struct Corpus {
    std::vector<Dialogue> dialogues;
    std::string portion_tag;

    std::size_t total_utterances() const {
        std::size_t n = 0;
        for (const auto& d : dialogues) n += d.utterances.size();
        return n;
    }

    bool operator==(const Corpus&) const = default;
};

struct SpeakerSplit {
    std::vector<Utterance> user;
    std::vector<Utterance> system;
};

namespace detail {

inline std::string upper_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

inline void check_dialogue(const Dialogue& d, const char* source) {
    if (d.utterances.empty())
        throw Error(std::string(source) + ": dialogue '" + d.id + "' has zero turns");
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        const Utterance& u = d.utterances[i];
        if (u.dialogue_id != d.id)
            throw Error(std::string(source) + ": utterance dialogue_id '" + u.dialogue_id +
                        "' does not match dialogue '" + d.id + "'");
        if (u.turn_index != static_cast<int>(i))
            throw Error(std::string(source) + ": dialogue '" + d.id +
                        "' has a gap in turn_index sequence (expected " + std::to_string(i) +
                        ", got " + std::to_string(u.turn_index) + ")");
        if (u.text.empty())
            throw Error(std::string(source) + ": dialogue '" + d.id + "' turn " +
                        std::to_string(u.turn_index) + " has empty text");
    }
}

inline Dialogue parse_multiwoz_dialogue(const nlohmann::json& jd, std::size_t pos) {
    if (!jd.is_object())
        throw Error("multiwoz: entry " + std::to_string(pos) + " is not an object");
    std::string id;
    if (jd.contains("dialogue_id")) id = jd.at("dialogue_id").get<std::string>();
    else if (jd.contains("id")) id = jd.at("id").get<std::string>();
    else throw Error("multiwoz: entry " + std::to_string(pos) + " is missing dialogue_id");

    if (!jd.contains("turns") || !jd.at("turns").is_array() || jd.at("turns").empty())
        throw Error("multiwoz: dialogue '" + id + "' has zero turns");

    Dialogue d;
    d.id = id;
    int index = 0;
    for (const auto& jt : jd.at("turns")) {
        if (!jt.contains("speaker"))
            throw Error("multiwoz: dialogue '" + id + "' turn " + std::to_string(index) +
                        " is missing speaker");
        auto speaker = try_parse_speaker(upper_ascii(jt.at("speaker").get<std::string>()));
        if (!speaker)
            throw Error("multiwoz: dialogue '" + id + "' turn " + std::to_string(index) +
                        " has unknown speaker '" + jt.at("speaker").get<std::string>() + "'");
        std::string text;
        if (jt.contains("utterance")) text = jt.at("utterance").get<std::string>();
        else if (jt.contains("text")) text = jt.at("text").get<std::string>();
        else
            throw Error("multiwoz: dialogue '" + id + "' turn " + std::to_string(index) +
                        " is missing utterance text");
        // All other turn annotations (frames, dialogue_acts, ...) are ignored.
        d.utterances.push_back({id, index, *speaker, trim(text)});
        ++index;
    }
    check_dialogue(d, "multiwoz");
    return d;
}

inline void append_multiwoz_file(Corpus& corpus, const std::filesystem::path& file) {
    nlohmann::json root;
    try {
        std::ifstream in(file);
        if (!in) throw Error("multiwoz: cannot open file: " + file.string());
        root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("multiwoz: malformed JSON in " + file.string() + ": " + e.what());
    }
    if (!root.is_array())
        throw Error("multiwoz: expected a JSON list of dialogues in " + file.string());
    for (std::size_t i = 0; i < root.size(); ++i)
        corpus.dialogues.push_back(parse_multiwoz_dialogue(root[i], i));
}

} // namespace detail

// Reads MultiWOZ 2.2-style JSON: a list of dialogues, each with an id and an
// ordered turn list carrying speaker + utterance text. `path` may be a single
// file or a directory of *.json shards (loaded in filename order).
inline Corpus load_multiwoz(const std::filesystem::path& path, std::string portion_tag = "") {
    if (!std::filesystem::exists(path))
        throw Error("multiwoz: path does not exist: " + path.string());
    Corpus corpus;
    corpus.portion_tag = std::move(portion_tag);
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw Error("multiwoz: no .json files in directory: " + path.string());
        for (const auto& f : files) detail::append_multiwoz_file(corpus, f);
    } else {
        detail::append_multiwoz_file(corpus, path);
    }
    std::set<std::string> seen;
    for (const auto& d : corpus.dialogues)
        if (!seen.insert(d.id).second)
            throw Error("multiwoz: duplicate dialogue id '" + d.id + "'");
    return corpus;
}

// One utterance per line: {"dialogue_id", "turn_index", "speaker", "text"}.
// Dialogues keep their first-appearance order; turns are sorted by turn_index.
inline Corpus load_jsonl(const std::filesystem::path& path, std::string portion_tag = "") {
    std::ifstream in(path);
    if (!in) throw Error("jsonl: cannot open file: " + path.string());

    std::vector<std::string> order;
    std::map<std::string, std::vector<Utterance>> by_dialogue;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("jsonl: line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        Utterance u;
        try {
            u.dialogue_id = j.at("dialogue_id").get<std::string>();
            u.turn_index = j.at("turn_index").get<int>();
            u.text = trim(j.at("text").get<std::string>());
            const std::string sp = j.at("speaker").get<std::string>();
            auto speaker = try_parse_speaker(sp);
            if (!speaker)
                throw Error("jsonl: line " + std::to_string(line_no) + ": unknown speaker '" +
                            sp + "' (expected USER or SYSTEM)");
            u.speaker = *speaker;
        } catch (const nlohmann::json::exception& e) {
            throw Error("jsonl: line " + std::to_string(line_no) + ": " + e.what());
        }
        if (u.turn_index < 0)
            throw Error("jsonl: line " + std::to_string(line_no) + ": negative turn_index");
        if (u.text.empty())
            throw Error("jsonl: line " + std::to_string(line_no) + ": empty text");
        auto it = by_dialogue.find(u.dialogue_id);
        if (it == by_dialogue.end()) {
            order.push_back(u.dialogue_id);
            it = by_dialogue.emplace(u.dialogue_id, std::vector<Utterance>{}).first;
        }
        for (const auto& prev : it->second)
            if (prev.turn_index == u.turn_index)
                throw Error("jsonl: line " + std::to_string(line_no) + ": duplicate turn_index " +
                            std::to_string(u.turn_index) + " in dialogue '" + u.dialogue_id + "'");
        it->second.push_back(std::move(u));
    }

    Corpus corpus;
    corpus.portion_tag = std::move(portion_tag);
    for (const auto& id : order) {
        Dialogue d;
        d.id = id;
        d.utterances = by_dialogue.at(id);
        std::sort(d.utterances.begin(), d.utterances.end(),
                  [](const Utterance& a, const Utterance& b) { return a.turn_index < b.turn_index; });
        detail::check_dialogue(d, "jsonl");
        corpus.dialogues.push_back(std::move(d));
    }
    return corpus;
}

inline void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& d : corpus.dialogues) {
        for (const auto& u : d.utterances) {
            nlohmann::json j{{"dialogue_id", u.dialogue_id},
                             {"turn_index", u.turn_index},
                             {"speaker", speaker_name(u.speaker)},
                             {"text", u.text}};
            out << j.dump() << "\n";
        }
    }
    write_text_file(path, out.str());
}

// Two lists preserving global order; union is all utterances.
inline SpeakerSplit split_by_speaker(const Corpus& corpus) {
    if (corpus.dialogues.empty()) throw Error("corpus: cannot split an empty corpus");
    SpeakerSplit split;
    for (const auto& d : corpus.dialogues)
        for (const auto& u : d.utterances)
            (u.speaker == Speaker::User ? split.user : split.system).push_back(u);
    return split;
}

// Speaker alternation is a data-quality signal, not a hard invariant.
inline std::vector<std::string> alternation_warnings(const Corpus& corpus) {
    std::vector<std::string> warnings;
    for (const auto& d : corpus.dialogues)
        for (std::size_t i = 1; i < d.utterances.size(); ++i)
            if (d.utterances[i].speaker == d.utterances[i - 1].speaker)
                warnings.push_back("dialogue '" + d.id + "': speakers do not alternate at turn " +
                                   std::to_string(d.utterances[i].turn_index));
    return warnings;
}

} // namespace flowdisco
