#pragma once

// Synthetic task-oriented dialogue corpus: slot-filling scripts in a couple
// of reservation domains, with chit-chat digressions interleaved between a
// system question and the user's answer. After any non-cooperative turn the
// system repeats the pending question, so a digression turn's action label
// is that question's label and the chit-chat reply survives only in the
// system text.
//
// File format: UTF-8 JSON lines, one dialogue per line, first line metadata.

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ted/common.hpp"

namespace ted {

using json = nlohmann::json;

constexpr int kCorpusFormatVersion = 1;
constexpr const char* kGeneratorVersion = "1.0";

struct Turn {
    std::string user_text;
    std::string user_intent;
    std::map<std::string, std::string> user_entities;  // slot name -> value
    std::string system_action;
    std::string system_text;
    bool cooperative = true;

    bool operator==(const Turn&) const = default;
};

struct Dialogue {
    std::string id;
    std::string domain;
    std::vector<Turn> turns;

    bool operator==(const Dialogue&) const = default;
};

struct ChitchatIntent {
    std::string name;
    std::vector<std::string> user_texts;
    std::string answer_text;

    bool operator==(const ChitchatIntent&) const = default;
};

struct GenerationConfig {
    std::size_t n_dialogues = 800;
    std::vector<std::string> domains{"restaurant", "hotel"};
    std::map<std::string, std::vector<std::string>> required_slots{
        {"restaurant", {"cuisine", "people", "price"}},
        {"hotel", {"area", "nights", "parking", "stars"}},
    };
    double digression_probability = 0.5;
    std::size_t digression_length_min = 1;
    std::size_t digression_length_max = 3;
    std::vector<ChitchatIntent> chitchat_pool = default_chitchat_pool();
    std::uint64_t seed = 42;

    static std::vector<ChitchatIntent> default_chitchat_pool() {
        return {
            {"chitchat_joke", {"tell me a joke", "say something funny"},
             "i am not very good at jokes."},
            {"chitchat_music", {"what music do you like", "can you sing"},
             "i mostly enjoy silence."},
            {"chitchat_news", {"any interesting news today", "what is happening in the world"},
             "nothing newsworthy comes to mind."},
            {"chitchat_sports", {"did you watch the game yesterday", "who won the match last night"},
             "i do not follow sports closely."},
            {"chitchat_traffic", {"how is the traffic right now", "is the road busy"},
             "traffic looks normal as far as i can tell."},
            {"chitchat_weather", {"what is the weather like today", "is it going to rain later"},
             "i am not sure about the weather."},
        };
    }

    void validate() const {
        if (n_dialogues < 1) throw UsageError("generation config: n_dialogues must be >= 1");
        if (digression_probability < 0.0 || digression_probability > 1.0)
            throw UsageError("generation config: digression_probability must be in [0, 1]");
        if (digression_length_min > digression_length_max)
            throw UsageError("generation config: digression length min > max");
        if (digression_length_min < 1)
            throw UsageError("generation config: digression length must be >= 1");
        if (domains.empty()) throw UsageError("generation config: no domains configured");
        for (const auto& d : domains) {
            auto it = required_slots.find(d);
            if (it == required_slots.end() || it->second.empty())
                throw DataError("generation config: empty slot list for domain '" + d + "'");
        }
        if (chitchat_pool.empty())
            throw UsageError("generation config: chitchat pool must not be empty");
    }

    bool operator==(const GenerationConfig&) const = default;
};

struct CorpusMetadata {
    std::string generator_version = kGeneratorVersion;
    std::uint64_t seed = 0;
    GenerationConfig config;

    bool operator==(const CorpusMetadata&) const = default;
};

struct Corpus {
    CorpusMetadata metadata;
    std::vector<Dialogue> dialogues;

    bool operator==(const Corpus&) const = default;
};

// --- json bindings ----------------------------------------------------------

inline void to_json(json& j, const Turn& t) {
    j = json{{"user_text", t.user_text},
             {"user_intent", t.user_intent},
             {"user_entities", t.user_entities},
             {"system_action", t.system_action},
             {"system_text", t.system_text},
             {"cooperative", t.cooperative}};
}

inline void from_json(const json& j, Turn& t) {
    j.at("user_text").get_to(t.user_text);
    j.at("user_intent").get_to(t.user_intent);
    j.at("user_entities").get_to(t.user_entities);
    j.at("system_action").get_to(t.system_action);
    j.at("system_text").get_to(t.system_text);
    j.at("cooperative").get_to(t.cooperative);
}

inline void to_json(json& j, const Dialogue& d) {
    j = json{{"id", d.id}, {"domain", d.domain}, {"turns", d.turns}};
}

inline void from_json(const json& j, Dialogue& d) {
    j.at("id").get_to(d.id);
    j.at("domain").get_to(d.domain);
    j.at("turns").get_to(d.turns);
}

inline void to_json(json& j, const ChitchatIntent& c) {
    j = json{{"name", c.name}, {"user_texts", c.user_texts}, {"answer_text", c.answer_text}};
}

inline void from_json(const json& j, ChitchatIntent& c) {
    j.at("name").get_to(c.name);
    j.at("user_texts").get_to(c.user_texts);
    j.at("answer_text").get_to(c.answer_text);
}

inline void to_json(json& j, const GenerationConfig& c) {
    j = json{{"n_dialogues", c.n_dialogues},
             {"domains", c.domains},
             {"required_slots", c.required_slots},
             {"digression_probability", c.digression_probability},
             {"digression_length_range", {c.digression_length_min, c.digression_length_max}},
             {"chitchat_pool", c.chitchat_pool},
             {"seed", c.seed}};
}

inline void from_json(const json& j, GenerationConfig& c) {
    j.at("n_dialogues").get_to(c.n_dialogues);
    j.at("domains").get_to(c.domains);
    j.at("required_slots").get_to(c.required_slots);
    j.at("digression_probability").get_to(c.digression_probability);
    c.digression_length_min = j.at("digression_length_range").at(0).get<std::size_t>();
    c.digression_length_max = j.at("digression_length_range").at(1).get<std::size_t>();
    j.at("chitchat_pool").get_to(c.chitchat_pool);
    j.at("seed").get_to(c.seed);
}

// --- surface templates -------------------------------------------------------

namespace templates {

inline std::string question_text(const std::string& slot) {
    static const std::map<std::string, std::string> table = {
        {"cuisine", "what kind of cuisine are you looking for?"},
        {"people", "how many people will be joining?"},
        {"price", "what price range do you have in mind?"},
        {"area", "which part of town should the hotel be in?"},
        {"nights", "how many nights will you be staying?"},
        {"parking", "will you need a parking spot?"},
        {"stars", "how many stars should the hotel have?"},
    };
    auto it = table.find(slot);
    return it != table.end() ? it->second : "what " + slot + " do you prefer?";
}

inline const std::vector<std::string>& value_pool(const std::string& slot) {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"cuisine", {"italian", "chinese", "mexican", "indian"}},
        {"people", {"two", "four", "six"}},
        {"price", {"cheap", "moderate", "expensive"}},
        {"area", {"center", "north", "south", "east"}},
        {"nights", {"one", "three", "seven"}},
        {"parking", {"yes", "no"}},
        {"stars", {"three", "four", "five"}},
    };
    static const std::vector<std::string> fallback = {"alpha", "beta", "gamma"};
    auto it = table.find(slot);
    return it != table.end() ? it->second : fallback;
}

inline const std::vector<std::string>& greet_texts() {
    static const std::vector<std::string> v = {"hello", "hi there", "good day"};
    return v;
}

inline std::string greet_response() { return "hello, how can i help you today?"; }

inline std::vector<std::string> request_texts(const std::string& domain) {
    if (domain == "restaurant")
        return {"i would like to book a restaurant", "can you find me a place to eat"};
    if (domain == "hotel") return {"i need a hotel", "please find me a hotel"};
    return {"i need help with a " + domain, "please arrange a " + domain + " for me"};
}

inline std::vector<std::string> inform_texts(const std::string& value) {
    return {value + " please", "i would like " + value, value + " sounds good",
            "make it " + value};
}

inline const std::vector<std::string>& dont_care_texts() {
    static const std::vector<std::string> v = {"any is fine", "i do not mind", "whatever works"};
    return v;
}

inline std::string confirm_text(const std::string& domain) {
    if (domain == "restaurant") return "great, your restaurant is booked.";
    if (domain == "hotel") return "done, your hotel is reserved.";
    return "all set, your " + domain + " request is confirmed.";
}

inline std::string ask_action(const std::string& slot, const std::string& domain) {
    return "ask_" + slot + "_" + domain;
}

inline std::string confirm_action(const std::string& domain) { return "confirm_" + domain; }

constexpr const char* kGreetAction = "greet";
constexpr const char* kDontCareValue = "any";

}  // namespace templates

// --- generation ---------------------------------------------------------------

// Probability that a cooperative slot answer is "don't care" instead of a
// concrete value; fixed generator behaviour, not part of the config surface.
constexpr double kDontCareProbability = 0.1;

inline Corpus generate_corpus(const GenerationConfig& config) {
    config.validate();
    Rng rng(config.seed);
    Corpus corpus;
    corpus.metadata.generator_version = kGeneratorVersion;
    corpus.metadata.seed = config.seed;
    corpus.metadata.config = config;

    auto pick = [&rng](const std::vector<std::string>& pool) -> const std::string& {
        return pool[rng.uniform_int(pool.size())];
    };

    for (std::size_t di = 0; di < config.n_dialogues; ++di) {
        Dialogue dlg;
        dlg.id = strf("d%05zu", di);
        dlg.domain = config.domains[rng.uniform_int(config.domains.size())];
        const auto& slots = config.required_slots.at(dlg.domain);

        Turn greet;
        greet.user_text = pick(templates::greet_texts());
        greet.user_intent = "greet";
        greet.system_action = templates::kGreetAction;
        greet.system_text = templates::greet_response();
        dlg.turns.push_back(std::move(greet));

        Turn request;
        request.user_text = pick(templates::request_texts(dlg.domain));
        request.user_intent = "request_" + dlg.domain;
        request.system_action = templates::ask_action(slots[0], dlg.domain);
        request.system_text = templates::question_text(slots[0]);
        dlg.turns.push_back(std::move(request));

        for (std::size_t si = 0; si < slots.size(); ++si) {
            const std::string& slot = slots[si];
            const std::string pending_action = templates::ask_action(slot, dlg.domain);
            const std::string pending_question = templates::question_text(slot);

            // One digression block per question, with probability p. Every
            // chit-chat turn is answered in text and the question repeated;
            // the action label is the repeated question.
            if (rng.bernoulli(config.digression_probability)) {
                const std::size_t len =
                    config.digression_length_min +
                    rng.uniform_int(config.digression_length_max - config.digression_length_min +
                                    1);
                for (std::size_t j = 0; j < len; ++j) {
                    const ChitchatIntent& cc =
                        config.chitchat_pool[rng.uniform_int(config.chitchat_pool.size())];
                    Turn t;
                    t.user_text = pick(cc.user_texts);
                    t.user_intent = cc.name;
                    t.system_action = pending_action;
                    t.system_text = cc.answer_text + " " + pending_question;
                    t.cooperative = false;
                    dlg.turns.push_back(std::move(t));
                }
            }

            Turn answer;
            answer.user_intent = "inform";
            if (rng.bernoulli(kDontCareProbability)) {
                answer.user_text = pick(templates::dont_care_texts());
                answer.user_entities[slot] = templates::kDontCareValue;
            } else {
                const std::string& value = pick(templates::value_pool(slot));
                answer.user_text = pick(templates::inform_texts(value));
                answer.user_entities[slot] = value;
            }
            if (si + 1 < slots.size()) {
                answer.system_action = templates::ask_action(slots[si + 1], dlg.domain);
                answer.system_text = templates::question_text(slots[si + 1]);
            } else {
                answer.system_action = templates::confirm_action(dlg.domain);
                answer.system_text = templates::confirm_text(dlg.domain);
            }
            dlg.turns.push_back(std::move(answer));
        }
        corpus.dialogues.push_back(std::move(dlg));
    }
    return corpus;
}

// --- validation -----------------------------------------------------------------

struct Violation {
    std::string dialogue_id;
    int turn_index = -1;  // -1 for dialogue-level defects
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> warnings;
    std::size_t n_noncooperative_turns = 0;
    std::size_t n_dialogues_with_digressions = 0;

    bool ok() const { return violations.empty(); }
};

// Report-only structural check. The digression rule is checked against the
// action of the most recent cooperative turn, which for generated corpora is
// always the pending question.
inline ValidationReport validate_corpus(const Corpus& corpus) {
    ValidationReport report;
    if (corpus.dialogues.empty()) {
        report.warnings.push_back("empty corpus");
        return report;
    }
    std::set<std::string> seen_ids;
    for (const Dialogue& dlg : corpus.dialogues) {
        if (!seen_ids.insert(dlg.id).second)
            report.violations.push_back({dlg.id, -1, "duplicate dialogue id"});
        if (dlg.turns.empty()) {
            report.violations.push_back({dlg.id, -1, "dialogue has no turns"});
            continue;
        }
        bool has_digression = false;
        std::string pending;  // action of the last cooperative turn
        for (std::size_t t = 0; t < dlg.turns.size(); ++t) {
            const Turn& turn = dlg.turns[t];
            const int ti = static_cast<int>(t);
            if (turn.user_intent.empty())
                report.violations.push_back({dlg.id, ti, "empty user_intent"});
            if (turn.system_action.empty())
                report.violations.push_back({dlg.id, ti, "empty system_action"});
            if (!turn.cooperative) {
                has_digression = true;
                ++report.n_noncooperative_turns;
                if (!turn.user_entities.empty())
                    report.violations.push_back(
                        {dlg.id, ti, "non-cooperative turn carries entities"});
                if (pending.empty()) {
                    report.violations.push_back(
                        {dlg.id, ti, "non-cooperative turn before any system question"});
                } else if (turn.system_action != pending) {
                    report.violations.push_back(
                        {dlg.id, ti,
                         "non-cooperative turn answered with '" + turn.system_action +
                             "' but the pending question is '" + pending + "'"});
                }
            } else {
                pending = turn.system_action;
            }
        }
        if (has_digression) ++report.n_dialogues_with_digressions;
        const std::string& last = dlg.turns.back().system_action;
        if (last.rfind("confirm", 0) != 0)
            report.warnings.push_back("dialogue " + dlg.id +
                                      " does not end in a confirmation action");
    }
    return report;
}

// --- split ------------------------------------------------------------------------

inline std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_fraction,
                                       std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw UsageError("split: train fraction must be strictly between 0 and 1");
    if (corpus.dialogues.size() < 2)
        throw DataError("split: corpus must contain at least 2 dialogues");
    std::vector<std::size_t> order(corpus.dialogues.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(
        std::ceil(train_fraction * static_cast<double>(order.size())));
    Corpus train, test;
    train.metadata = corpus.metadata;
    test.metadata = corpus.metadata;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? train : test).dialogues.push_back(corpus.dialogues[order[i]]);
    }
    return {std::move(train), std::move(test)};
}

// --- serialization -----------------------------------------------------------------

inline std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    json meta{{"format_version", kCorpusFormatVersion},
              {"generator_version", corpus.metadata.generator_version},
              {"seed", corpus.metadata.seed},
              {"config", corpus.metadata.config}};
    out += meta.dump();
    out += '\n';
    for (const Dialogue& d : corpus.dialogues) {
        out += json(d).dump();
        out += '\n';
    }
    return out;
}

inline Corpus corpus_from_jsonl(std::istream& in) {
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    bool saw_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(strf("corpus line %zu: malformed record: %s", line_no, e.what()));
        }
        try {
            if (!saw_meta) {
                const int version = j.at("format_version").get<int>();
                if (version != kCorpusFormatVersion)
                    throw DataError(strf("corpus line %zu: unsupported format_version %d", line_no,
                                         version));
                j.at("generator_version").get_to(corpus.metadata.generator_version);
                j.at("seed").get_to(corpus.metadata.seed);
                j.at("config").get_to(corpus.metadata.config);
                saw_meta = true;
            } else {
                corpus.dialogues.push_back(j.get<Dialogue>());
            }
        } catch (const DataError&) {
            throw;
        } catch (const json::exception& e) {
            throw DataError(strf("corpus line %zu: %s", line_no, e.what()));
        }
    }
    if (!saw_meta) throw DataError("corpus file has no metadata record");
    return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << corpus_to_jsonl(corpus);
    if (!out) throw DataError("failed writing corpus to '" + path + "'");
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file '" + path + "'");
    return corpus_from_jsonl(in);
}

}  // namespace ted
